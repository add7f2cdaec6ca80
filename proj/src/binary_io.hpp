#pragma once

// Internal little-endian binary file helpers used by the E2FM/E2BW/E2IX/E2DS
// formats. Readers track the byte offset so format errors can report where
// the file went bad.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "e2bows/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian; big-endian hosts need byte swaps");

namespace e2bows::detail {

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open for writing: " + path);
  }

  void magic(const char tag[4]) { out_.write(tag, 4); }
  void u8(std::uint8_t v) { raw(&v, sizeof v); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }

  void close() {
    out_.close();
    if (!out_) throw IoError("write failed: " + path_);
  }

 private:
  void raw(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
  }
  std::string path_;
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open for reading: " + path);
  }

  void expect_magic(const char tag[4]) {
    char got[4] = {};
    raw(got, 4, "magic");
    if (std::memcmp(got, tag, 4) != 0) {
      throw FormatError(path_ + ": bad magic at byte 0 (expected \"" +
                        std::string(tag, 4) + "\")");
    }
  }

  std::uint8_t u8() { return scalar<std::uint8_t>("u8"); }
  std::uint32_t u32() { return scalar<std::uint32_t>("u32"); }
  std::uint64_t u64() { return scalar<std::uint64_t>("u64"); }
  float f32() { return scalar<float>("f32"); }
  double f64() { return scalar<double>("f64"); }

  std::size_t offset() const { return offset_; }

  void expect_eof() {
    if (in_.peek() != std::ifstream::traits_type::eof()) {
      throw FormatError(path_ + ": trailing bytes at byte " +
                        std::to_string(offset_));
    }
  }

  [[noreturn]] void fail(const std::string& what) {
    throw FormatError(path_ + ": " + what + " at byte " +
                      std::to_string(offset_));
  }

 private:
  template <typename T>
  T scalar(const char* what) {
    T v{};
    raw(&v, sizeof v, what);
    return v;
  }

  void raw(void* p, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(path_ + ": truncated while reading " +
                        std::string(what) + " at byte " +
                        std::to_string(offset_));
    }
    offset_ += n;
  }

  std::string path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

}  // namespace e2bows::detail
