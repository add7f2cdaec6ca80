#include "e2bows/index.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include "binary_io.hpp"
#include "e2bows/errors.hpp"

namespace e2bows {

std::size_t InvertedIndex::total_postings() const {
  std::size_t total = 0;
  for (const auto& list : postings) total += list.size();
  return total;
}

InvertedIndex build_index(
    const std::vector<std::pair<std::uint64_t, VisualWordVector>>& vectors,
    std::uint32_t dim) {
  InvertedIndex index;
  index.dim = dim;
  index.image_count = static_cast<std::uint32_t>(vectors.size());
  index.postings.resize(dim);

  std::unordered_set<std::uint64_t> seen;
  seen.reserve(vectors.size());
  for (const auto& [image_id, vec] : vectors) {
    if (!seen.insert(image_id).second) {
      throw ArgumentError("build_index: duplicate image id " +
                          std::to_string(image_id));
    }
    for (const auto& e : vec.entries) {
      if (e.word_id >= dim) {
        throw DimensionError("build_index: word id " + std::to_string(e.word_id) +
                             " outside dim " + std::to_string(dim));
      }
      if (!(e.value > 0.0)) {
        throw ArgumentError("build_index: non-positive value for image " +
                            std::to_string(image_id));
      }
      index.postings[e.word_id].push_back({image_id, e.value});
    }
  }
  for (auto& list : index.postings) {
    std::sort(list.begin(), list.end(),
              [](const Posting& a, const Posting& b) { return a.image_id < b.image_id; });
  }
  return index;
}

RankedList query_index(const InvertedIndex& index, const VisualWordVector& q,
                       std::size_t k) {
  if (k == 0) throw ArgumentError("query: k must be positive");
  if (q.dim != index.dim) {
    throw DimensionError("query: vector dim " + std::to_string(q.dim) +
                         " does not match index dim " + std::to_string(index.dim));
  }

  RankedList out;
  std::unordered_map<std::uint64_t, double> scores;
  for (const auto& e : q.entries) {
    if (e.word_id >= index.dim) {
      throw DimensionError("query: word id " + std::to_string(e.word_id) +
                           " outside index dim " + std::to_string(index.dim));
    }
    const auto& list = index.postings[e.word_id];
    out.touched_postings += list.size();
    for (const Posting& p : list) {
      scores[p.image_id] += e.value * p.value;
    }
  }

  out.entries.assign(scores.begin(), scores.end());
  std::sort(out.entries.begin(), out.entries.end(),
            [](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return a.first < b.first;
            });
  if (out.entries.size() > k) out.entries.resize(k);
  return out;
}

IndexStats index_stats(const InvertedIndex& index) {
  if (index.image_count == 0) throw ArgumentError("index_stats: empty index");

  std::size_t total = 0;
  std::size_t nonempty = 0;
  for (const auto& list : index.postings) {
    total += list.size();
    if (!list.empty()) ++nonempty;
  }
  IndexStats s;
  s.anv = static_cast<double>(total) / index.image_count;
  s.ani = nonempty == 0 ? 0.0 : static_cast<double>(total) / nonempty;
  s.ano = s.anv * s.ani;
  return s;
}

void save_index(const InvertedIndex& index, const std::string& path) {
  detail::BinaryWriter out(path);
  out.magic("E2IX");
  out.u32(1);
  out.u32(index.dim);
  out.u32(index.image_count);
  for (const auto& list : index.postings) {
    out.u32(static_cast<std::uint32_t>(list.size()));
    for (const Posting& p : list) {
      out.u64(p.image_id);
      out.f32(static_cast<float>(p.value));
    }
  }
  out.close();
}

InvertedIndex load_index(const std::string& path) {
  detail::BinaryReader in(path);
  in.expect_magic("E2IX");
  const std::uint32_t version = in.u32();
  if (version != 1) in.fail("unsupported version " + std::to_string(version));

  InvertedIndex index;
  index.dim = in.u32();
  index.image_count = in.u32();
  index.postings.resize(index.dim);
  for (std::uint32_t word = 0; word < index.dim; ++word) {
    const std::uint32_t len = in.u32();
    auto& list = index.postings[word];
    list.reserve(len);
    std::uint64_t prev_id = 0;
    for (std::uint32_t i = 0; i < len; ++i) {
      Posting p;
      p.image_id = in.u64();
      p.value = in.f32();
      if (i > 0 && p.image_id <= prev_id) {
        in.fail("posting list " + std::to_string(word) + " not sorted by image id");
      }
      if (!(p.value > 0.0)) {
        in.fail("non-positive posting value in list " + std::to_string(word));
      }
      prev_id = p.image_id;
      list.push_back(p);
    }
  }
  in.expect_eof();
  return index;
}

}  // namespace e2bows
