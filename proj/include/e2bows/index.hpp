#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "e2bows/bowl.hpp"

namespace e2bows {

struct Posting {
  std::uint64_t image_id = 0;
  double value = 0.0;
};

// Inverted file over sparse word vectors: postings[word_id] lists every
// (image, value) with that word, sorted by image id. Immutable after build.
struct InvertedIndex {
  std::uint32_t dim = 0;
  std::uint32_t image_count = 0;  // includes images with no words at all
  std::vector<std::vector<Posting>> postings;

  std::size_t total_postings() const;
};

struct IndexStats {
  double anv = 0.0;  // average nonzero words per image
  double ani = 0.0;  // average images per nonempty inverted list
  double ano = 0.0;  // anv * ani, the expected postings touched per query
};

InvertedIndex build_index(
    const std::vector<std::pair<std::uint64_t, VisualWordVector>>& vectors,
    std::uint32_t dim);

struct RankedList {
  std::vector<std::pair<std::uint64_t, double>> entries;  // score desc, id asc
  std::uint64_t touched_postings = 0;
};

// Accumulates q_j * v_j over the posting lists of q's nonzero words, walking
// word ids in ascending order so sums match the dense dot product bit for
// bit. Images never touched (score zero) are not returned.
RankedList query_index(const InvertedIndex& index, const VisualWordVector& q,
                       std::size_t k);

IndexStats index_stats(const InvertedIndex& index);

void save_index(const InvertedIndex& index, const std::string& path);
InvertedIndex load_index(const std::string& path);

}  // namespace e2bows
