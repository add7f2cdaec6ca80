#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "e2bows/index.hpp"
#include "e2bows/tensor.hpp"

namespace e2bows {

// Dense-dot ranking over the whole database: every image appears, sorted by
// descending score with ties broken by ascending image id. The oracle for
// query_index.
std::vector<std::pair<std::uint64_t, double>> brute_force_rank(
    const std::vector<std::pair<std::uint64_t, Tensor>>& vectors,
    const Tensor& q);

// AP over a full-database ranking; images absent from `ranking` contribute
// nothing. Empty relevant set scores 0.
double average_precision(const std::vector<std::uint64_t>& ranking,
                         const std::unordered_set<std::uint64_t>& relevant);

double mean_average_precision(const std::vector<double>& average_precisions);

// Graded NDCG with gain 2^grade - 1 and discount log2(rank + 1). Images
// missing from `grades` count as grade 0; the ideal ordering uses all grades.
// Returns 0 when the ideal DCG is 0.
double ndcg_at_k(const std::vector<std::uint64_t>& ranking,
                 const std::unordered_map<std::uint64_t, std::uint32_t>& grades,
                 std::size_t k);

// Appends every universe id missing from `ranked` in ascending id order,
// which is exactly where a zero-score tie-broken ranking puts them.
std::vector<std::uint64_t> pad_ranking(const std::vector<std::uint64_t>& ranked,
                                       const std::vector<std::uint64_t>& universe);

// Ranks file (text): the query command's output, consumed by eval.
//   E2RK 1
//   stats ANV ANI ANO
//   query <id> <touched> <count> <image:score> ...
struct RankedQuery {
  std::uint64_t query_id = 0;
  std::uint64_t touched_postings = 0;
  std::vector<std::pair<std::uint64_t, double>> entries;
};
struct RanksFile {
  IndexStats stats;
  std::vector<RankedQuery> queries;
};
void write_ranks_file(const std::string& path, const RanksFile& ranks);
RanksFile read_ranks_file(const std::string& path);

// Metrics report (text): one line per query "query_id AP NDCG@k touched",
// then one summary line each for mAP, NDCG@k, ANV, ANI, ANO.
struct QueryMetrics {
  std::uint64_t query_id = 0;
  double ap = 0.0;
  double ndcg = 0.0;
  std::uint64_t touched_postings = 0;
};
void write_metrics_report(const std::string& path,
                          const std::vector<QueryMetrics>& rows,
                          std::size_t ndcg_k, const IndexStats& stats);

}  // namespace e2bows
