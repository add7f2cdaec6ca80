#include "e2bows/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "e2bows/errors.hpp"

namespace e2bows {

std::vector<std::pair<std::uint64_t, double>> brute_force_rank(
    const std::vector<std::pair<std::uint64_t, Tensor>>& vectors,
    const Tensor& q) {
  std::vector<std::pair<std::uint64_t, double>> ranked;
  ranked.reserve(vectors.size());
  for (const auto& [image_id, v] : vectors) {
    ranked.emplace_back(image_id, dot(q, v));  // throws on dim mismatch
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

double average_precision(const std::vector<std::uint64_t>& ranking,
                         const std::unordered_set<std::uint64_t>& relevant) {
  if (relevant.empty()) return 0.0;
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (relevant.count(ranking[i])) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

double mean_average_precision(const std::vector<double>& average_precisions) {
  if (average_precisions.empty()) {
    throw ArgumentError("mean_average_precision: no queries");
  }
  double sum = 0.0;
  for (double ap : average_precisions) sum += ap;
  return sum / static_cast<double>(average_precisions.size());
}

double ndcg_at_k(const std::vector<std::uint64_t>& ranking,
                 const std::unordered_map<std::uint64_t, std::uint32_t>& grades,
                 std::size_t k) {
  if (k == 0) throw ArgumentError("ndcg_at_k: k must be positive");

  double dcg = 0.0;
  const std::size_t depth = std::min(k, ranking.size());
  for (std::size_t i = 0; i < depth; ++i) {
    const auto it = grades.find(ranking[i]);
    if (it == grades.end() || it->second == 0) continue;
    dcg += (std::pow(2.0, static_cast<double>(it->second)) - 1.0) /
           std::log2(static_cast<double>(i) + 2.0);
  }

  std::vector<std::uint32_t> ideal;
  ideal.reserve(grades.size());
  for (const auto& [id, g] : grades) {
    (void)id;
    if (g > 0) ideal.push_back(g);
  }
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, ideal.size()); ++i) {
    idcg += (std::pow(2.0, static_cast<double>(ideal[i])) - 1.0) /
            std::log2(static_cast<double>(i) + 2.0);
  }
  return idcg == 0.0 ? 0.0 : dcg / idcg;
}

std::vector<std::uint64_t> pad_ranking(
    const std::vector<std::uint64_t>& ranked,
    const std::vector<std::uint64_t>& universe) {
  std::unordered_set<std::uint64_t> present(ranked.begin(), ranked.end());
  std::vector<std::uint64_t> rest;
  for (std::uint64_t id : universe) {
    if (!present.count(id)) rest.push_back(id);
  }
  std::sort(rest.begin(), rest.end());

  std::vector<std::uint64_t> full = ranked;
  full.insert(full.end(), rest.begin(), rest.end());
  return full;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void write_ranks_file(const std::string& path, const RanksFile& ranks) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "E2RK 1\n";
  out << "stats " << fmt(ranks.stats.anv) << ' ' << fmt(ranks.stats.ani) << ' '
      << fmt(ranks.stats.ano) << '\n';
  for (const RankedQuery& q : ranks.queries) {
    out << "query " << q.query_id << ' ' << q.touched_postings << ' '
        << q.entries.size();
    for (const auto& [id, score] : q.entries) {
      out << ' ' << id << ':' << fmt(score);
    }
    out << '\n';
  }
  out.close();
  if (!out) throw IoError("write failed: " + path);
}

RanksFile read_ranks_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);

  std::string line;
  if (!std::getline(in, line) || line != "E2RK 1") {
    throw FormatError(path + ": missing E2RK header");
  }
  RanksFile ranks;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw FormatError(path + ": missing stats line");
  ++line_no;
  {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag >> ranks.stats.anv >> ranks.stats.ani >> ranks.stats.ano) ||
        tag != "stats") {
      throw FormatError(path + ":2: malformed stats line");
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    RankedQuery q;
    std::size_t count = 0;
    if (!(ls >> tag >> q.query_id >> q.touched_postings >> count) || tag != "query") {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": malformed query line");
    }
    q.entries.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::string token;
      if (!(ls >> token)) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": expected " + std::to_string(count) + " entries");
      }
      const auto colon = token.find(':');
      if (colon == std::string::npos) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": malformed entry '" + token + "'");
      }
      try {
        q.entries.emplace_back(std::stoull(token.substr(0, colon)),
                               std::stod(token.substr(colon + 1)));
      } catch (const std::exception&) {
        throw FormatError(path + ":" + std::to_string(line_no) +
                          ": malformed entry '" + token + "'");
      }
    }
    ranks.queries.push_back(std::move(q));
  }
  return ranks;
}

void write_metrics_report(const std::string& path,
                          const std::vector<QueryMetrics>& rows,
                          std::size_t ndcg_k, const IndexStats& stats) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);

  double ap_sum = 0.0;
  double ndcg_sum = 0.0;
  for (const QueryMetrics& r : rows) {
    out << r.query_id << ' ' << fmt(r.ap) << ' ' << fmt(r.ndcg) << ' '
        << r.touched_postings << '\n';
    ap_sum += r.ap;
    ndcg_sum += r.ndcg;
  }
  const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
  out << "mAP=" << fmt(ap_sum / n) << '\n';
  out << "NDCG@" << ndcg_k << '=' << fmt(ndcg_sum / n) << '\n';
  out << "ANV=" << fmt(stats.anv) << '\n';
  out << "ANI=" << fmt(stats.ani) << '\n';
  out << "ANO=" << fmt(stats.ano) << '\n';
  out.close();
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace e2bows
