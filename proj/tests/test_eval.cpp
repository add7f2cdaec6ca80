#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "e2bows/errors.hpp"
#include "e2bows/eval.hpp"

using namespace e2bows;

namespace {

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("brute_force_rank orders by score then id") {
  const std::vector<std::pair<std::uint64_t, Tensor>> db = {
      {10, Tensor::vector({1.0, 0.0, 0.0})},
      {20, Tensor::vector({0.0, 1.0, 0.0})},
      {30, Tensor::vector({0.0, 0.0, 1.0})},
  };

  SUBCASE("matching vector first, zero ties in id order") {
    const auto r = brute_force_rank(db, Tensor::vector({0.0, 1.0, 0.0}));
    REQUIRE(r.size() == 3);
    CHECK(r[0].first == 20);
    CHECK(r[0].second == 1.0);
    CHECK(r[1].first == 10);
    CHECK(r[1].second == 0.0);
    CHECK(r[2].first == 30);
  }
  SUBCASE("an orthogonal query leaves everything tied at zero") {
    std::vector<std::pair<std::uint64_t, Tensor>> shuffled = {db[2], db[0], db[1]};
    // Zero query so every score ties; all three come back in id order.
    const auto r = brute_force_rank(shuffled, Tensor::vector({0.0, 0.0, 0.0}));
    CHECK(r[0].first == 10);
    CHECK(r[1].first == 20);
    CHECK(r[2].first == 30);
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(brute_force_rank(db, Tensor::vector({1.0, 0.0})),
                    DimensionError);
  }
}

TEST_CASE("average precision") {
  SUBCASE("hits at ranks 1 and 3") {
    const double ap = average_precision({7, 4, 9, 2}, {7, 9});
    CHECK(ap == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
    CHECK(ap == doctest::Approx(0.8333).epsilon(1e-4));
  }
  SUBCASE("perfect ranking scores 1") {
    CHECK(average_precision({1, 2, 3}, {1, 2, 3}) == 1.0);
    CHECK(average_precision({1, 2, 9, 8}, {1, 2}) == 1.0);
  }
  SUBCASE("no relevant images scores 0") {
    CHECK(average_precision({1, 2, 3}, {}) == 0.0);
  }
  SUBCASE("relevant images missing from the ranking still count in the denominator") {
    CHECK(average_precision({1}, {1, 99}) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("moving a relevant image up never hurts") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<std::uint64_t> ranking(12);
      for (std::size_t i = 0; i < ranking.size(); ++i) ranking[i] = i;
      std::shuffle(ranking.begin(), ranking.end(), rng);
      std::unordered_set<std::uint64_t> relevant = {0, 1, 2};

      const double before = average_precision(ranking, relevant);
      // Swap a relevant image one position toward the front.
      for (std::size_t i = 1; i < ranking.size(); ++i) {
        if (relevant.count(ranking[i]) && !relevant.count(ranking[i - 1])) {
          std::swap(ranking[i], ranking[i - 1]);
          break;
        }
      }
      CHECK(average_precision(ranking, relevant) >= before);
    }
  }
}

TEST_CASE("mean average precision") {
  CHECK(mean_average_precision({0.5}) == 0.5);
  CHECK(mean_average_precision({1.0, 0.0}) == 0.5);
  CHECK_THROWS_AS(mean_average_precision({}), ArgumentError);
}

TEST_CASE("ndcg") {
  SUBCASE("worked example with grades 1, 0, 2") {
    const std::unordered_map<std::uint64_t, std::uint32_t> grades = {
        {0, 1}, {1, 0}, {2, 2}};
    const double v = ndcg_at_k({0, 1, 2}, grades, 3);
    const double dcg = 1.0 / std::log2(2.0) + 0.0 + 3.0 / std::log2(4.0);
    const double idcg = 3.0 / std::log2(2.0) + 1.0 / std::log2(3.0);
    CHECK(v == doctest::Approx(dcg / idcg).epsilon(1e-12));
    CHECK(v == doctest::Approx(0.6885).epsilon(1e-3));
  }
  SUBCASE("grade-sorted ranking is ideal") {
    const std::unordered_map<std::uint64_t, std::uint32_t> grades = {
        {5, 3}, {6, 2}, {7, 1}, {8, 0}};
    CHECK(ndcg_at_k({5, 6, 7, 8}, grades, 4) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("all-zero grades score 0") {
    CHECK(ndcg_at_k({1, 2, 3}, {{1, 0}, {2, 0}}, 3) == 0.0);
    CHECK(ndcg_at_k({1, 2, 3}, {}, 3) == 0.0);
  }
  SUBCASE("k truncates the scored prefix but not the ideal") {
    const std::unordered_map<std::uint64_t, std::uint32_t> grades = {
        {1, 2}, {2, 2}};
    // Best item outside the top-1 window: DCG sees only grade 0.
    CHECK(ndcg_at_k({9, 1, 2}, grades, 1) == 0.0);
    CHECK(ndcg_at_k({1, 9, 2}, grades, 1) > 0.0);
  }
  SUBCASE("k may exceed the ranking length") {
    CHECK(ndcg_at_k({1}, {{1, 1}}, 100) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("k of zero is rejected") {
    CHECK_THROWS_AS(ndcg_at_k({1}, {{1, 1}}, 0), ArgumentError);
  }
}

TEST_CASE("ap and ndcg stay within [0, 1] on random rankings") {
  std::mt19937_64 rng(67);
  std::uniform_int_distribution<std::uint32_t> grade(0, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::uint64_t> ranking(20);
    for (std::size_t i = 0; i < ranking.size(); ++i) ranking[i] = i;
    std::shuffle(ranking.begin(), ranking.end(), rng);

    std::unordered_set<std::uint64_t> relevant;
    std::unordered_map<std::uint64_t, std::uint32_t> grades;
    for (std::uint64_t id = 0; id < 20; ++id) {
      if (u(rng) < 0.3) relevant.insert(id);
      grades[id] = grade(rng);
    }

    const double ap = average_precision(ranking, relevant);
    CHECK(ap >= 0.0);
    CHECK(ap <= 1.0);
    const double ndcg = ndcg_at_k(ranking, grades, 1 + trial % 20);
    CHECK(ndcg >= 0.0);
    CHECK(ndcg <= 1.0);
  }
}

TEST_CASE("pad_ranking appends missing ids in ascending order") {
  const auto padded = pad_ranking({5, 2}, {1, 2, 3, 5, 9});
  CHECK(padded == std::vector<std::uint64_t>{5, 2, 1, 3, 9});

  CHECK(pad_ranking({}, {3, 1}).size() == 2);
  CHECK(pad_ranking({1, 3}, {1, 3}) == std::vector<std::uint64_t>{1, 3});
}

TEST_CASE("ranks file round-trip") {
  const auto path = temp_file("e2bows_test.e2rk");

  RanksFile ranks;
  ranks.stats = {2.5, 4.0, 10.0};
  RankedQuery q0;
  q0.query_id = 3;
  q0.touched_postings = 17;
  q0.entries = {{10, 0.75}, {12, 0.5}};
  RankedQuery q1;
  q1.query_id = 4;  // a query that matched nothing
  ranks.queries = {q0, q1};
  write_ranks_file(path.string(), ranks);

  SUBCASE("values survive") {
    const RanksFile loaded = read_ranks_file(path.string());
    CHECK(loaded.stats.anv == 2.5);
    CHECK(loaded.stats.ani == 4.0);
    CHECK(loaded.stats.ano == 10.0);
    REQUIRE(loaded.queries.size() == 2);
    CHECK(loaded.queries[0].query_id == 3);
    CHECK(loaded.queries[0].touched_postings == 17);
    REQUIRE(loaded.queries[0].entries.size() == 2);
    CHECK(loaded.queries[0].entries[0].first == 10);
    CHECK(loaded.queries[0].entries[0].second == 0.75);
    CHECK(loaded.queries[0].entries[1].second == 0.5);
    CHECK(loaded.queries[1].entries.empty());
  }

  SUBCASE("malformed files are rejected") {
    const auto write_text = [&](const char* text) {
      std::ofstream out(path, std::ios::trunc);
      out << text;
    };
    write_text("E2XX 1\nstats 1 1 1\n");
    CHECK_THROWS_AS(read_ranks_file(path.string()), FormatError);
    write_text("E2RK 1\nstats 1 1\n");
    CHECK_THROWS_AS(read_ranks_file(path.string()), FormatError);
    write_text("E2RK 1\nstats 1 1 1\nquery 3 0 2 10:0.5\n");
    CHECK_THROWS_AS(read_ranks_file(path.string()), FormatError);
    write_text("E2RK 1\nstats 1 1 1\nbogus 3\n");
    CHECK_THROWS_AS(read_ranks_file(path.string()), FormatError);
  }

  std::filesystem::remove(path);
}

TEST_CASE("metrics report layout") {
  const auto path = temp_file("e2bows_test_report.txt");
  const std::vector<QueryMetrics> rows = {{1, 1.0, 1.0, 8},
                                          {2, 0.5, 0.25, 4}};
  write_metrics_report(path.string(), rows, 10, {3.0, 2.0, 6.0});

  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);

  REQUIRE(lines.size() >= 7);
  // Two per-query rows: "id AP NDCG touched".
  {
    std::istringstream ls(lines[0]);
    std::uint64_t id = 0, touched = 0;
    double ap = 0.0, ndcg = 0.0;
    REQUIRE((ls >> id >> ap >> ndcg >> touched));
    CHECK(id == 1);
    CHECK(ap == 1.0);
    CHECK(touched == 8);
  }
  bool saw_map = false, saw_ndcg = false, saw_anv = false, saw_ano = false;
  for (const std::string& l : lines) {
    if (l.rfind("mAP=", 0) == 0) {
      saw_map = true;
      CHECK(std::stod(l.substr(4)) == doctest::Approx(0.75).epsilon(1e-9));
    }
    if (l.rfind("NDCG@10=", 0) == 0) saw_ndcg = true;
    if (l.rfind("ANV=", 0) == 0) saw_anv = true;
    if (l.rfind("ANO=", 0) == 0) saw_ano = true;
  }
  CHECK(saw_map);
  CHECK(saw_ndcg);
  CHECK(saw_anv);
  CHECK(saw_ano);

  std::filesystem::remove(path);
}
