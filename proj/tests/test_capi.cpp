#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "e2bows.h"

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "e2bows_capi_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const char* name) const { return (path / name).string(); }
};

struct DatasetHandle {
  e2b_dataset* ptr = nullptr;
  ~DatasetHandle() { e2b_dataset_free(ptr); }
};
struct ModelHandle {
  e2b_model* ptr = nullptr;
  ~ModelHandle() { e2b_model_free(ptr); }
};
struct WordsHandle {
  e2b_words* ptr = nullptr;
  ~WordsHandle() { e2b_words_free(ptr); }
};
struct IndexHandle {
  e2b_index* ptr = nullptr;
  ~IndexHandle() { e2b_index_free(ptr); }
};

}  // namespace

TEST_CASE("dataset handles") {
  TempDir tmp;
  DatasetHandle ds;
  REQUIRE(e2b_dataset_gen_synthetic(3, 4, 12, 0.05, 9, &ds.ptr) == E2B_OK);

  uint64_t count = 0;
  uint32_t classes = 0, h = 0, w = 0, c = 0;
  REQUIRE(e2b_dataset_info(ds.ptr, &count, &classes, &h, &w, &c) == E2B_OK);
  CHECK(count == 12);
  CHECK(classes == 3);
  CHECK(h == 12);
  CHECK(w == 12);
  CHECK(c == 3);

  const std::string path = tmp.file("ds.e2ds");
  REQUIRE(e2b_dataset_save(ds.ptr, path.c_str()) == E2B_OK);

  DatasetHandle reloaded;
  REQUIRE(e2b_dataset_open(path.c_str(), "auto", &reloaded.ptr) == E2B_OK);
  uint64_t count2 = 0;
  REQUIRE(e2b_dataset_info(reloaded.ptr, &count2, &classes, &h, &w, &c) == E2B_OK);
  CHECK(count2 == count);

  SUBCASE("missing files surface as IO errors") {
    DatasetHandle none;
    CHECK(e2b_dataset_open(tmp.file("absent.e2ds").c_str(), "auto", &none.ptr) ==
          E2B_ERR_IO);
    CHECK(std::strlen(e2b_last_error()) > 0);
    CHECK(none.ptr == nullptr);
  }
  SUBCASE("unknown format strings are argument errors") {
    DatasetHandle none;
    CHECK(e2b_dataset_open(path.c_str(), "tar", &none.ptr) == E2B_ERR_ARGUMENT);
  }
  SUBCASE("null out-pointers are argument errors") {
    CHECK(e2b_dataset_gen_synthetic(3, 4, 12, 0.05, 9, nullptr) ==
          E2B_ERR_ARGUMENT);
    CHECK(e2b_dataset_save(nullptr, path.c_str()) == E2B_ERR_ARGUMENT);
  }
  SUBCASE("impossible synthetic configs are argument errors") {
    DatasetHandle none;
    CHECK(e2b_dataset_gen_synthetic(1, 4, 12, 0.05, 9, &none.ptr) ==
          E2B_ERR_ARGUMENT);
  }
}

TEST_CASE("tree handles") {
  TempDir tmp;
  const std::string path = tmp.file("tree.txt");
  {
    std::ofstream out(path);
    out << "0 -1\n1 0\n2 1\n3 2\n4 2\n5 0\n6 5\n7 6\n\n0 3\n1 4\n2 7\n";
  }
  e2b_tree* tree = nullptr;
  REQUIRE(e2b_tree_load(path.c_str(), &tree) == E2B_OK);

  double s = -1.0;
  REQUIRE(e2b_tree_similarity(tree, 0, 1, &s) == E2B_OK);
  CHECK(s == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(e2b_tree_similarity(tree, 0, 0, &s) == E2B_ERR_ARGUMENT);
  CHECK(e2b_tree_similarity(tree, 0, 99, &s) == E2B_ERR_ARGUMENT);
  e2b_tree_free(tree);

  {
    std::ofstream out(path, std::ios::trunc);
    out << "0 -1\n1 0\n";  // no category section
  }
  e2b_tree* bad = nullptr;
  CHECK(e2b_tree_load(path.c_str(), &bad) == E2B_ERR_FORMAT);
}

TEST_CASE("full pipeline through the C interface") {
  TempDir tmp;
  DatasetHandle ds;
  REQUIRE(e2b_dataset_gen_synthetic(3, 6, 12, 0.05, 4, &ds.ptr) == E2B_OK);

  e2b_train_options opts;
  e2b_train_options_init(&opts);
  CHECK(opts.lambda1 == 1.0);
  CHECK(opts.lambda2 == 1.0);
  CHECK(opts.alpha == 0.2);
  CHECK(opts.learning_rate == 0.01);
  CHECK(opts.beta_learning_rate == 0.001);
  opts.epochs = 2;
  opts.batch_size = 6;
  opts.words_per_sfm = 4;
  opts.seed = 4;

  ModelHandle model;
  REQUIRE(e2b_train(ds.ptr, nullptr, &opts, &model.ptr) == E2B_OK);

  uint32_t dim = 0;
  double beta = -1.0;
  REQUIRE(e2b_model_info(model.ptr, &dim, &beta) == E2B_OK);
  CHECK(dim == 3 * 4);
  CHECK(beta >= 0.0);

  const std::string ckpt = tmp.file("model.e2bw");
  REQUIRE(e2b_model_save(model.ptr, ckpt.c_str()) == E2B_OK);
  ModelHandle reloaded;
  REQUIRE(e2b_model_load(ckpt.c_str(), &reloaded.ptr) == E2B_OK);
  uint32_t dim2 = 0;
  double beta2 = -1.0;
  REQUIRE(e2b_model_info(reloaded.ptr, &dim2, &beta2) == E2B_OK);
  CHECK(dim2 == dim);
  CHECK(beta2 == beta);

  WordsHandle words;
  REQUIRE(e2b_extract_words(model.ptr, ds.ptr, -1.0, 0, &words.ptr) == E2B_OK);
  uint64_t record_count = 0;
  uint32_t words_dim = 0;
  REQUIRE(e2b_words_info(words.ptr, &record_count, &words_dim) == E2B_OK);
  CHECK(record_count == 18);

  const std::string words_path = tmp.file("words.txt");
  REQUIRE(e2b_words_save(words.ptr, words_path.c_str()) == E2B_OK);
  WordsHandle loaded_words;
  REQUIRE(e2b_words_load(words_path.c_str(), &loaded_words.ptr) == E2B_OK);
  REQUIRE(e2b_words_set_dim(loaded_words.ptr, dim) == E2B_OK);

  IndexHandle index;
  REQUIRE(e2b_index_build(loaded_words.ptr, dim, &index.ptr) == E2B_OK);
  uint32_t idx_dim = 0, image_count = 0;
  REQUIRE(e2b_index_info(index.ptr, &idx_dim, &image_count) == E2B_OK);
  CHECK(idx_dim == dim);
  CHECK(image_count == 18);

  double anv = 0.0, ani = 0.0, ano = 0.0;
  REQUIRE(e2b_index_stats(index.ptr, &anv, &ani, &ano) == E2B_OK);
  CHECK(ano == doctest::Approx(anv * ani).epsilon(1e-9));

  const std::string index_path = tmp.file("index.e2ix");
  REQUIRE(e2b_index_save(index.ptr, index_path.c_str()) == E2B_OK);
  IndexHandle loaded_index;
  REQUIRE(e2b_index_load(index_path.c_str(), &loaded_index.ptr) == E2B_OK);

  const std::string ranks_path = tmp.file("ranks.e2rk");
  REQUIRE(e2b_query_to_file(loaded_index.ptr, words.ptr, 18, ranks_path.c_str()) ==
          E2B_OK);

  const std::string report_path = tmp.file("report.txt");
  REQUIRE(e2b_eval_ranks(ranks_path.c_str(), ds.ptr, 10, report_path.c_str()) ==
          E2B_OK);
  std::ifstream report(report_path);
  REQUIRE(report.good());
  bool saw_map = false;
  std::string line;
  while (std::getline(report, line)) {
    if (line.rfind("mAP=", 0) == 0) saw_map = true;
  }
  CHECK(saw_map);

  const std::string sfm_dir = (tmp.path / "sfm").string();
  REQUIRE(e2b_export_sfm(model.ptr, ds.ptr, 0, sfm_dir.c_str()) == E2B_OK);
  CHECK(fs::exists(fs::path(sfm_dir) / "sfm_000.pgm"));
  CHECK(fs::exists(fs::path(sfm_dir) / "sfm_002.pgm"));

  SUBCASE("unknown image ids fail cleanly") {
    CHECK(e2b_export_sfm(model.ptr, ds.ptr, 999, sfm_dir.c_str()) ==
          E2B_ERR_ARGUMENT);
  }
}

TEST_CASE("index query through the C interface") {
  // Two images sharing word 3; hand-written words file.
  TempDir tmp;
  const std::string words_path = tmp.file("words.txt");
  {
    std::ofstream out(words_path);
    out << "0 2 0:0.6 3:0.8\n";
    out << "1 2 3:0.5 7:0.5\n";
  }
  WordsHandle words;
  REQUIRE(e2b_words_load(words_path.c_str(), &words.ptr) == E2B_OK);
  uint64_t record_count = 0;
  uint32_t dim = 0;
  REQUIRE(e2b_words_info(words.ptr, &record_count, &dim) == E2B_OK);
  CHECK(record_count == 2);
  CHECK(dim == 8);

  IndexHandle index;
  REQUIRE(e2b_index_build(words.ptr, 8, &index.ptr) == E2B_OK);

  const uint32_t q_ids[2] = {3, 7};
  const double q_vals[2] = {1.0, 1.0};
  uint64_t ids[8];
  double scores[8];
  uint32_t count = 8;
  uint64_t touched = 0;
  REQUIRE(e2b_index_query(index.ptr, q_ids, q_vals, 2, 8, ids, scores, &count,
                          &touched) == E2B_OK);
  REQUIRE(count == 2);
  CHECK(ids[0] == 1);  // 0.5 + 0.5 beats 0.8
  CHECK(scores[0] == 1.0);
  CHECK(ids[1] == 0);
  CHECK(scores[1] == 0.8);
  CHECK(touched == 3);

  SUBCASE("capacity smaller than k truncates the answer") {
    uint32_t small_count = 1;
    REQUIRE(e2b_index_query(index.ptr, q_ids, q_vals, 2, 8, ids, scores,
                            &small_count, nullptr) == E2B_OK);
    CHECK(small_count == 1);
    CHECK(ids[0] == 1);
  }
  SUBCASE("word ids outside the index dim are dimension errors") {
    const uint32_t bad_ids[1] = {8};
    const double bad_vals[1] = {1.0};
    uint32_t n = 8;
    CHECK(e2b_index_query(index.ptr, bad_ids, bad_vals, 1, 8, ids, scores, &n,
                          nullptr) == E2B_ERR_DIMENSION);
  }
  SUBCASE("unsorted query ids are argument errors") {
    const uint32_t bad_ids[2] = {5, 3};
    const double bad_vals[2] = {1.0, 1.0};
    uint32_t n = 8;
    CHECK(e2b_index_query(index.ptr, bad_ids, bad_vals, 2, 8, ids, scores, &n,
                          nullptr) == E2B_ERR_ARGUMENT);
  }
  SUBCASE("a dim too small for the words is a dimension error") {
    IndexHandle bad;
    CHECK(e2b_index_build(words.ptr, 4, &bad.ptr) == E2B_ERR_DIMENSION);
  }
}

TEST_CASE("format errors carry a message") {
  TempDir tmp;
  const std::string path = tmp.file("junk.txt");
  {
    std::ofstream out(path);
    out << "0 junk junk\n";
  }
  WordsHandle words;
  CHECK(e2b_words_load(path.c_str(), &words.ptr) == E2B_ERR_FORMAT);
  const std::string msg = e2b_last_error();
  CHECK(msg.find(path) != std::string::npos);
}
