// Command-line front end. Everything goes through the C API of the shared
// library; no C++ internals are linked here.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "e2bows.h"

namespace {

template <auto FreeFn>
struct FnDeleter {
  template <typename T>
  void operator()(T* p) const {
    FreeFn(p);
  }
};
template <typename T, auto FreeFn>
using Handle = std::unique_ptr<T, FnDeleter<FreeFn>>;

using DatasetHandle = Handle<e2b_dataset, e2b_dataset_free>;
using TreeHandle = Handle<e2b_tree, e2b_tree_free>;
using ModelHandle = Handle<e2b_model, e2b_model_free>;
using WordsHandle = Handle<e2b_words, e2b_words_free>;
using IndexHandle = Handle<e2b_index, e2b_index_free>;

int fail() {
  std::fprintf(stderr, "e2bows: %s\n", e2b_last_error());
  return 1;
}

bool ok(e2b_status status) { return status == E2B_OK; }

DatasetHandle open_dataset_or_null(const std::string& path,
                                   const std::string& format) {
  e2b_dataset* ds = nullptr;
  if (!ok(e2b_dataset_open(path.c_str(), format.c_str(), &ds))) return nullptr;
  return DatasetHandle(ds);
}

struct GenDataArgs {
  std::string out;
  std::uint32_t classes = 10;
  std::uint32_t per_class = 60;
  std::uint32_t size = 16;
  double sigma = 0.1;
  std::uint64_t seed = 0;
};

int run_gen_data(const GenDataArgs& a) {
  e2b_dataset* raw = nullptr;
  if (!ok(e2b_dataset_gen_synthetic(a.classes, a.per_class, a.size, a.sigma,
                                    a.seed, &raw))) {
    return fail();
  }
  DatasetHandle ds(raw);
  if (!ok(e2b_dataset_save(ds.get(), a.out.c_str()))) return fail();
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string data_format = "auto";
  std::string tree;
  std::string out;
  e2b_train_options opts;
};

int run_train(const TrainArgs& a) {
  DatasetHandle ds = open_dataset_or_null(a.data, a.data_format);
  if (!ds) return fail();

  TreeHandle tree;
  if (!a.tree.empty()) {
    e2b_tree* raw = nullptr;
    if (!ok(e2b_tree_load(a.tree.c_str(), &raw))) return fail();
    tree.reset(raw);
  }

  e2b_model* raw_model = nullptr;
  if (!ok(e2b_train(ds.get(), tree.get(), &a.opts, &raw_model))) return fail();
  ModelHandle model(raw_model);
  if (!ok(e2b_model_save(model.get(), a.out.c_str()))) return fail();
  return 0;
}

struct ExtractArgs {
  std::string ckpt;
  std::string data;
  std::string data_format = "auto";
  std::string out;
  bool binarize = false;
  double beta_override = -1.0;
};

int run_extract(const ExtractArgs& a) {
  e2b_model* raw_model = nullptr;
  if (!ok(e2b_model_load(a.ckpt.c_str(), &raw_model))) return fail();
  ModelHandle model(raw_model);

  DatasetHandle ds = open_dataset_or_null(a.data, a.data_format);
  if (!ds) return fail();

  e2b_words* raw_words = nullptr;
  if (!ok(e2b_extract_words(model.get(), ds.get(), a.beta_override,
                            a.binarize ? 1 : 0, &raw_words))) {
    return fail();
  }
  WordsHandle words(raw_words);
  if (!ok(e2b_words_save(words.get(), a.out.c_str()))) return fail();
  return 0;
}

struct BuildIndexArgs {
  std::string words;
  std::uint32_t dim = 0;
  std::string out;
};

int run_build_index(const BuildIndexArgs& a) {
  e2b_words* raw_words = nullptr;
  if (!ok(e2b_words_load(a.words.c_str(), &raw_words))) return fail();
  WordsHandle words(raw_words);

  e2b_index* raw_index = nullptr;
  if (!ok(e2b_index_build(words.get(), a.dim, &raw_index))) return fail();
  IndexHandle index(raw_index);
  if (!ok(e2b_index_save(index.get(), a.out.c_str()))) return fail();
  return 0;
}

struct QueryArgs {
  std::string index;
  std::string words;
  std::uint32_t k = 10;
  std::string out;
};

int run_query(const QueryArgs& a) {
  e2b_index* raw_index = nullptr;
  if (!ok(e2b_index_load(a.index.c_str(), &raw_index))) return fail();
  IndexHandle index(raw_index);

  e2b_words* raw_words = nullptr;
  if (!ok(e2b_words_load(a.words.c_str(), &raw_words))) return fail();
  WordsHandle words(raw_words);

  if (!ok(e2b_query_to_file(index.get(), words.get(), a.k, a.out.c_str()))) {
    return fail();
  }
  return 0;
}

struct EvalArgs {
  std::string ranks;
  std::string labels;
  std::string labels_format = "auto";
  std::uint32_t ndcg_k = 100;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  DatasetHandle labels = open_dataset_or_null(a.labels, a.labels_format);
  if (!labels) return fail();
  if (!ok(e2b_eval_ranks(a.ranks.c_str(), labels.get(), a.ndcg_k,
                         a.out.c_str()))) {
    return fail();
  }
  return 0;
}

int run_stats(const std::string& index_path) {
  e2b_index* raw_index = nullptr;
  if (!ok(e2b_index_load(index_path.c_str(), &raw_index))) return fail();
  IndexHandle index(raw_index);

  uint32_t dim = 0;
  uint32_t images = 0;
  double anv = 0.0;
  double ani = 0.0;
  double ano = 0.0;
  if (!ok(e2b_index_info(index.get(), &dim, &images))) return fail();
  if (!ok(e2b_index_stats(index.get(), &anv, &ani, &ano))) return fail();
  std::printf("images=%u dim=%u\n", images, dim);
  std::printf("ANV=%.9g\n", anv);
  std::printf("ANI=%.9g\n", ani);
  std::printf("ANO=%.9g\n", ano);
  return 0;
}

struct ExportSfmArgs {
  std::string ckpt;
  std::string data;
  std::string data_format = "auto";
  std::uint64_t image_id = 0;
  std::string out;
};

int run_export_sfm(const ExportSfmArgs& a) {
  e2b_model* raw_model = nullptr;
  if (!ok(e2b_model_load(a.ckpt.c_str(), &raw_model))) return fail();
  ModelHandle model(raw_model);

  DatasetHandle ds = open_dataset_or_null(a.data, a.data_format);
  if (!ds) return fail();

  if (!ok(e2b_export_sfm(model.get(), ds.get(), a.image_id, a.out.c_str()))) {
    return fail();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"e2bows: bag-of-visual-words retrieval pipeline"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic blob dataset");
  gen_cmd->add_option("--out", gen.out, "Output dataset file")->required();
  gen_cmd->add_option("--classes", gen.classes, "Number of classes");
  gen_cmd->add_option("--per-class", gen.per_class, "Images per class");
  gen_cmd->add_option("--size", gen.size, "Square image size in pixels");
  gen_cmd->add_option("--sigma", gen.sigma, "Pixel noise standard deviation");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");

  TrainArgs tr;
  e2b_train_options_init(&tr.opts);
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  train_cmd->add_option("--data", tr.data, "Training dataset")->required();
  train_cmd->add_option("--data-format", tr.data_format,
                        "auto|e2ds|cifar10|cifar100");
  train_cmd->add_option("--tree", tr.tree, "Category tree file");
  train_cmd->add_option("--out", tr.out, "Checkpoint output path")->required();
  train_cmd->add_option("--m", tr.opts.words_per_sfm, "Words per SFM");
  train_cmd->add_option("--rho-hat", tr.opts.rho_hat, "Target nonzero ratio");
  train_cmd->add_option("--alpha", tr.opts.alpha, "Base triplet margin");
  train_cmd->add_option("--lambda1", tr.opts.lambda1, "Triplet loss weight");
  train_cmd->add_option("--lambda2", tr.opts.lambda2, "Sparsity loss weight");
  train_cmd->add_option("--lr", tr.opts.learning_rate, "Learning rate");
  train_cmd->add_option("--beta-lr", tr.opts.beta_learning_rate,
                        "Threshold learning rate");
  train_cmd->add_option("--epochs", tr.opts.epochs, "Training epochs");
  train_cmd->add_option("--batch", tr.opts.batch_size, "Batch size");
  train_cmd->add_option("--seed", tr.opts.seed, "RNG seed");
  bool freeze = false;
  train_cmd->add_flag("--freeze-backbone", freeze, "Do not update conv layers");

  ExtractArgs ex;
  auto* extract_cmd =
      app.add_subcommand("extract", "Extract sparse visual words for a dataset");
  extract_cmd->add_option("--ckpt", ex.ckpt, "Model checkpoint")->required();
  extract_cmd->add_option("--data", ex.data, "Dataset to encode")->required();
  extract_cmd->add_option("--data-format", ex.data_format,
                          "auto|e2ds|cifar10|cifar100");
  extract_cmd->add_option("--out", ex.out, "Words file output path")->required();
  extract_cmd->add_flag("--binarize", ex.binarize, "Write indicator values");
  extract_cmd->add_option("--beta-override", ex.beta_override,
                          "Threshold to use instead of the learned one");

  BuildIndexArgs bi;
  auto* build_cmd = app.add_subcommand("build-index", "Build an inverted index");
  build_cmd->add_option("--words", bi.words, "Words file")->required();
  build_cmd->add_option("--dim", bi.dim, "Word vector dimensionality")->required();
  build_cmd->add_option("--out", bi.out, "Index output path")->required();

  QueryArgs qu;
  auto* query_cmd = app.add_subcommand("query", "Rank indexed images per query");
  query_cmd->add_option("--index", qu.index, "Index file")->required();
  query_cmd->add_option("--words", qu.words, "Query words file")->required();
  query_cmd->add_option("--k", qu.k, "Results per query")->required();
  query_cmd->add_option("--out", qu.out, "Ranks file output path")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Score a ranks file");
  eval_cmd->add_option("--ranks", ev.ranks, "Ranks file from query")->required();
  eval_cmd->add_option("--labels", ev.labels, "Dataset holding the labels")
      ->required();
  eval_cmd->add_option("--labels-format", ev.labels_format,
                       "auto|e2ds|cifar10|cifar100");
  eval_cmd->add_option("--ndcg-k", ev.ndcg_k, "NDCG cutoff");
  eval_cmd->add_option("--out", ev.out, "Report output path")->required();

  std::string stats_index;
  auto* stats_cmd = app.add_subcommand("stats", "Print index statistics");
  stats_cmd->add_option("--index", stats_index, "Index file")->required();

  ExportSfmArgs es;
  auto* export_cmd =
      app.add_subcommand("export-sfm", "Write one PGM per semantic feature map");
  export_cmd->add_option("--ckpt", es.ckpt, "Model checkpoint")->required();
  export_cmd->add_option("--data", es.data, "Dataset holding the image")->required();
  export_cmd->add_option("--data-format", es.data_format,
                         "auto|e2ds|cifar10|cifar100");
  export_cmd->add_option("--image", es.image_id, "Image id")->required();
  export_cmd->add_option("--out", es.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  tr.opts.freeze_backbone = freeze ? 1 : 0;

  if (gen_cmd->parsed()) return run_gen_data(gen);
  if (train_cmd->parsed()) return run_train(tr);
  if (extract_cmd->parsed()) return run_extract(ex);
  if (build_cmd->parsed()) return run_build_index(bi);
  if (query_cmd->parsed()) return run_query(qu);
  if (eval_cmd->parsed()) return run_eval(ev);
  if (stats_cmd->parsed()) return run_stats(stats_index);
  if (export_cmd->parsed()) return run_export_sfm(es);
  return 2;
}
