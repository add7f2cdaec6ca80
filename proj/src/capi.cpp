#include "e2bows.h"

#include <algorithm>
#include <cstring>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "e2bows/dataset.hpp"
#include "e2bows/errors.hpp"
#include "e2bows/eval.hpp"
#include "e2bows/index.hpp"
#include "e2bows/losses.hpp"
#include "e2bows/trainer.hpp"

struct e2b_dataset {
  e2bows::Dataset ds;
};
struct e2b_tree {
  e2bows::CategoryTree tree;
};
struct e2b_model {
  e2bows::ModelParams params;
  e2bows::TrainConfig cfg;
};
struct e2b_words {
  e2bows::WordsFile words;
};
struct e2b_index {
  e2bows::InvertedIndex index;
};

namespace {

thread_local std::string g_last_error = "no error";

template <typename Fn>
e2b_status wrap(Fn&& fn) noexcept {
  try {
    fn();
    return E2B_OK;
  } catch (const e2bows::ArgumentError& e) {
    g_last_error = e.what();
    return E2B_ERR_ARGUMENT;
  } catch (const e2bows::DimensionError& e) {
    g_last_error = e.what();
    return E2B_ERR_DIMENSION;
  } catch (const e2bows::FormatError& e) {
    g_last_error = e.what();
    return E2B_ERR_FORMAT;
  } catch (const e2bows::NumericError& e) {
    g_last_error = e.what();
    return E2B_ERR_NUMERIC;
  } catch (const e2bows::IoError& e) {
    g_last_error = e.what();
    return E2B_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return E2B_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return E2B_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw e2bows::ArgumentError(what);
}

e2bows::TrainConfig to_config(const e2b_train_options& opts) {
  e2bows::TrainConfig cfg;
  cfg.lambda1 = opts.lambda1;
  cfg.lambda2 = opts.lambda2;
  cfg.alpha = opts.alpha;
  cfg.rho_hat = opts.rho_hat;
  cfg.learning_rate = opts.learning_rate;
  cfg.beta_learning_rate = opts.beta_learning_rate;
  cfg.batch_size = opts.batch_size;
  cfg.epochs = opts.epochs;
  cfg.rng_seed = opts.seed;
  cfg.words_per_sfm = opts.words_per_sfm;
  cfg.freeze_backbone = opts.freeze_backbone != 0;
  return cfg;
}

}  // namespace

extern "C" {

const char* e2b_last_error(void) { return g_last_error.c_str(); }

/* ---- datasets ---- */

e2b_status e2b_dataset_gen_synthetic(uint32_t class_count, uint32_t per_class,
                                     uint32_t image_size, double noise_sigma,
                                     uint64_t seed, e2b_dataset** out) {
  return wrap([&] {
    require(out != nullptr, "out must not be NULL");
    e2bows::SyntheticConfig cfg;
    cfg.class_count = class_count;
    cfg.images_per_class = per_class;
    cfg.image_size = image_size;
    cfg.noise_sigma = noise_sigma;
    cfg.rng_seed = seed;
    *out = new e2b_dataset{e2bows::gen_synthetic(cfg)};
  });
}

e2b_status e2b_dataset_open(const char* path, const char* format,
                            e2b_dataset** out) {
  return wrap([&] {
    require(path != nullptr && out != nullptr, "path and out must not be NULL");
    const std::string fmt = format == nullptr ? "auto" : format;
    e2bows::DatasetFormat f;
    if (fmt == "auto") {
      f = e2bows::DatasetFormat::kAuto;
    } else if (fmt == "e2ds") {
      f = e2bows::DatasetFormat::kNative;
    } else if (fmt == "cifar10") {
      f = e2bows::DatasetFormat::kCifar10;
    } else if (fmt == "cifar100") {
      f = e2bows::DatasetFormat::kCifar100;
    } else {
      throw e2bows::ArgumentError("unknown dataset format '" + fmt + "'");
    }
    *out = new e2b_dataset{e2bows::open_dataset(path, f)};
  });
}

e2b_status e2b_dataset_save(const e2b_dataset* ds, const char* path) {
  return wrap([&] {
    require(ds != nullptr && path != nullptr, "ds and path must not be NULL");
    e2bows::write_dataset(ds->ds, path);
  });
}

e2b_status e2b_dataset_info(const e2b_dataset* ds, uint64_t* image_count,
                            uint32_t* class_count, uint32_t* height,
                            uint32_t* width, uint32_t* channels) {
  return wrap([&] {
    require(ds != nullptr, "ds must not be NULL");
    if (image_count) *image_count = ds->ds.images.size();
    if (class_count) *class_count = ds->ds.class_count;
    if (height) *height = static_cast<uint32_t>(ds->ds.height);
    if (width) *width = static_cast<uint32_t>(ds->ds.width);
    if (channels) *channels = static_cast<uint32_t>(ds->ds.channels);
  });
}

void e2b_dataset_free(e2b_dataset* ds) { delete ds; }

/* ---- category trees ---- */

e2b_status e2b_tree_load(const char* path, e2b_tree** out) {
  return wrap([&] {
    require(path != nullptr && out != nullptr, "path and out must not be NULL");
    *out = new e2b_tree{e2bows::CategoryTree::load(path)};
  });
}

e2b_status e2b_tree_similarity(const e2b_tree* tree, uint32_t c1, uint32_t c2,
                               double* out) {
  return wrap([&] {
    require(tree != nullptr && out != nullptr, "tree and out must not be NULL");
    *out = tree->tree.similarity(c1, c2);
  });
}

void e2b_tree_free(e2b_tree* tree) { delete tree; }

/* ---- training ---- */

void e2b_train_options_init(e2b_train_options* opts) {
  if (opts == nullptr) return;
  const e2bows::TrainConfig defaults;
  opts->lambda1 = defaults.lambda1;
  opts->lambda2 = defaults.lambda2;
  opts->alpha = defaults.alpha;
  opts->rho_hat = defaults.rho_hat;
  opts->learning_rate = defaults.learning_rate;
  opts->beta_learning_rate = defaults.beta_learning_rate;
  opts->batch_size = defaults.batch_size;
  opts->epochs = defaults.epochs;
  opts->seed = defaults.rng_seed;
  opts->words_per_sfm = defaults.words_per_sfm;
  opts->freeze_backbone = defaults.freeze_backbone ? 1 : 0;
}

e2b_status e2b_train(const e2b_dataset* ds, const e2b_tree* tree,
                     const e2b_train_options* opts, e2b_model** out) {
  return wrap([&] {
    require(ds != nullptr && opts != nullptr && out != nullptr,
            "ds, opts and out must not be NULL");
    const e2bows::TrainConfig cfg = to_config(*opts);
    e2bows::TrainResult result =
        e2bows::train(ds->ds, cfg, tree == nullptr ? nullptr : &tree->tree);
    *out = new e2b_model{std::move(result.params), cfg};
  });
}

e2b_status e2b_model_save(const e2b_model* model, const char* path) {
  return wrap([&] {
    require(model != nullptr && path != nullptr, "model and path must not be NULL");
    e2bows::save_checkpoint(model->params, model->cfg, path);
  });
}

e2b_status e2b_model_load(const char* path, e2b_model** out) {
  return wrap([&] {
    require(path != nullptr && out != nullptr, "path and out must not be NULL");
    auto [params, cfg] = e2bows::load_checkpoint(path);
    *out = new e2b_model{std::move(params), cfg};
  });
}

e2b_status e2b_model_info(const e2b_model* model, uint32_t* word_dim,
                          double* beta) {
  return wrap([&] {
    require(model != nullptr, "model must not be NULL");
    if (word_dim) *word_dim = static_cast<uint32_t>(model->params.dim());
    if (beta) *beta = model->params.bowl.beta;
  });
}

void e2b_model_free(e2b_model* model) { delete model; }

/* ---- visual words ---- */

e2b_status e2b_extract_words(const e2b_model* model, const e2b_dataset* ds,
                             double beta_override, int binarize,
                             e2b_words** out) {
  return wrap([&] {
    require(model != nullptr && ds != nullptr && out != nullptr,
            "model, ds and out must not be NULL");
    const double beta =
        beta_override < 0.0 ? model->params.bowl.beta : beta_override;
    e2bows::WordsFile words;
    words.records.reserve(ds->ds.images.size());
    for (const e2bows::DatasetImage& img : ds->ds.images) {
      const e2bows::Tensor raw =
          e2bows::image_raw_words(model->params, img.pixels);
      e2bows::VisualWordVector vec = e2bows::words_postprocess(raw, beta);
      if (binarize) vec = e2bows::binarize(vec);
      for (const auto& e : vec.entries) {
        words.max_word_id_plus_one =
            std::max(words.max_word_id_plus_one, e.word_id + 1);
      }
      words.records.emplace_back(img.id, std::move(vec));
    }
    *out = new e2b_words{std::move(words)};
  });
}

e2b_status e2b_words_save(const e2b_words* words, const char* path) {
  return wrap([&] {
    require(words != nullptr && path != nullptr, "words and path must not be NULL");
    e2bows::write_words_file(path, words->words.records);
  });
}

e2b_status e2b_words_load(const char* path, e2b_words** out) {
  return wrap([&] {
    require(path != nullptr && out != nullptr, "path and out must not be NULL");
    *out = new e2b_words{e2bows::read_words_file(path)};
  });
}

e2b_status e2b_words_set_dim(e2b_words* words, uint32_t dim) {
  return wrap([&] {
    require(words != nullptr, "words must not be NULL");
    e2bows::set_words_dim(words->words, dim);
  });
}

e2b_status e2b_words_info(const e2b_words* words, uint64_t* record_count,
                          uint32_t* dim) {
  return wrap([&] {
    require(words != nullptr, "words must not be NULL");
    if (record_count) *record_count = words->words.records.size();
    if (dim) {
      *dim = words->words.records.empty()
                 ? words->words.max_word_id_plus_one
                 : words->words.records.front().second.dim;
    }
  });
}

void e2b_words_free(e2b_words* words) { delete words; }

/* ---- inverted index ---- */

e2b_status e2b_index_build(const e2b_words* words, uint32_t dim,
                           e2b_index** out) {
  return wrap([&] {
    require(words != nullptr && out != nullptr, "words and out must not be NULL");
    if (dim < words->words.max_word_id_plus_one) {
      throw e2bows::DimensionError(
          "index dim " + std::to_string(dim) + " is smaller than a stored word "
          "id requires (" + std::to_string(words->words.max_word_id_plus_one) + ")");
    }
    *out = new e2b_index{e2bows::build_index(words->words.records, dim)};
  });
}

e2b_status e2b_index_save(const e2b_index* index, const char* path) {
  return wrap([&] {
    require(index != nullptr && path != nullptr, "index and path must not be NULL");
    e2bows::save_index(index->index, path);
  });
}

e2b_status e2b_index_load(const char* path, e2b_index** out) {
  return wrap([&] {
    require(path != nullptr && out != nullptr, "path and out must not be NULL");
    *out = new e2b_index{e2bows::load_index(path)};
  });
}

e2b_status e2b_index_info(const e2b_index* index, uint32_t* dim,
                          uint32_t* image_count) {
  return wrap([&] {
    require(index != nullptr, "index must not be NULL");
    if (dim) *dim = index->index.dim;
    if (image_count) *image_count = index->index.image_count;
  });
}

e2b_status e2b_index_stats(const e2b_index* index, double* anv, double* ani,
                           double* ano) {
  return wrap([&] {
    require(index != nullptr, "index must not be NULL");
    const e2bows::IndexStats s = e2bows::index_stats(index->index);
    if (anv) *anv = s.anv;
    if (ani) *ani = s.ani;
    if (ano) *ano = s.ano;
  });
}

e2b_status e2b_index_query(const e2b_index* index, const uint32_t* word_ids,
                           const double* values, uint32_t entry_count,
                           uint32_t k, uint64_t* result_ids,
                           double* result_scores, uint32_t* result_count,
                           uint64_t* touched) {
  return wrap([&] {
    require(index != nullptr && result_ids != nullptr &&
                result_scores != nullptr && result_count != nullptr,
            "index and result buffers must not be NULL");
    require(entry_count == 0 || (word_ids != nullptr && values != nullptr),
            "entry arrays must not be NULL");
    e2bows::VisualWordVector q;
    q.dim = index->index.dim;
    q.entries.reserve(entry_count);
    for (uint32_t i = 0; i < entry_count; ++i) {
      if (i > 0 && word_ids[i] <= word_ids[i - 1]) {
        throw e2bows::ArgumentError("word ids must be strictly increasing");
      }
      if (!(values[i] > 0.0)) {
        throw e2bows::ArgumentError("query values must be strictly positive");
      }
      q.entries.push_back({word_ids[i], values[i]});
    }
    const e2bows::RankedList ranked = e2bows::query_index(index->index, q, k);
    const uint32_t capacity = *result_count;
    const uint32_t n =
        std::min<uint32_t>(capacity, static_cast<uint32_t>(ranked.entries.size()));
    for (uint32_t i = 0; i < n; ++i) {
      result_ids[i] = ranked.entries[i].first;
      result_scores[i] = ranked.entries[i].second;
    }
    *result_count = n;
    if (touched) *touched = ranked.touched_postings;
  });
}

void e2b_index_free(e2b_index* index) { delete index; }

/* ---- file-level pipeline steps ---- */

e2b_status e2b_query_to_file(const e2b_index* index, const e2b_words* queries,
                             uint32_t k, const char* ranks_path) {
  return wrap([&] {
    require(index != nullptr && queries != nullptr && ranks_path != nullptr,
            "index, queries and ranks_path must not be NULL");
    e2bows::RanksFile ranks;
    if (index->index.image_count > 0) {
      ranks.stats = e2bows::index_stats(index->index);
    }
    for (const auto& [query_id, vec] : queries->words.records) {
      e2bows::VisualWordVector q = vec;
      if (q.dim > index->index.dim) {
        throw e2bows::DimensionError(
            "query " + std::to_string(query_id) + " has dim " +
            std::to_string(q.dim) + ", index has " +
            std::to_string(index->index.dim));
      }
      q.dim = index->index.dim;
      const e2bows::RankedList ranked = e2bows::query_index(index->index, q, k);
      e2bows::RankedQuery rq;
      rq.query_id = query_id;
      rq.touched_postings = ranked.touched_postings;
      rq.entries = ranked.entries;
      ranks.queries.push_back(std::move(rq));
    }
    e2bows::write_ranks_file(ranks_path, ranks);
  });
}

e2b_status e2b_eval_ranks(const char* ranks_path, const e2b_dataset* labels,
                          uint32_t ndcg_k, const char* report_path) {
  return wrap([&] {
    require(ranks_path != nullptr && labels != nullptr && report_path != nullptr,
            "ranks_path, labels and report_path must not be NULL");
    const e2bows::RanksFile ranks = e2bows::read_ranks_file(ranks_path);

    std::unordered_map<uint64_t, const std::vector<uint32_t>*> label_of;
    std::vector<uint64_t> all_ids;
    all_ids.reserve(labels->ds.images.size());
    for (const e2bows::DatasetImage& img : labels->ds.images) {
      label_of[img.id] = &img.labels;
      all_ids.push_back(img.id);
    }
    std::sort(all_ids.begin(), all_ids.end());

    std::vector<e2bows::QueryMetrics> rows;
    rows.reserve(ranks.queries.size());
    for (const e2bows::RankedQuery& rq : ranks.queries) {
      const auto it = label_of.find(rq.query_id);
      if (it == label_of.end()) {
        throw e2bows::ArgumentError("query id " + std::to_string(rq.query_id) +
                                    " is not in the labels dataset");
      }
      const std::unordered_set<uint32_t> query_labels(it->second->begin(),
                                                      it->second->end());

      // Database universe: every labeled image except the query itself.
      std::vector<uint64_t> universe;
      universe.reserve(all_ids.size());
      std::unordered_set<uint64_t> relevant;
      std::unordered_map<uint64_t, uint32_t> grades;
      for (uint64_t id : all_ids) {
        if (id == rq.query_id) continue;
        universe.push_back(id);
        uint32_t shared = 0;
        for (uint32_t label : *label_of.at(id)) {
          if (query_labels.count(label)) ++shared;
        }
        if (shared > 0) {
          relevant.insert(id);
          grades.emplace(id, shared);
        }
      }

      std::vector<uint64_t> ranked_ids;
      ranked_ids.reserve(rq.entries.size());
      for (const auto& [id, score] : rq.entries) {
        (void)score;
        if (id == rq.query_id) continue;
        if (!label_of.count(id)) {
          throw e2bows::ArgumentError("ranked image id " + std::to_string(id) +
                                      " is not in the labels dataset");
        }
        ranked_ids.push_back(id);
      }
      const std::vector<uint64_t> full = e2bows::pad_ranking(ranked_ids, universe);

      e2bows::QueryMetrics row;
      row.query_id = rq.query_id;
      row.touched_postings = rq.touched_postings;
      row.ap = e2bows::average_precision(full, relevant);
      row.ndcg = e2bows::ndcg_at_k(full, grades, ndcg_k);
      rows.push_back(row);
    }
    e2bows::write_metrics_report(report_path, rows, ndcg_k, ranks.stats);
  });
}

e2b_status e2b_export_sfm(const e2b_model* model, const e2b_dataset* ds,
                          uint64_t image_id, const char* out_dir) {
  return wrap([&] {
    require(model != nullptr && ds != nullptr && out_dir != nullptr,
            "model, ds and out_dir must not be NULL");
    const e2bows::DatasetImage& img = ds->ds.by_id(image_id);
    const auto [features, cache] =
        e2bows::backbone_forward(img.pixels, model->params.backbone);
    (void)cache;
    const e2bows::SfmStack stack =
        e2bows::compute_sfms(features, e2bows::fc_to_conv(model->params.classifier));
    e2bows::write_sfm_pgms(stack, out_dir);
  });
}

}  // extern "C"
