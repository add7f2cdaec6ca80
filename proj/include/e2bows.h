/* C interface to the e2bows library: opaque handles plus status codes.
 * Every function returning e2b_status leaves a message for the calling
 * thread retrievable via e2b_last_error() when it fails. Out-parameters are
 * written only on E2B_OK; handles are freed with their matching _free call. */

#ifndef E2BOWS_H
#define E2BOWS_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum e2b_status {
  E2B_OK = 0,
  E2B_ERR_ARGUMENT = 1,  /* a value violates a precondition */
  E2B_ERR_DIMENSION = 2, /* shapes or dims do not line up */
  E2B_ERR_FORMAT = 3,    /* a file does not match its declared format */
  E2B_ERR_NUMERIC = 4,   /* NaN/Inf or a failed internal consistency check */
  E2B_ERR_IO = 5,        /* filesystem-level failure */
  E2B_ERR_INTERNAL = 6
} e2b_status;

/* Message from the most recent failing call on this thread; never NULL. */
const char* e2b_last_error(void);

typedef struct e2b_dataset e2b_dataset;
typedef struct e2b_tree e2b_tree;
typedef struct e2b_model e2b_model;
typedef struct e2b_words e2b_words;
typedef struct e2b_index e2b_index;

/* ---- datasets ---- */

/* Per-class Gaussian blob templates plus pixel noise; ids are
 * class * per_class + instance. */
e2b_status e2b_dataset_gen_synthetic(uint32_t class_count, uint32_t per_class,
                                     uint32_t image_size, double noise_sigma,
                                     uint64_t seed, e2b_dataset** out);

/* format: "auto", "e2ds", "cifar10" or "cifar100". */
e2b_status e2b_dataset_open(const char* path, const char* format,
                            e2b_dataset** out);
e2b_status e2b_dataset_save(const e2b_dataset* ds, const char* path);
e2b_status e2b_dataset_info(const e2b_dataset* ds, uint64_t* image_count,
                            uint32_t* class_count, uint32_t* height,
                            uint32_t* width, uint32_t* channels);
void e2b_dataset_free(e2b_dataset* ds);

/* ---- category trees ---- */

e2b_status e2b_tree_load(const char* path, e2b_tree** out);
e2b_status e2b_tree_similarity(const e2b_tree* tree, uint32_t c1, uint32_t c2,
                               double* out);
void e2b_tree_free(e2b_tree* tree);

/* ---- training ---- */

typedef struct e2b_train_options {
  double lambda1;            /* triplet loss weight */
  double lambda2;            /* sparsity loss weight */
  double alpha;              /* base triplet margin */
  double rho_hat;            /* target nonzero-word ratio, in (0,1) */
  double learning_rate;
  double beta_learning_rate;
  uint32_t batch_size;
  uint32_t epochs;
  uint64_t seed;
  uint32_t words_per_sfm;
  int freeze_backbone;
} e2b_train_options;

/* Fills the library defaults. */
void e2b_train_options_init(e2b_train_options* opts);

/* tree may be NULL (flat labels: every pair gets the full margin). */
e2b_status e2b_train(const e2b_dataset* ds, const e2b_tree* tree,
                     const e2b_train_options* opts, e2b_model** out);
e2b_status e2b_model_save(const e2b_model* model, const char* path);
e2b_status e2b_model_load(const char* path, e2b_model** out);
e2b_status e2b_model_info(const e2b_model* model, uint32_t* word_dim,
                          double* beta);
void e2b_model_free(e2b_model* model);

/* ---- visual words ---- */

/* beta_override < 0 keeps the model's learned threshold. */
e2b_status e2b_extract_words(const e2b_model* model, const e2b_dataset* ds,
                             double beta_override, int binarize,
                             e2b_words** out);
e2b_status e2b_words_save(const e2b_words* words, const char* path);
e2b_status e2b_words_load(const char* path, e2b_words** out);
/* Widens every vector to dim; fails if a stored word id does not fit. */
e2b_status e2b_words_set_dim(e2b_words* words, uint32_t dim);
e2b_status e2b_words_info(const e2b_words* words, uint64_t* record_count,
                          uint32_t* dim);
void e2b_words_free(e2b_words* words);

/* ---- inverted index ---- */

e2b_status e2b_index_build(const e2b_words* words, uint32_t dim,
                           e2b_index** out);
e2b_status e2b_index_save(const e2b_index* index, const char* path);
e2b_status e2b_index_load(const char* path, e2b_index** out);
e2b_status e2b_index_info(const e2b_index* index, uint32_t* dim,
                          uint32_t* image_count);
e2b_status e2b_index_stats(const e2b_index* index, double* anv, double* ani,
                           double* ano);

/* One query as parallel (word_id, value) arrays with strictly increasing ids
 * and positive values. On entry *result_count is the capacity of result_ids/
 * result_scores; on success it is the number of entries written (top-k by
 * descending score, ties by ascending image id). touched may be NULL. */
e2b_status e2b_index_query(const e2b_index* index, const uint32_t* word_ids,
                           const double* values, uint32_t entry_count,
                           uint32_t k, uint64_t* result_ids,
                           double* result_scores, uint32_t* result_count,
                           uint64_t* touched);
void e2b_index_free(e2b_index* index);

/* ---- file-level pipeline steps ---- */

/* Runs every record of `queries` against the index and writes a ranks file
 * (header with index stats, then one ranked list per query). */
e2b_status e2b_query_to_file(const e2b_index* index, const e2b_words* queries,
                             uint32_t k, const char* ranks_path);

/* Scores a ranks file against dataset labels: AP over the full database
 * ranking (the query itself excluded, unranked images appended in id order)
 * and NDCG@k with shared-label-count grades. Writes the metrics report. */
e2b_status e2b_eval_ranks(const char* ranks_path, const e2b_dataset* labels,
                          uint32_t ndcg_k, const char* report_path);

/* Writes one min/max-scaled PGM per semantic feature map of the image. */
e2b_status e2b_export_sfm(const e2b_model* model, const e2b_dataset* ds,
                          uint64_t image_id, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* E2BOWS_H */
