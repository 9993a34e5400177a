/* Public C API for the scaffusion depth-completion toolkit.
 *
 * The C++ core stays behind this boundary: callers work with opaque handles
 * and status codes, and every entry point is safe to call from C. Strings
 * returned by the library point into thread-local storage and stay valid
 * until the next call on the same thread.
 */
#ifndef SCAFFUSION_H
#define SCAFFUSION_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined _WIN32
#define SF_API __declspec(dllexport)
#else
#define SF_API __attribute__((visibility("default")))
#endif

typedef enum sf_status {
    SF_OK = 0,
    SF_ERROR_INVALID_ARGUMENT = 1,
    SF_ERROR_IO = 2,
    SF_ERROR_RUNTIME = 3
} sf_status;

SF_API const char* sf_version(void);
SF_API const char* sf_status_name(sf_status status);
/* Message for the most recent failure on this thread ("" if none). */
SF_API const char* sf_last_error(void);

/* ---------------------------------------------------------------- datasets */

typedef struct sf_gen_data_params {
    uint64_t seed;
    const char* layout;    /* room | corridor | outdoor-strip */
    int sequences;         /* >= 1 */
    int frames;            /* per sequence, >= 3 */
    int width, height;
    double min_depth_m, max_depth_m;
    const char* sparsity;  /* corner | scanline | uniform */
    int points;            /* target sparse point count */
    int lines;             /* scanline count; 0 derives from points */
    double dropout;        /* scanline dropout fraction */
    const char* out_dir;
    int use_cache;         /* honor SCAFF_FUSION_CACHE when nonzero */
} sf_gen_data_params;

typedef struct sf_gen_data_summary {
    int sequences;
    int frames;
    double mean_density;
    double min_depth_m, max_depth_m;
    int from_cache;
} sf_gen_data_summary;

SF_API sf_status sf_gen_data(const sf_gen_data_params* params, sf_gen_data_summary* summary);

/* ---------------------------------------------------------------- training */

/* config_path: key = value run configuration (see README). Checkpoints and
 * CSV logs land in out_dir; the final checkpoint is <out_dir>/final.ckpt. */
SF_API sf_status sf_train(const char* config_path, const char* out_dir);

/* -------------------------------------------------------------- evaluation */

typedef struct sf_eval_params {
    const char* checkpoint;
    const char* dataset_dir;
    const char* out_dir;       /* metrics CSV/JSON and error maps */
    double eval_min_m, eval_max_m;
    int resample_points;       /* > 0: redraw sparse inputs at this count */
    const char* resample_kind; /* uniform | corner; NULL = uniform */
    uint64_t resample_seed;
    int write_error_maps;
} sf_eval_params;

typedef struct sf_metrics {
    double mae_mm, rmse_mm, imae_per_km, irmse_per_km;
    long valid_count;
} sf_metrics;

SF_API sf_status sf_eval(const sf_eval_params* params, sf_metrics* aggregate);

/* Ablation suites: spp-on-off | density-sweep | output-head. Writes
 * report.md / report.csv under out_dir; *pass is 1 when the expected trend
 * holds. */
SF_API sf_status sf_ablate(const char* suite, const char* config_path, const char* out_dir,
                           int* pass);

/* ------------------------------------------------------------- inference */

typedef struct sf_model sf_model; /* opaque */

SF_API sf_status sf_model_open(const char* checkpoint_path, sf_model** out_model);
SF_API void sf_model_close(sf_model* model);
SF_API sf_status sf_model_input_size(const sf_model* model, int* divisor);

/* Buffers are row-major, channel-interleaved doubles. image: h*w*3 in [0,1]
 * (may be NULL for a topology-only model); sparse: h*w depths in meters with
 * 0 = absent. Outputs are h*w meters; either output pointer may be NULL. */
SF_API sf_status sf_model_infer(sf_model* model, const double* image, const double* sparse,
                                int width, int height, double* refined_out, double* topology_out);

/* --------------------------------------------------------------- utilities */

/* Renders dataset frame visualizations (and predictions when checkpoint is
 * not NULL) into out_dir. */
SF_API sf_status sf_visualize(const char* dataset_dir, const char* checkpoint, int frame,
                              const char* out_dir);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SCAFFUSION_H */
