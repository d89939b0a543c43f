#ifndef DECTLAB_H
#define DECTLAB_H

/* C interface to the dual-energy CT contrast-reduction lab.
 *
 * Every fallible call returns a dl_status; on failure the message is kept per
 * thread and can be read with dl_last_error() until the next failing call.
 * Objects are opaque handles released with the matching *_destroy function
 * (passing NULL is allowed). Output handles are only written on success. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DECTLAB_BUILDING_LIBRARY)
#    define DL_API __declspec(dllexport)
#  else
#    define DL_API __declspec(dllimport)
#  endif
#else
#  define DL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dl_status {
  DL_OK = 0,
  DL_ERR_INVALID_ARGUMENT = 1,
  DL_ERR_OUT_OF_RANGE = 2,
  DL_ERR_SHAPE_MISMATCH = 3,
  DL_ERR_IO = 4,
  DL_ERR_PARSE = 5,
  DL_ERR_NUMERIC = 6,
  DL_ERR_INTERNAL = 7
} dl_status;

typedef enum dl_clamp_policy { DL_CLAMP_RENORMALIZE = 0, DL_CLAMP_RAW = 1 } dl_clamp_policy;
typedef enum dl_overflow_policy { DL_OVERFLOW_ERROR = 0, DL_OVERFLOW_SATURATE = 1 } dl_overflow_policy;
typedef enum dl_optimizer { DL_OPTIMIZER_ADAM = 0, DL_OPTIMIZER_SGD = 1 } dl_optimizer;
typedef enum dl_model_kind { DL_MODEL_ORACLE_GAUSSIAN = 0, DL_MODEL_PATCH_MLP = 1 } dl_model_kind;

typedef struct dl_table dl_table;
typedef struct dl_spec dl_spec;
typedef struct dl_fractions dl_fractions;
typedef struct dl_mask dl_mask;
typedef struct dl_image dl_image;
typedef struct dl_schedule dl_schedule;
typedef struct dl_model dl_model;

DL_API const char* dl_last_error(void);
DL_API const char* dl_version(void);
DL_API const char* dl_status_name(dl_status status);

/* splitmix64(master ^ splitmix64(stage)) */
DL_API uint64_t dl_derive_seed(uint64_t master, uint64_t stage);

/* ---- attenuation table ------------------------------------------------ */

/* 80/110 keV table for water, bone and iohexol. */
DL_API dl_status dl_table_default(dl_table** out);
/* mu arrays are (water, bone, iodine) in cm^-1. */
DL_API dl_status dl_table_create(double low_kev, const double mu_low[3], double high_kev, const double mu_high[3],
                                 dl_table** out);
DL_API dl_status dl_table_info(const dl_table* table, double* low_kev, double* high_kev, double* determinant);
DL_API void dl_table_destroy(dl_table* table);

/* ---- phantom specifications ------------------------------------------- */

DL_API dl_status dl_spec_load(const char* path, dl_spec** out);
DL_API dl_status dl_spec_parse(const char* json_text, dl_spec** out);
DL_API dl_status dl_spec_random(int width, int height, uint64_t seed, dl_spec** out);
DL_API dl_status dl_spec_save(const dl_spec* spec, const char* path);
DL_API dl_status dl_spec_info(const dl_spec* spec, int* width, int* height, size_t* vessel_count, size_t* bone_count);
DL_API void dl_spec_destroy(dl_spec* spec);

/* ---- fraction maps ---------------------------------------------------- */

DL_API dl_status dl_phantom_generate(const dl_spec* spec, dl_fractions** out);
/* Planes are row-major width*height arrays; the map is validated. */
DL_API dl_status dl_fractions_create(int width, int height, const double* water, const double* bone,
                                     const double* iodine, dl_fractions** out);
DL_API dl_status dl_fractions_load(const char* base, dl_fractions** out);
DL_API dl_status dl_fractions_save(const dl_fractions* map, const char* base);
DL_API dl_status dl_fractions_shape(const dl_fractions* map, int* width, int* height);
/* Any plane pointer may be NULL. */
DL_API dl_status dl_fractions_copy(const dl_fractions* map, double* water, double* bone, double* iodine);
/* v_c' = s v_c, water absorbs the difference. */
DL_API dl_status dl_fractions_rescale(const dl_fractions* map, double scale, dl_fractions** out);
DL_API void dl_fractions_destroy(dl_fractions* map);

/* Pixels with iodine fraction strictly above threshold. */
DL_API dl_status dl_vessel_mask(const dl_fractions* map, double threshold, dl_mask** out);
DL_API dl_status dl_mask_info(const dl_mask* mask, int* width, int* height, size_t* set_pixels);
DL_API void dl_mask_destroy(dl_mask* mask);

/* ---- monoenergetic images --------------------------------------------- */

typedef struct dl_image_info {
  int width;
  int height;
  double energy_kev;
  double dose_cc;
  double reference_cc;
} dl_image_info;

DL_API dl_status dl_image_create(const dl_image_info* info, const double* data, dl_image** out);
DL_API dl_status dl_image_load(const char* base, dl_image** out);
DL_API dl_status dl_image_save(const dl_image* image, const char* base);
/* lo >= hi selects the image min/max as the window. */
DL_API dl_status dl_image_export_pgm(const dl_image* image, const char* path, double lo, double hi);
DL_API dl_status dl_image_info_get(const dl_image* image, dl_image_info* info);
DL_API dl_status dl_image_copy(const dl_image* image, double* out, size_t count);
DL_API void dl_image_destroy(dl_image* image);

DL_API dl_status dl_compose(const dl_fractions* map, const dl_table* table, double energy_kev, double noise_sigma,
                            uint64_t seed, double dose_cc, double reference_cc, dl_image** out);

/* ---- decomposition ---------------------------------------------------- */

typedef struct dl_decomp_report {
  size_t clamped;
  size_t out_of_range;
  double max_residual;
} dl_decomp_report;

/* Raw (unclamped) fractions of one pixel pair. */
DL_API dl_status dl_decompose_pixel(const dl_table* table, double mu_low, double mu_high, double out[3]);
/* report may be NULL. */
DL_API dl_status dl_decompose(const dl_image* low, const dl_image* high, const dl_table* table, dl_clamp_policy policy,
                              dl_fractions** out, dl_decomp_report* report);

/* ---- dose ------------------------------------------------------------- */

/* Noise seeds are dl_derive_seed(seed, 0) for low and dl_derive_seed(seed, 1) for high. */
DL_API dl_status dl_simulate_low_dose(const dl_fractions* map, const dl_table* table, double dose_cc,
                                      double reference_cc, double noise_sigma, uint64_t seed, dl_image** low,
                                      dl_image** high);

typedef struct dl_mde_report {
  dl_decomp_report decomposition;
  size_t saturated;
} dl_mde_report;

/* Dose level is taken from the inputs; outputs carry the reference dose. */
DL_API dl_status dl_mde_enhance(const dl_image* low, const dl_image* high, const dl_table* table,
                                dl_clamp_policy clamp, dl_overflow_policy overflow, dl_image** out_low,
                                dl_image** out_high, dl_mde_report* report);

/* ---- diffusion -------------------------------------------------------- */

DL_API dl_status dl_schedule_linear(int steps, double beta_start, double beta_end, dl_schedule** out);
DL_API dl_status dl_schedule_info(const dl_schedule* schedule, int* steps, double* beta_start, double* beta_end);
/* t is 1-based. */
DL_API dl_status dl_schedule_alpha_bar(const dl_schedule* schedule, int t, double* out);
DL_API void dl_schedule_destroy(dl_schedule* schedule);

typedef struct dl_train_config {
  int epochs;
  int batch_size;
  double learning_rate;
  uint64_t seed;
  int patch;
  int hidden;
  int patch_stride;
  int report_every;
  dl_optimizer optimizer;
} dl_train_config;

typedef void (*dl_progress_fn)(int epoch, double loss, void* user);

DL_API void dl_train_config_default(dl_train_config* config);

typedef struct dl_model_info {
  dl_model_kind kind;
  int patch;
  int hidden;
  size_t parameter_count;
  double prior_mean;
  double prior_var;
} dl_model_info;

DL_API dl_status dl_model_oracle(double prior_mean, double prior_var, dl_model** out);
/* Trains on (target, condition) attenuation image pairs; images are mapped to
 * the normalized window before patch extraction. progress may be NULL. */
DL_API dl_status dl_train_denoiser(const dl_image* const* targets, const dl_image* const* conditions, size_t count,
                                   const dl_schedule* schedule, const dl_train_config* config,
                                   dl_progress_fn progress, void* user, dl_model** out);
DL_API dl_status dl_model_info_get(const dl_model* model, dl_model_info* info);
/* Writes up to capacity values; *count receives the full trace length. */
DL_API dl_status dl_model_loss_trace(const dl_model* model, double* out, size_t capacity, size_t* count);
DL_API dl_status dl_model_write_loss_csv(const dl_model* model, const char* path);
/* schedule and extra_json may be NULL. */
DL_API dl_status dl_model_save(const dl_model* model, const char* base, const dl_schedule* schedule,
                               const char* extra_json);
/* *schedule receives the stored schedule or NULL when none was saved; schedule may be NULL. */
DL_API dl_status dl_model_load(const char* base, dl_model** out, dl_schedule** schedule);
DL_API void dl_model_destroy(dl_model* model);

/* Conditional reverse sampling in normalized units on a width*height buffer. */
DL_API dl_status dl_ddpm_sample(const double* condition, int width, int height, const dl_model* model,
                                const dl_schedule* schedule, uint64_t seed, double* out);
DL_API dl_status dl_enhance_ddpm(const dl_image* low, const dl_model* model, const dl_schedule* schedule,
                                 uint64_t seed, dl_image** out);

/* ---- metrics ---------------------------------------------------------- */

DL_API dl_status dl_psnr(const dl_image* test, const dl_image* reference, double data_range, double* out);
DL_API dl_status dl_ssim(const dl_image* test, const dl_image* reference, double data_range, int window,
                         double* out);
DL_API dl_status dl_masked_mae(const dl_image* test, const dl_image* reference, const dl_mask* mask, double* out);

typedef struct dl_hole_stats {
  size_t hole_count;
  size_t hole_pixels;
  double hole_pixel_fraction;
} dl_hole_stats;

DL_API dl_status dl_hole_metric(const dl_image* low, const dl_image* high, const dl_table* table,
                                const dl_mask* mask, double fraction_threshold, dl_clamp_policy policy,
                                dl_hole_stats* out);

/* ---- files ------------------------------------------------------------ */

/* Writes to a temporary sibling and renames over path. */
DL_API dl_status dl_write_file_atomic(const char* path, const void* data, size_t size);

#ifdef __cplusplus
}
#endif

#endif
