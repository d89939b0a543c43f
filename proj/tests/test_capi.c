#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "dectlab.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

#define OK(call)                                                                          \
  do {                                                                                    \
    dl_status st_ = (call);                                                               \
    if (st_ != DL_OK) {                                                                   \
      fprintf(stderr, "%s:%d: %s -> %s: %s\n", __FILE__, __LINE__, #call, dl_status_name(st_), \
              dl_last_error());                                                           \
      ++failures;                                                                         \
    }                                                                                     \
  } while (0)

static void progress(int epoch, double loss, void* user) {
  (void)loss;
  *(int*)user = epoch;
}

static void test_table(void) {
  dl_table* t = NULL;
  double lo = 0, hi = 0, det = 0;
  OK(dl_table_default(&t));
  OK(dl_table_info(t, &lo, &hi, &det));
  EXPECT(lo == 80.0 && hi == 110.0);
  EXPECT(fabs(det + 0.166644) < 1e-6);

  double f[3];
  OK(dl_decompose_pixel(t, 0.184, 0.167, f));
  EXPECT(fabs(f[0] - 1.0) < 1e-12 && fabs(f[1]) < 1e-12 && fabs(f[2]) < 1e-12);

  const double same[3] = {1.0, 1.0, 1.0};
  dl_table* bad = NULL;
  EXPECT(dl_table_create(80, same, 110, same, &bad) == DL_ERR_INVALID_ARGUMENT);
  EXPECT(strstr(dl_last_error(), "singular") != NULL);
  EXPECT(bad == NULL);
  EXPECT(strlen(dl_last_error()) > 0);
  EXPECT(dl_decompose_pixel(NULL, 0, 0, f) == DL_ERR_INVALID_ARGUMENT);
  dl_table_destroy(t);
  dl_table_destroy(NULL);
}

static void test_pipeline(void) {
  dl_table* t = NULL;
  dl_spec* spec = NULL;
  dl_fractions* truth = NULL;
  OK(dl_table_default(&t));
  OK(dl_spec_parse("{\"width\": 24, \"height\": 20, \"vessels\": "
                   "[{\"cx\": 12, \"cy\": 10, \"radius\": 4, \"iodine_fraction\": 0.05}]}",
                   &spec));
  OK(dl_phantom_generate(spec, &truth));
  int w = 0, h = 0;
  size_t nv = 0, nb = 0;
  OK(dl_spec_info(spec, &w, &h, &nv, &nb));
  EXPECT(w == 24 && h == 20 && nv == 1 && nb == 0);

  double* iod = malloc(sizeof(double) * 480);
  OK(dl_fractions_copy(truth, NULL, NULL, iod));
  EXPECT(fabs(iod[10 * 24 + 12] - 0.05) < 1e-15);
  free(iod);

  dl_mask* mask = NULL;
  size_t set = 0;
  OK(dl_vessel_mask(truth, 0.01, &mask));
  OK(dl_mask_info(mask, &w, &h, &set));
  EXPECT(set > 30);

  /* Noiseless low dose then MDE reproduces the full-dose images. */
  dl_image *low = NULL, *high = NULL, *mlow = NULL, *mhigh = NULL, *full = NULL;
  OK(dl_simulate_low_dose(truth, t, 10.0, 80.0, 0.0, 1, &low, &high));
  dl_image_info info;
  OK(dl_image_info_get(low, &info));
  EXPECT(info.dose_cc == 10.0 && info.energy_kev == 80.0);
  dl_mde_report rep;
  OK(dl_mde_enhance(low, high, t, DL_CLAMP_RENORMALIZE, DL_OVERFLOW_ERROR, &mlow, &mhigh, &rep));
  EXPECT(rep.saturated == 0);
  OK(dl_compose(truth, t, 80.0, 0.0, 0, 80.0, 80.0, &full));
  double psnr = 0, ssim = 0, mae = 1;
  OK(dl_psnr(mlow, full, 4.0, &psnr));
  OK(dl_ssim(mlow, full, 4.0, 7, &ssim));
  OK(dl_masked_mae(mlow, full, mask, &mae));
  EXPECT(psnr == 99.0);
  EXPECT(fabs(ssim - 1.0) < 1e-9);
  EXPECT(mae < 1e-9);

  dl_hole_stats holes;
  OK(dl_hole_metric(low, high, t, mask, 0.025, DL_CLAMP_RENORMALIZE, &holes));
  EXPECT(holes.hole_count == 1 && holes.hole_pixel_fraction == 1.0);

  dl_image* wrong = NULL;
  EXPECT(dl_compose(truth, t, 100.0, 0.0, 0, 80.0, 80.0, &wrong) == DL_ERR_INVALID_ARGUMENT);
  EXPECT(wrong == NULL);
  EXPECT(strstr(dl_last_error(), "100") != NULL);

  dl_fractions* up = NULL;
  EXPECT(dl_fractions_rescale(truth, 30.0, &up) == DL_ERR_OUT_OF_RANGE);
  EXPECT(up == NULL);

  dl_image_destroy(low);
  dl_image_destroy(high);
  dl_image_destroy(mlow);
  dl_image_destroy(mhigh);
  dl_image_destroy(full);
  dl_mask_destroy(mask);
  dl_fractions_destroy(truth);
  dl_spec_destroy(spec);
  dl_table_destroy(t);
}

static void test_diffusion(void) {
  dl_schedule* s = NULL;
  double ab = 0;
  OK(dl_schedule_linear(4, 0.1, 0.4, &s));
  OK(dl_schedule_alpha_bar(s, 4, &ab));
  EXPECT(fabs(ab - 0.3024) < 1e-12);
  EXPECT(dl_schedule_alpha_bar(s, 5, &ab) == DL_ERR_OUT_OF_RANGE);
  dl_schedule_destroy(s);

  OK(dl_schedule_linear(50, 0.02, 0.4, &s));
  dl_model* oracle = NULL;
  OK(dl_model_oracle(2.0, 0.25, &oracle));
  double cond[400], out[400];
  for (int i = 0; i < 400; ++i) cond[i] = 0.0;
  OK(dl_ddpm_sample(cond, 20, 20, oracle, s, 3, out));
  double mean = 0;
  for (int i = 0; i < 400; ++i) mean += out[i] / 400.0;
  EXPECT(fabs(mean - 2.0) < 0.1);
  dl_model_destroy(oracle);

  /* Tiny training run through the image-level entry point. */
  dl_table* t = NULL;
  dl_spec* spec = NULL;
  dl_fractions* truth = NULL;
  dl_image *target = NULL, *low = NULL, *high = NULL;
  OK(dl_table_default(&t));
  OK(dl_spec_random(16, 16, 5, &spec));
  OK(dl_phantom_generate(spec, &truth));
  OK(dl_compose(truth, t, 80.0, 0.0, 0, 80.0, 80.0, &target));
  OK(dl_simulate_low_dose(truth, t, 20.0, 80.0, 0.005, 2, &low, &high));
  const dl_image* targets[1] = {target};
  const dl_image* conds[1] = {low};
  dl_train_config cfg;
  dl_train_config_default(&cfg);
  cfg.epochs = 5;
  cfg.patch = 4;
  cfg.hidden = 8;
  cfg.report_every = 1;
  int last_epoch = 0;
  dl_model* model = NULL;
  OK(dl_train_denoiser(targets, conds, 1, s, &cfg, progress, &last_epoch, &model));
  EXPECT(last_epoch == 5);
  dl_model_info mi;
  OK(dl_model_info_get(model, &mi));
  EXPECT(mi.kind == DL_MODEL_PATCH_MLP && mi.patch == 4 && mi.hidden == 8);
  EXPECT(mi.parameter_count == (size_t)(8 * 33 + 8 + 16 * 8 + 16));
  size_t n = 0;
  double trace[5];
  OK(dl_model_loss_trace(model, trace, 5, &n));
  EXPECT(n == 5);

  dl_image* enhanced = NULL;
  OK(dl_enhance_ddpm(low, model, s, 9, &enhanced));
  dl_image_info info;
  OK(dl_image_info_get(enhanced, &info));
  EXPECT(info.dose_cc == 80.0 && info.width == 16);

  cfg.learning_rate = -1.0;
  dl_model* bad = NULL;
  EXPECT(dl_train_denoiser(targets, conds, 1, s, &cfg, NULL, NULL, &bad) == DL_ERR_INVALID_ARGUMENT);
  EXPECT(strstr(dl_last_error(), "learning_rate") != NULL);

  dl_image_destroy(enhanced);
  dl_model_destroy(model);
  dl_image_destroy(target);
  dl_image_destroy(low);
  dl_image_destroy(high);
  dl_fractions_destroy(truth);
  dl_spec_destroy(spec);
  dl_table_destroy(t);
  dl_schedule_destroy(s);
}

static void test_names(void) {
  EXPECT(strcmp(dl_status_name(DL_OK), "ok") == 0);
  EXPECT(strcmp(dl_status_name(DL_ERR_IO), "i/o error") == 0);
  EXPECT(strlen(dl_version()) > 0);
  EXPECT(dl_derive_seed(1, 2) == dl_derive_seed(1, 2));
  EXPECT(dl_derive_seed(1, 2) != dl_derive_seed(1, 3));
}

int main(void) {
  test_table();
  test_pipeline();
  test_diffusion();
  test_names();
  if (failures) {
    fprintf(stderr, "%d C API check(s) failed\n", failures);
    return 1;
  }
  printf("C API checks passed\n");
  return 0;
}
