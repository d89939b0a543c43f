#include "dectlab.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <new>
#include <optional>
#include <type_traits>
#include <string>
#include <utility>
#include <vector>

#include "dectlab/attenuation.hpp"
#include "dectlab/decomp.hpp"
#include "dectlab/diffusion.hpp"
#include "dectlab/dose.hpp"
#include "dectlab/error.hpp"
#include "dectlab/io.hpp"
#include "dectlab/metrics.hpp"
#include "dectlab/phantom.hpp"
#include "dectlab/sampler.hpp"
#include "dectlab/seed.hpp"
#include "dectlab/train.hpp"

struct dl_table {
  dectlab::AttenuationTable value;
};
struct dl_spec {
  dectlab::PhantomSpec value;
};
struct dl_fractions {
  dectlab::FractionMap value;
};
struct dl_mask {
  dectlab::Mask value;
};
struct dl_image {
  dectlab::MonoImage value;
};
struct dl_schedule {
  dectlab::DiffusionSchedule value;
};
struct dl_model {
  explicit dl_model(dectlab::DenoiserModel m, std::vector<double> trace = {},
                    nlohmann::json ex = nlohmann::json::object())
      : value(std::move(m)), loss_trace(std::move(trace)), extra(std::move(ex)) {}
  dectlab::DenoiserModel value;
  std::vector<double> loss_trace;
  nlohmann::json extra;
};

namespace {

thread_local std::string g_last_error;

dl_status to_status(dectlab::Errc code) {
  switch (code) {
    case dectlab::Errc::invalid_argument: return DL_ERR_INVALID_ARGUMENT;
    case dectlab::Errc::out_of_range: return DL_ERR_OUT_OF_RANGE;
    case dectlab::Errc::shape_mismatch: return DL_ERR_SHAPE_MISMATCH;
    case dectlab::Errc::io: return DL_ERR_IO;
    case dectlab::Errc::parse: return DL_ERR_PARSE;
    case dectlab::Errc::numeric: return DL_ERR_NUMERIC;
  }
  return DL_ERR_INTERNAL;
}

dl_status fail(dl_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

// Runs `body`, mapping exceptions onto status codes.
template <class F>
dl_status guard(F&& body) {
  try {
    body();
    return DL_OK;
  } catch (const dectlab::Error& e) {
    return fail(to_status(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(DL_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DL_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DL_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr) {
    throw dectlab::Error(dectlab::Errc::invalid_argument, "api", std::string(name) + " must not be NULL");
  }
}

dectlab::ClampPolicy clamp_of(dl_clamp_policy p) {
  switch (p) {
    case DL_CLAMP_RENORMALIZE: return dectlab::ClampPolicy::clamp_renormalize;
    case DL_CLAMP_RAW: return dectlab::ClampPolicy::raw;
  }
  throw dectlab::Error(dectlab::Errc::invalid_argument, "api", "unknown clamp policy");
}

dectlab::OverflowPolicy overflow_of(dl_overflow_policy p) {
  switch (p) {
    case DL_OVERFLOW_ERROR: return dectlab::OverflowPolicy::error;
    case DL_OVERFLOW_SATURATE: return dectlab::OverflowPolicy::saturate;
  }
  throw dectlab::Error(dectlab::Errc::invalid_argument, "api", "unknown overflow policy");
}

dectlab::TrainConfig train_config_of(const dl_train_config& c) {
  dectlab::TrainConfig t;
  t.epochs = c.epochs;
  t.batch_size = c.batch_size;
  t.learning_rate = c.learning_rate;
  t.seed = c.seed;
  t.patch = c.patch;
  t.hidden = c.hidden;
  t.patch_stride = c.patch_stride;
  t.report_every = c.report_every;
  switch (c.optimizer) {
    case DL_OPTIMIZER_ADAM: t.optimizer = dectlab::Optimizer::adam; break;
    case DL_OPTIMIZER_SGD: t.optimizer = dectlab::Optimizer::sgd; break;
    default: throw dectlab::Error(dectlab::Errc::invalid_argument, "api", "unknown optimizer");
  }
  return t;
}

dectlab::Grid<double> normalized(const dectlab::MonoImage& image) {
  dectlab::Grid<double> g(image.width(), image.height());
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = dectlab::normalize_attenuation(image[k]);
  return g;
}

template <class T, class... Args>
T* make(Args&&... args) {
  if constexpr (std::is_constructible_v<T, Args...>) {
    return new T(std::forward<Args>(args)...);
  } else {
    return new T{std::forward<Args>(args)...};
  }
}

}  // namespace

extern "C" {

const char* dl_last_error(void) { return g_last_error.c_str(); }

const char* dl_version(void) { return "0.1.0"; }

const char* dl_status_name(dl_status status) {
  switch (status) {
    case DL_OK: return "ok";
    case DL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DL_ERR_OUT_OF_RANGE: return "out of range";
    case DL_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case DL_ERR_IO: return "i/o error";
    case DL_ERR_PARSE: return "parse error";
    case DL_ERR_NUMERIC: return "numeric error";
    case DL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

uint64_t dl_derive_seed(uint64_t master, uint64_t stage) { return dectlab::derive_seed(master, stage); }

// ---- attenuation table

dl_status dl_table_default(dl_table** out) {
  return guard([&] {
    require(out, "out");
    *out = make<dl_table>(dectlab::AttenuationTable::defaults());
  });
}

dl_status dl_table_create(double low_kev, const double mu_low[3], double high_kev, const double mu_high[3],
                          dl_table** out) {
  return guard([&] {
    require(mu_low, "mu_low");
    require(mu_high, "mu_high");
    require(out, "out");
    *out = make<dl_table>(dectlab::AttenuationTable(low_kev, {mu_low[0], mu_low[1], mu_low[2]}, high_kev,
                                                    {mu_high[0], mu_high[1], mu_high[2]}));
  });
}

dl_status dl_table_info(const dl_table* table, double* low_kev, double* high_kev, double* determinant) {
  return guard([&] {
    require(table, "table");
    if (low_kev) *low_kev = table->value.low_kev();
    if (high_kev) *high_kev = table->value.high_kev();
    if (determinant) *determinant = table->value.determinant();
  });
}

void dl_table_destroy(dl_table* table) { delete table; }

// ---- phantom specifications

dl_status dl_spec_load(const char* path, dl_spec** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = make<dl_spec>(dectlab::io::load_phantom_spec(path));
  });
}

dl_status dl_spec_parse(const char* json_text, dl_spec** out) {
  return guard([&] {
    require(json_text, "json_text");
    require(out, "out");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
      throw dectlab::Error(dectlab::Errc::parse, "phantom", std::string("spec is not valid JSON: ") + e.what());
    }
    *out = make<dl_spec>(dectlab::io::phantom_spec_from_json(j));
  });
}

dl_status dl_spec_random(int width, int height, uint64_t seed, dl_spec** out) {
  return guard([&] {
    require(out, "out");
    *out = make<dl_spec>(dectlab::random_phantom_spec(width, height, seed));
  });
}

dl_status dl_spec_save(const dl_spec* spec, const char* path) {
  return guard([&] {
    require(spec, "spec");
    require(path, "path");
    dectlab::io::save_phantom_spec(path, spec->value);
  });
}

dl_status dl_spec_info(const dl_spec* spec, int* width, int* height, size_t* vessel_count, size_t* bone_count) {
  return guard([&] {
    require(spec, "spec");
    if (width) *width = spec->value.width;
    if (height) *height = spec->value.height;
    if (vessel_count) *vessel_count = spec->value.vessels.size();
    if (bone_count) *bone_count = spec->value.bones.size();
  });
}

void dl_spec_destroy(dl_spec* spec) { delete spec; }

// ---- fraction maps

dl_status dl_phantom_generate(const dl_spec* spec, dl_fractions** out) {
  return guard([&] {
    require(spec, "spec");
    require(out, "out");
    *out = make<dl_fractions>(dectlab::generate_phantom(spec->value));
  });
}

dl_status dl_fractions_create(int width, int height, const double* water, const double* bone, const double* iodine,
                              dl_fractions** out) {
  return guard([&] {
    require(water, "water");
    require(bone, "bone");
    require(iodine, "iodine");
    require(out, "out");
    if (width < 1 || height < 1) {
      throw dectlab::Error(dectlab::Errc::invalid_argument, "api", "fraction map dimensions must be >= 1");
    }
    dectlab::FractionMap map(width, height);
    for (std::size_t k = 0; k < map.size(); ++k) map[k] = {water[k], bone[k], iodine[k]};
    map.validate();
    *out = make<dl_fractions>(std::move(map));
  });
}

dl_status dl_fractions_load(const char* base, dl_fractions** out) {
  return guard([&] {
    require(base, "base");
    require(out, "out");
    *out = make<dl_fractions>(dectlab::io::load_fraction_map(base));
  });
}

dl_status dl_fractions_save(const dl_fractions* map, const char* base) {
  return guard([&] {
    require(map, "map");
    require(base, "base");
    dectlab::io::save_fraction_map(base, map->value);
  });
}

dl_status dl_fractions_shape(const dl_fractions* map, int* width, int* height) {
  return guard([&] {
    require(map, "map");
    if (width) *width = map->value.width();
    if (height) *height = map->value.height();
  });
}

dl_status dl_fractions_copy(const dl_fractions* map, double* water, double* bone, double* iodine) {
  return guard([&] {
    require(map, "map");
    for (std::size_t k = 0; k < map->value.size(); ++k) {
      const dectlab::Fractions& f = map->value[k];
      if (water) water[k] = f.water;
      if (bone) bone[k] = f.bone;
      if (iodine) iodine[k] = f.iodine;
    }
  });
}

dl_status dl_fractions_rescale(const dl_fractions* map, double scale, dl_fractions** out) {
  return guard([&] {
    require(map, "map");
    require(out, "out");
    *out = make<dl_fractions>(dectlab::rescale_fractions(map->value, scale));
  });
}

void dl_fractions_destroy(dl_fractions* map) { delete map; }

dl_status dl_vessel_mask(const dl_fractions* map, double threshold, dl_mask** out) {
  return guard([&] {
    require(map, "map");
    require(out, "out");
    *out = make<dl_mask>(dectlab::vessel_mask(map->value, threshold));
  });
}

dl_status dl_mask_info(const dl_mask* mask, int* width, int* height, size_t* set_pixels) {
  return guard([&] {
    require(mask, "mask");
    if (width) *width = mask->value.width();
    if (height) *height = mask->value.height();
    if (set_pixels) *set_pixels = dectlab::count_set(mask->value);
  });
}

void dl_mask_destroy(dl_mask* mask) { delete mask; }

// ---- images

dl_status dl_image_create(const dl_image_info* info, const double* data, dl_image** out) {
  return guard([&] {
    require(info, "info");
    require(data, "data");
    require(out, "out");
    if (info->width < 1 || info->height < 1) {
      throw dectlab::Error(dectlab::Errc::invalid_argument, "api", "image dimensions must be >= 1");
    }
    dectlab::DoseLevel(info->dose_cc, info->reference_cc);  // validates the dose fields
    dectlab::MonoImage image(info->width, info->height, info->energy_kev, info->dose_cc, info->reference_cc);
    std::copy(data, data + image.size(), image.values().begin());
    image.check_finite();
    *out = make<dl_image>(std::move(image));
  });
}

dl_status dl_image_load(const char* base, dl_image** out) {
  return guard([&] {
    require(base, "base");
    require(out, "out");
    *out = make<dl_image>(dectlab::io::load_image(base));
  });
}

dl_status dl_image_save(const dl_image* image, const char* base) {
  return guard([&] {
    require(image, "image");
    require(base, "base");
    dectlab::io::save_image(base, image->value);
  });
}

dl_status dl_image_export_pgm(const dl_image* image, const char* path, double lo, double hi) {
  return guard([&] {
    require(image, "image");
    require(path, "path");
    if (!(lo < hi)) {
      const auto [mn, mx] = std::minmax_element(image->value.values().begin(), image->value.values().end());
      lo = *mn;
      hi = *mx > *mn ? *mx : *mn + 1.0;
    }
    dectlab::io::export_pgm(path, image->value, lo, hi);
  });
}

dl_status dl_image_info_get(const dl_image* image, dl_image_info* info) {
  return guard([&] {
    require(image, "image");
    require(info, "info");
    info->width = image->value.width();
    info->height = image->value.height();
    info->energy_kev = image->value.energy_kev;
    info->dose_cc = image->value.dose_cc;
    info->reference_cc = image->value.reference_cc;
  });
}

dl_status dl_image_copy(const dl_image* image, double* out, size_t count) {
  return guard([&] {
    require(image, "image");
    require(out, "out");
    if (count < image->value.size()) {
      throw dectlab::Error(dectlab::Errc::shape_mismatch, "api",
                           "buffer holds " + std::to_string(count) + " values, image has " +
                               std::to_string(image->value.size()));
    }
    std::copy(image->value.values().begin(), image->value.values().end(), out);
  });
}

void dl_image_destroy(dl_image* image) { delete image; }

dl_status dl_compose(const dl_fractions* map, const dl_table* table, double energy_kev, double noise_sigma,
                     uint64_t seed, double dose_cc, double reference_cc, dl_image** out) {
  return guard([&] {
    require(map, "map");
    require(table, "table");
    require(out, "out");
    *out = make<dl_image>(
        dectlab::compose(map->value, table->value, energy_kev, noise_sigma, seed, dose_cc, reference_cc));
  });
}

// ---- decomposition

dl_status dl_decompose_pixel(const dl_table* table, double mu_low, double mu_high, double out[3]) {
  return guard([&] {
    require(table, "table");
    require(out, "out");
    const dectlab::Fractions f = dectlab::decompose_pixel(mu_low, mu_high, table->value);
    out[0] = f.water;
    out[1] = f.bone;
    out[2] = f.iodine;
  });
}

dl_status dl_decompose(const dl_image* low, const dl_image* high, const dl_table* table, dl_clamp_policy policy,
                       dl_fractions** out, dl_decomp_report* report) {
  return guard([&] {
    require(low, "low");
    require(high, "high");
    require(table, "table");
    require(out, "out");
    dectlab::Decomposition d = dectlab::decompose_image(low->value, high->value, table->value, clamp_of(policy));
    if (report) *report = {d.report.clamped, d.report.out_of_range, d.report.max_residual};
    *out = make<dl_fractions>(std::move(d.map));
  });
}

// ---- dose

dl_status dl_simulate_low_dose(const dl_fractions* map, const dl_table* table, double dose_cc, double reference_cc,
                               double noise_sigma, uint64_t seed, dl_image** low, dl_image** high) {
  return guard([&] {
    require(map, "map");
    require(table, "table");
    require(low, "low");
    require(high, "high");
    dectlab::ImagePair pair = dectlab::simulate_low_dose(map->value, table->value,
                                                         dectlab::DoseLevel(dose_cc, reference_cc), noise_sigma, seed);
    auto* l = make<dl_image>(std::move(pair.low));
    auto* h = new (std::nothrow) dl_image{std::move(pair.high)};
    if (!h) {
      delete l;
      throw std::bad_alloc();
    }
    *low = l;
    *high = h;
  });
}

dl_status dl_mde_enhance(const dl_image* low, const dl_image* high, const dl_table* table, dl_clamp_policy clamp,
                         dl_overflow_policy overflow, dl_image** out_low, dl_image** out_high, dl_mde_report* report) {
  return guard([&] {
    require(low, "low");
    require(high, "high");
    require(table, "table");
    require(out_low, "out_low");
    require(out_high, "out_high");
    if (low->value.dose_cc != high->value.dose_cc || low->value.reference_cc != high->value.reference_cc) {
      throw dectlab::Error(dectlab::Errc::invalid_argument, "dose", "low and high images carry different dose levels");
    }
    const dectlab::DoseLevel level(low->value.dose_cc, low->value.reference_cc);
    dectlab::MdeResult r =
        dectlab::mde_enhance(low->value, high->value, table->value, level, clamp_of(clamp), overflow_of(overflow));
    if (report) {
      report->decomposition = {r.decomposition.clamped, r.decomposition.out_of_range, r.decomposition.max_residual};
      report->saturated = r.saturated;
    }
    auto* l = make<dl_image>(std::move(r.images.low));
    auto* h = new (std::nothrow) dl_image{std::move(r.images.high)};
    if (!h) {
      delete l;
      throw std::bad_alloc();
    }
    *out_low = l;
    *out_high = h;
  });
}

// ---- diffusion

dl_status dl_schedule_linear(int steps, double beta_start, double beta_end, dl_schedule** out) {
  return guard([&] {
    require(out, "out");
    *out = make<dl_schedule>(dectlab::DiffusionSchedule::linear(steps, beta_start, beta_end));
  });
}

dl_status dl_schedule_info(const dl_schedule* schedule, int* steps, double* beta_start, double* beta_end) {
  return guard([&] {
    require(schedule, "schedule");
    const int T = schedule->value.steps();
    if (steps) *steps = T;
    if (beta_start) *beta_start = schedule->value.beta(1);
    if (beta_end) *beta_end = schedule->value.beta(T);
  });
}

dl_status dl_schedule_alpha_bar(const dl_schedule* schedule, int t, double* out) {
  return guard([&] {
    require(schedule, "schedule");
    require(out, "out");
    *out = schedule->value.alpha_bar(t);
  });
}

void dl_schedule_destroy(dl_schedule* schedule) { delete schedule; }

void dl_train_config_default(dl_train_config* config) {
  if (!config) return;
  const dectlab::TrainConfig d;
  config->epochs = d.epochs;
  config->batch_size = d.batch_size;
  config->learning_rate = d.learning_rate;
  config->seed = d.seed;
  config->patch = d.patch;
  config->hidden = d.hidden;
  config->patch_stride = d.patch_stride;
  config->report_every = d.report_every;
  config->optimizer = DL_OPTIMIZER_ADAM;
}

dl_status dl_model_oracle(double prior_mean, double prior_var, dl_model** out) {
  return guard([&] {
    require(out, "out");
    if (!std::isfinite(prior_mean) || !(prior_var >= 0.0) || !std::isfinite(prior_var)) {
      throw dectlab::Error(dectlab::Errc::invalid_argument, "diffusion",
                           "oracle prior needs a finite mean and a finite variance >= 0");
    }
    *out = make<dl_model>(dectlab::DenoiserModel(dectlab::GaussianOracle{prior_mean, prior_var}));
  });
}

dl_status dl_train_denoiser(const dl_image* const* targets, const dl_image* const* conditions, size_t count,
                            const dl_schedule* schedule, const dl_train_config* config, dl_progress_fn progress,
                            void* user, dl_model** out) {
  return guard([&] {
    require(targets, "targets");
    require(conditions, "conditions");
    require(schedule, "schedule");
    require(config, "config");
    require(out, "out");
    if (count == 0) throw dectlab::Error(dectlab::Errc::invalid_argument, "diffusion", "training set is empty");
    const dectlab::TrainConfig cfg = train_config_of(*config);
    cfg.validate();
    std::vector<dectlab::PatchSample> data;
    for (size_t i = 0; i < count; ++i) {
      require(targets[i], "targets[i]");
      require(conditions[i], "conditions[i]");
      const auto& t = targets[i]->value;
      const auto& c = conditions[i]->value;
      if (t.width() != c.width() || t.height() != c.height()) {
        throw dectlab::Error(dectlab::Errc::shape_mismatch, "diffusion",
                             "training pair " + std::to_string(i) + ": target " +
                                 dectlab::shape_string(t.width(), t.height()) + " vs condition " +
                                 dectlab::shape_string(c.width(), c.height()));
      }
      auto patches = dectlab::extract_patches(normalized(t), normalized(c), cfg.patch, cfg.patch_stride);
      data.insert(data.end(), std::make_move_iterator(patches.begin()), std::make_move_iterator(patches.end()));
    }
    dectlab::TrainProgress cb;
    if (progress) cb = [progress, user](int epoch, double loss) { progress(epoch, loss, user); };
    dectlab::TrainResult r = dectlab::train_denoiser(data, schedule->value, cfg, cb);
    auto* m = make<dl_model>(std::move(r.model), std::move(r.loss_trace));
    m->extra = {{"epochs", cfg.epochs},
                {"batch_size", cfg.batch_size},
                {"learning_rate", cfg.learning_rate},
                {"seed", cfg.seed},
                {"patch_stride", cfg.patch_stride},
                {"optimizer", dectlab::to_string(cfg.optimizer)},
                {"training_pairs", count},
                {"training_patches", data.size()}};
    *out = m;
  });
}

dl_status dl_model_info_get(const dl_model* model, dl_model_info* info) {
  return guard([&] {
    require(model, "model");
    require(info, "info");
    *info = dl_model_info{};
    if (model->value.kind() == dectlab::DenoiserKind::oracle_gaussian) {
      info->kind = DL_MODEL_ORACLE_GAUSSIAN;
      info->prior_mean = model->value.oracle().prior_mean;
      info->prior_var = model->value.oracle().prior_var;
    } else {
      const dectlab::PatchMlp& m = model->value.mlp();
      info->kind = DL_MODEL_PATCH_MLP;
      info->patch = m.patch();
      info->hidden = m.hidden();
      info->parameter_count = m.parameter_count();
    }
  });
}

dl_status dl_model_loss_trace(const dl_model* model, double* out, size_t capacity, size_t* count) {
  return guard([&] {
    require(model, "model");
    if (count) *count = model->loss_trace.size();
    if (out) std::copy_n(model->loss_trace.begin(), std::min(capacity, model->loss_trace.size()), out);
  });
}

dl_status dl_model_write_loss_csv(const dl_model* model, const char* path) {
  return guard([&] {
    require(model, "model");
    require(path, "path");
    dectlab::io::write_file_atomic(path, dectlab::io::loss_trace_csv(model->loss_trace));
  });
}

dl_status dl_model_save(const dl_model* model, const char* base, const dl_schedule* schedule, const char* extra_json) {
  return guard([&] {
    require(model, "model");
    require(base, "base");
    std::optional<dectlab::io::ScheduleParams> params;
    if (schedule) {
      const int T = schedule->value.steps();
      params = dectlab::io::ScheduleParams{T, schedule->value.beta(1), schedule->value.beta(T)};
    }
    nlohmann::json extra = model->extra;
    if (extra_json) {
      nlohmann::json more;
      try {
        more = nlohmann::json::parse(extra_json);
      } catch (const nlohmann::json::parse_error& e) {
        throw dectlab::Error(dectlab::Errc::parse, "diffusion", std::string("extra_json: ") + e.what());
      }
      if (!more.is_object()) throw dectlab::Error(dectlab::Errc::parse, "diffusion", "extra_json must be an object");
      extra.update(more);
    }
    dectlab::io::save_model(base, model->value, params, extra);
  });
}

dl_status dl_model_load(const char* base, dl_model** out, dl_schedule** schedule) {
  return guard([&] {
    require(base, "base");
    require(out, "out");
    dectlab::io::StoredModel stored = dectlab::io::load_model(base);
    dl_schedule* s = nullptr;
    if (schedule && stored.schedule) s = make<dl_schedule>(stored.schedule->build());
    auto* m = new (std::nothrow) dl_model(std::move(stored.model), {}, std::move(stored.extra));
    if (!m) {
      delete s;
      throw std::bad_alloc();
    }
    *out = m;
    if (schedule) *schedule = s;
  });
}

void dl_model_destroy(dl_model* model) { delete model; }

dl_status dl_ddpm_sample(const double* condition, int width, int height, const dl_model* model,
                         const dl_schedule* schedule, uint64_t seed, double* out) {
  return guard([&] {
    require(condition, "condition");
    require(model, "model");
    require(schedule, "schedule");
    require(out, "out");
    if (width < 1 || height < 1) {
      throw dectlab::Error(dectlab::Errc::invalid_argument, "api", "sample dimensions must be >= 1");
    }
    dectlab::Grid<double> cond(width, height);
    std::copy(condition, condition + cond.size(), cond.values().begin());
    const dectlab::Grid<double> x = dectlab::ddpm_sample(cond, model->value, schedule->value, seed);
    std::copy(x.values().begin(), x.values().end(), out);
  });
}

dl_status dl_enhance_ddpm(const dl_image* low, const dl_model* model, const dl_schedule* schedule, uint64_t seed,
                          dl_image** out) {
  return guard([&] {
    require(low, "low");
    require(model, "model");
    require(schedule, "schedule");
    require(out, "out");
    *out = make<dl_image>(dectlab::enhance_ddpm(low->value, model->value, schedule->value, seed));
  });
}

// ---- metrics

dl_status dl_psnr(const dl_image* test, const dl_image* reference, double data_range, double* out) {
  return guard([&] {
    require(test, "test");
    require(reference, "reference");
    require(out, "out");
    *out = dectlab::psnr(test->value, reference->value, data_range);
  });
}

dl_status dl_ssim(const dl_image* test, const dl_image* reference, double data_range, int window, double* out) {
  return guard([&] {
    require(test, "test");
    require(reference, "reference");
    require(out, "out");
    *out = dectlab::ssim(test->value, reference->value, data_range, window);
  });
}

dl_status dl_masked_mae(const dl_image* test, const dl_image* reference, const dl_mask* mask, double* out) {
  return guard([&] {
    require(test, "test");
    require(reference, "reference");
    require(mask, "mask");
    require(out, "out");
    *out = dectlab::masked_mae(test->value, reference->value, mask->value);
  });
}

dl_status dl_hole_metric(const dl_image* low, const dl_image* high, const dl_table* table, const dl_mask* mask,
                         double fraction_threshold, dl_clamp_policy policy, dl_hole_stats* out) {
  return guard([&] {
    require(low, "low");
    require(high, "high");
    require(table, "table");
    require(mask, "mask");
    require(out, "out");
    const dectlab::HoleStats s =
        dectlab::hole_metric(low->value, high->value, table->value, mask->value, fraction_threshold, clamp_of(policy));
    *out = {s.hole_count, s.hole_pixels, s.hole_pixel_fraction};
  });
}

// ---- files

dl_status dl_write_file_atomic(const char* path, const void* data, size_t size) {
  return guard([&] {
    require(path, "path");
    if (size > 0) require(data, "data");
    dectlab::io::write_file_atomic(path, std::string(static_cast<const char*>(data), size));
  });
}

}  // extern "C"
