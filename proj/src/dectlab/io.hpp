#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dectlab/denoiser.hpp"
#include "dectlab/diffusion.hpp"
#include "dectlab/image.hpp"
#include "dectlab/phantom.hpp"

// On-disk formats. Array payloads are little-endian float32, row-major, in
// `<base>.raw`; metadata lives in the JSON sidecar `<base>.json`. Fraction maps
// are stored as three planes (water, bone, iodine) one after another.

namespace dectlab::io {

/// Writes to `<path>.tmp` then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& bytes);
std::string read_file(const std::string& path);

std::string raw_path(const std::string& base);
std::string sidecar_path(const std::string& base);

void save_image(const std::string& base, const MonoImage& image);
MonoImage load_image(const std::string& base);

void save_fraction_map(const std::string& base, const FractionMap& map);
FractionMap load_fraction_map(const std::string& base);

/// 8-bit binary PGM; values linearly windowed from [lo, hi] to [0, 255].
void export_pgm(const std::string& path, const Grid<double>& image, double lo, double hi);

PhantomSpec phantom_spec_from_json(const nlohmann::json& j);
nlohmann::json phantom_spec_to_json(const PhantomSpec& spec);
PhantomSpec load_phantom_spec(const std::string& path);
void save_phantom_spec(const std::string& path, const PhantomSpec& spec);

struct ScheduleParams {
  int steps = kDeskSteps;
  double beta_start = kDeskBetaStart;
  double beta_end = kDeskBetaEnd;

  DiffusionSchedule build() const { return DiffusionSchedule::linear(steps, beta_start, beta_end); }
};

struct StoredModel {
  DenoiserModel model;
  std::optional<ScheduleParams> schedule;
  nlohmann::json extra;  // free-form hyperparameters (training config etc.)
};

/// Header `<base>.json`; patch-mlp parameters in `<base>.raw` as float32.
void save_model(const std::string& base, const DenoiserModel& model, const std::optional<ScheduleParams>& schedule,
                const nlohmann::json& extra = nlohmann::json::object());
StoredModel load_model(const std::string& base);

/// "epoch,loss" CSV, one row per epoch starting at 1.
std::string loss_trace_csv(const std::vector<double>& trace);

std::vector<float> to_float32(std::span<const double> values);
std::string float32_bytes(std::span<const float> values);
std::vector<float> parse_float32(const std::string& bytes);

}  // namespace dectlab::io
