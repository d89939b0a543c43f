#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dectlab/denoiser.hpp"
#include "dectlab/diffusion.hpp"
#include "dectlab/image.hpp"

namespace dectlab {

enum class Optimizer { sgd, adam };

const char* to_string(Optimizer opt) noexcept;
Optimizer parse_optimizer(const std::string& name);

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  int patch = 8;
  int hidden = 64;
  int patch_stride = 4;
  /// Progress callback cadence, in epochs.
  int report_every = 10;
  Optimizer optimizer = Optimizer::adam;

  /// Throws Errc::invalid_argument naming the first non-positive field.
  void validate() const;
};

/// A co-located (target, condition) patch pair in normalized units.
struct PatchSample {
  std::vector<double> target;
  std::vector<double> condition;
};

/// All patch x patch windows at the given stride (plus a flush last row and
/// column so every pixel is covered).
std::vector<PatchSample> extract_patches(const Grid<double>& target, const Grid<double>& condition, int patch,
                                         int stride);

/// Tile origins along one axis: 0, stride, 2*stride, ... and extent - patch.
std::vector<int> tile_origins(int extent, int patch, int stride);

struct TrainResult {
  DenoiserModel model;
  /// Mean training loss per epoch.
  std::vector<double> loss_trace;
};

using TrainProgress = std::function<void(int epoch, double loss)>;

/// Minibatch gradient descent on the noise-prediction loss. Each visit of a
/// sample draws a fresh step t ~ U{1..T} and eps ~ N(0, I). Throws
/// Errc::numeric when the loss stops being finite.
TrainResult train_denoiser(std::span<const PatchSample> dataset, const DiffusionSchedule& schedule,
                           const TrainConfig& config, const TrainProgress& progress = {});

/// Trailing moving average over `window` epochs.
std::vector<double> smooth_trace(std::span<const double> trace, int window);

}  // namespace dectlab
