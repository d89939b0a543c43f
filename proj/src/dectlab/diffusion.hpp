#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dectlab {

/// Variance schedule beta_1..beta_T with alpha_t = 1 - beta_t and the running
/// product alpha_bar_t. Step indices are 1-based throughout.
class DiffusionSchedule {
 public:
  /// Linearly spaced betas from beta_start to beta_end (beta_start when steps == 1).
  static DiffusionSchedule linear(int steps, double beta_start, double beta_end);

  int steps() const noexcept { return static_cast<int>(betas_.size()); }
  double beta_start() const noexcept { return betas_.front(); }
  double beta_end() const noexcept { return betas_.back(); }

  /// 1-based; throws Errc::out_of_range outside [1, T].
  double beta(int t) const { return betas_[step_index(t)]; }
  double alpha(int t) const { return alphas_[step_index(t)]; }
  double alpha_bar(int t) const { return alpha_bars_[step_index(t)]; }

  std::span<const double> betas() const noexcept { return betas_; }
  std::span<const double> alphas() const noexcept { return alphas_; }
  std::span<const double> alpha_bars() const noexcept { return alpha_bars_; }

 private:
  DiffusionSchedule() = default;
  std::size_t step_index(int t) const;
  std::vector<double> betas_;
  std::vector<double> alphas_;
  std::vector<double> alpha_bars_;
};

/// Diffusion defaults of the original DDPM recipe.
inline constexpr int kDefaultSteps = 1000;
inline constexpr double kDefaultBetaStart = 1e-4;
inline constexpr double kDefaultBetaEnd = 0.02;

/// Desk-scale schedule used by the pipeline: 50 steps, beta 0.02 -> 0.4.
inline constexpr int kDeskSteps = 50;
inline constexpr double kDeskBetaStart = 0.02;
inline constexpr double kDeskBetaEnd = 0.4;

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps, elementwise.
std::vector<double> forward_sample(std::span<const double> x0, int t, const DiffusionSchedule& schedule,
                                   std::span<const double> eps);

/// Attenuation window mapped affinely onto [-1, 1] for diffusion.
inline constexpr double kWindowLow = 0.0;
inline constexpr double kWindowHigh = 4.0;

inline double normalize_attenuation(double mu) noexcept {
  return 2.0 * (mu - kWindowLow) / (kWindowHigh - kWindowLow) - 1.0;
}
inline double denormalize_attenuation(double v) noexcept {
  return kWindowLow + (v + 1.0) * 0.5 * (kWindowHigh - kWindowLow);
}

}  // namespace dectlab
