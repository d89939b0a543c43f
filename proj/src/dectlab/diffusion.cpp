#include "dectlab/diffusion.hpp"

#include <cmath>
#include <sstream>

#include "dectlab/error.hpp"

namespace dectlab {

std::size_t DiffusionSchedule::step_index(int t) const {
  if (t < 1 || t > steps()) {
    throw Error(Errc::out_of_range, "diffusion",
                "step " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
  }
  return static_cast<std::size_t>(t - 1);
}

DiffusionSchedule DiffusionSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) {
    throw Error(Errc::invalid_argument, "diffusion", "step count must be >= 1, got " + std::to_string(steps));
  }
  if (!(beta_start > 0.0)) {
    throw Error(Errc::invalid_argument, "diffusion", "beta_start must be > 0");
  }
  if (!(beta_end < 1.0)) {
    throw Error(Errc::invalid_argument, "diffusion", "beta_end must be < 1");
  }
  if (!(beta_start <= beta_end)) {
    throw Error(Errc::invalid_argument, "diffusion", "beta_start must not exceed beta_end");
  }
  DiffusionSchedule s;
  s.betas_.resize(static_cast<std::size_t>(steps));
  s.alphas_.resize(s.betas_.size());
  s.alpha_bars_.resize(s.betas_.size());
  double running = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double beta =
        steps == 1 ? beta_start : beta_start + (beta_end - beta_start) * static_cast<double>(i) / (steps - 1);
    s.betas_[static_cast<std::size_t>(i)] = beta;
    s.alphas_[static_cast<std::size_t>(i)] = 1.0 - beta;
    running *= 1.0 - beta;
    s.alpha_bars_[static_cast<std::size_t>(i)] = running;
  }
  return s;
}

std::vector<double> forward_sample(std::span<const double> x0, int t, const DiffusionSchedule& schedule,
                                   std::span<const double> eps) {
  if (t < 1 || t > schedule.steps()) {
    throw Error(Errc::out_of_range, "diffusion",
                "step " + std::to_string(t) + " outside [1, " + std::to_string(schedule.steps()) + "]");
  }
  if (x0.size() != eps.size()) {
    throw Error(Errc::shape_mismatch, "diffusion",
                "x0 has " + std::to_string(x0.size()) + " elements but eps has " + std::to_string(eps.size()));
  }
  const double signal = std::sqrt(schedule.alpha_bar(t));
  const double noise = std::sqrt(1.0 - schedule.alpha_bar(t));
  std::vector<double> xt(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) xt[i] = signal * x0[i] + noise * eps[i];
  return xt;
}

}  // namespace dectlab
