#pragma once

#include <cstdint>

#include "dectlab/denoiser.hpp"
#include "dectlab/diffusion.hpp"
#include "dectlab/image.hpp"

namespace dectlab {

/// Noise prediction over a whole image. Patch models run on overlapping tiles
/// at stride patch/2 and the per-pixel predictions are averaged uniformly;
/// the Gaussian oracle is applied pixelwise and ignores the condition.
Grid<double> predict_eps(const DenoiserModel& model, const Grid<double>& xt, const Grid<double>& condition, int t,
                         const DiffusionSchedule& schedule);

/// Ancestral sampling from x_T ~ N(0, I):
///   x_{t-1} = (x_t - beta_t / sqrt(1 - alpha_bar_t) * eps) / sqrt(alpha_t) + sqrt(beta_t) z,
/// with z = 0 on the final step. Works in normalized units. Throws
/// Errc::numeric naming the step when the chain stops being finite.
Grid<double> ddpm_sample(const Grid<double>& condition, const DenoiserModel& model, const DiffusionSchedule& schedule,
                         std::uint64_t seed);

/// Normalizes a low-dose image, samples, and maps back to attenuation. The
/// result carries the input's energy with dose set to its reference dose.
MonoImage enhance_ddpm(const MonoImage& low, const DenoiserModel& model, const DiffusionSchedule& schedule,
                       std::uint64_t seed);

}  // namespace dectlab
