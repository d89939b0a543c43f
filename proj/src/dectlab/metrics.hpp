#pragma once

#include <cstddef>

#include "dectlab/attenuation.hpp"
#include "dectlab/decomp.hpp"
#include "dectlab/image.hpp"

namespace dectlab {

/// PSNR values are capped here; identical images report exactly this.
inline constexpr double kPsnrCapDb = 99.0;
/// Default dynamic range for attenuation images (cm^-1), the diffusion window.
inline constexpr double kDefaultDataRange = 4.0;
inline constexpr int kDefaultSsimWindow = 7;

double mean_squared_error(const Grid<double>& test, const Grid<double>& reference);

/// 10 log10(range^2 / MSE), capped at kPsnrCapDb.
double psnr(const Grid<double>& test, const Grid<double>& reference, double data_range = kDefaultDataRange);

/// Mean SSIM over every fully contained window x window uniform window, with
/// C1 = (k1 R)^2 and C2 = (k2 R)^2.
double ssim(const Grid<double>& test, const Grid<double>& reference, double data_range = kDefaultDataRange,
            int window = kDefaultSsimWindow, double k1 = 0.01, double k2 = 0.03);

/// Mean absolute difference over the set pixels of `mask`.
double masked_mae(const Grid<double>& test, const Grid<double>& reference, const Mask& mask);

/// Number of 4-connected components of set pixels.
std::size_t count_components(const Mask& mask);

struct HoleStats {
  std::size_t hole_count = 0;
  std::size_t hole_pixels = 0;
  double hole_pixel_fraction = 0.0;
};

/// Decomposes the pair and counts vessel pixels whose iodine fraction is at or
/// below `fraction_threshold`, along with their 4-connected clusters.
HoleStats hole_metric(const MonoImage& low, const MonoImage& high, const AttenuationTable& table, const Mask& mask,
                      double fraction_threshold, ClampPolicy policy = ClampPolicy::clamp_renormalize);

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double vessel_mae = 0.0;
  std::size_t hole_count = 0;
  double hole_pixel_fraction = 0.0;
};

}  // namespace dectlab
