#pragma once

#include <cstdint>
#include <vector>

#include "dectlab/attenuation.hpp"
#include "dectlab/image.hpp"

namespace dectlab {

/// Circular contrast-filled vessel. Pixel (x, y) is inside when its centre
/// lies within `radius` of (cx, cy).
struct VesselSpec {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 1.0;
  /// Iodine fraction at the reference (full) contrast dose.
  double iodine_fraction = 0.05;
};

struct BoneSpec {
  enum class Shape { rect, annulus };
  Shape shape = Shape::rect;
  // rect: inclusive pixel-centre bounds
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  // annulus
  double cx = 0.0, cy = 0.0, r_inner = 0.0, r_outer = 0.0;
  double bone_fraction = 0.5;
};

struct PhantomSpec {
  int width = 0;
  int height = 0;
  std::vector<BoneSpec> bones;
  std::vector<VesselSpec> vessels;
  /// Gaussian sigma (cm^-1) applied when the phantom is composed into images.
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Throws Errc::invalid_argument / out_of_range naming the offending descriptor.
void validate(const PhantomSpec& spec);

/// Paints bones, then vessels (vessels win overlaps). Unassigned fraction is water.
FractionMap generate_phantom(const PhantomSpec& spec);

struct RandomPhantomOptions {
  int min_vessels = 2;
  int max_vessels = 4;
  double min_radius = 2.5;
  double max_radius = 5.0;
  double iodine_fraction = 0.05;
  double min_bone_fraction = 0.3;
  double max_bone_fraction = 0.6;
};

/// Head-slice-like spec: a skull annulus, an optional vertebra block and a few
/// vessels, with all geometry drawn from `seed`.
PhantomSpec random_phantom_spec(int width, int height, std::uint64_t seed,
                                const RandomPhantomOptions& options = {});

/// Forward model mu(E) = sum_i f_i mu_i(E), plus optional i.i.d. Gaussian noise.
MonoImage compose(const FractionMap& map, const AttenuationTable& table, double energy_kev,
                  double noise_sigma, std::uint64_t seed, double dose_cc = 80.0,
                  double reference_cc = 80.0);

/// True exactly where the iodine fraction is strictly above `threshold`.
Mask vessel_mask(const FractionMap& map, double threshold);

}  // namespace dectlab
