#pragma once

#include <cstddef>

#include "dectlab/attenuation.hpp"
#include "dectlab/image.hpp"

namespace dectlab {

enum class ClampPolicy {
  /// Negative fractions set to zero, then the triple renormalized to unit sum.
  clamp_renormalize,
  /// Exact solve, no projection. The resulting map may violate [0, 1] bounds.
  raw,
};

struct DecompReport {
  /// Pixels where clamping moved a component by more than the tolerance.
  std::size_t clamped = 0;
  /// Pixels with any raw fraction outside [-tol, 1 + tol].
  std::size_t out_of_range = 0;
  /// Largest absolute residual of the raw solve over the three equations.
  double max_residual = 0.0;
};

struct Decomposition {
  FractionMap map;
  DecompReport report;
};

/// Exact solution of the two-energy, three-material system for one pixel.
Fractions decompose_pixel(double mu_low, double mu_high, const AttenuationTable& table) noexcept;

/// Projects a raw triple onto the simplex per ClampPolicy::clamp_renormalize.
Fractions clamp_renormalize(const Fractions& raw) noexcept;

Decomposition decompose_image(const MonoImage& low, const MonoImage& high,
                              const AttenuationTable& table,
                              ClampPolicy policy = ClampPolicy::clamp_renormalize,
                              double tolerance = 1e-9);

const char* to_string(ClampPolicy policy) noexcept;
/// Accepts "clamp-renormalize" or "raw".
ClampPolicy parse_clamp_policy(const std::string& name);

}  // namespace dectlab
