#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "dectlab/attenuation.hpp"
#include "dectlab/decomp.hpp"
#include "dectlab/image.hpp"

namespace dectlab {

/// Contrast volume relative to the full-dose reference.
class DoseLevel {
 public:
  DoseLevel(double cc, double reference_cc = 80.0);

  double cc() const noexcept { return cc_; }
  double reference_cc() const noexcept { return reference_cc_; }
  double scale() const noexcept { return cc_ / reference_cc_; }

 private:
  double cc_;
  double reference_cc_;
};

inline constexpr double kReferenceDoseCc = 80.0;
inline constexpr std::array<double, 8> kDefaultDoseLadderCc{10, 20, 30, 40, 50, 60, 70, 80};

/// Scales the iodine fraction by `scale`; water absorbs (or donates) the
/// difference and bone is untouched. Throws Errc::out_of_range naming the
/// pixel when a result leaves [0, 1].
FractionMap rescale_fractions(const FractionMap& map, double scale);

inline FractionMap rescale_dose(const FractionMap& map, const DoseLevel& level) {
  return rescale_fractions(map, level.scale());
}

struct ImagePair {
  MonoImage low;
  MonoImage high;
};

/// Rescale then compose both energies. Noise seeds for the two energies are
/// derived from `seed` with stage indices 0 (low) and 1 (high).
ImagePair simulate_low_dose(const FractionMap& map, const AttenuationTable& table,
                            const DoseLevel& level, double noise_sigma, std::uint64_t seed);

/// What the MDE baseline does when the amplified fractions leave the simplex.
enum class OverflowPolicy {
  /// Reject, reporting the pixel.
  error,
  /// Cap iodine to [0, 1]; water absorbs the change and bone donates once
  /// water is exhausted.
  saturate,
};

const char* to_string(OverflowPolicy policy) noexcept;
/// Accepts "error" or "saturate".
OverflowPolicy parse_overflow_policy(const std::string& name);

struct MdeResult {
  ImagePair images;
  DecompReport decomposition;
  std::size_t saturated = 0;
};

/// Material-decomposition enhancement: decompose the low-dose pair, amplify
/// the iodine fraction by 1/scale, recompose both energies without noise.
/// Outputs carry dose metadata equal to the reference dose.
MdeResult mde_enhance(const MonoImage& low, const MonoImage& high, const AttenuationTable& table,
                      const DoseLevel& level, ClampPolicy clamp = ClampPolicy::clamp_renormalize,
                      OverflowPolicy overflow = OverflowPolicy::error);

}  // namespace dectlab
