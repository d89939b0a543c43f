#include "dectlab/dose.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "dectlab/error.hpp"
#include "dectlab/phantom.hpp"
#include "dectlab/seed.hpp"

namespace dectlab {

namespace {

// Absorbs round-off in the water update, e.g. 1 - 0.95 - 0.05 landing at -1e-17.
constexpr double kSlack = 1e-12;

[[noreturn]] void out_of_range_pixel(const FractionMap& map, std::size_t i, const Fractions& f) {
  const int x = static_cast<int>(i % static_cast<std::size_t>(map.width()));
  const int y = static_cast<int>(i / static_cast<std::size_t>(map.width()));
  std::ostringstream os;
  os.precision(17);
  os << "rescaled fractions out of [0, 1] at pixel (" << x << ", " << y << "): (" << f.water << ", "
     << f.bone << ", " << f.iodine << ")";
  throw Error(Errc::out_of_range, "dose", os.str());
}

bool within(double v) { return v >= -kSlack && v <= 1.0 + kSlack; }

double snap(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

DoseLevel::DoseLevel(double cc, double reference_cc) : cc_(cc), reference_cc_(reference_cc) {
  if (!(cc > 0.0) || !std::isfinite(cc)) {
    throw Error(Errc::invalid_argument, "dose", "dose must be > 0 cc");
  }
  if (!(reference_cc > 0.0) || !std::isfinite(reference_cc)) {
    throw Error(Errc::invalid_argument, "dose", "reference dose must be > 0 cc");
  }
}

FractionMap rescale_fractions(const FractionMap& map, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(Errc::invalid_argument, "dose", "dose scale must be positive and finite");
  }
  FractionMap out(map.width(), map.height());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const Fractions& f = map[i];
    Fractions g{f.water + (f.iodine - scale * f.iodine), f.bone, scale * f.iodine};
    if (!within(g.water) || !within(g.iodine) || !within(g.bone)) out_of_range_pixel(map, i, g);
    g.water = snap(g.water);
    out[i] = g;
  }
  return out;
}

ImagePair simulate_low_dose(const FractionMap& map, const AttenuationTable& table,
                            const DoseLevel& level, double noise_sigma, std::uint64_t seed) {
  const FractionMap scaled = rescale_dose(map, level);
  return {
      compose(scaled, table, table.low_kev(), noise_sigma, derive_seed(seed, 0), level.cc(),
              level.reference_cc()),
      compose(scaled, table, table.high_kev(), noise_sigma, derive_seed(seed, 1), level.cc(),
              level.reference_cc()),
  };
}

const char* to_string(OverflowPolicy policy) noexcept {
  return policy == OverflowPolicy::saturate ? "saturate" : "error";
}

OverflowPolicy parse_overflow_policy(const std::string& name) {
  if (name == "error") return OverflowPolicy::error;
  if (name == "saturate") return OverflowPolicy::saturate;
  throw Error(Errc::invalid_argument, "dose", "unknown overflow policy '" + name + "'");
}

MdeResult mde_enhance(const MonoImage& low, const MonoImage& high, const AttenuationTable& table,
                      const DoseLevel& level, ClampPolicy clamp, OverflowPolicy overflow) {
  Decomposition dec = decompose_image(low, high, table, clamp);
  MdeResult result;
  result.decomposition = dec.report;

  const double gain = 1.0 / level.scale();
  FractionMap amplified;
  if (overflow == OverflowPolicy::error) {
    amplified = rescale_fractions(dec.map, gain);
  } else {
    amplified = FractionMap(dec.map.width(), dec.map.height());
    for (std::size_t i = 0; i < dec.map.size(); ++i) {
      const Fractions& f = dec.map[i];
      const double wanted = gain * f.iodine;
      Fractions g{f.water + (f.iodine - wanted), f.bone, wanted};
      bool touched = false;
      if (g.iodine > 1.0 || g.iodine < 0.0) {
        g.iodine = snap(g.iodine);
        g.water = f.water + (f.iodine - g.iodine);
        touched = true;
      }
      if (g.water < 0.0) {
        g.bone += g.water;
        g.water = 0.0;
        touched = true;
      }
      if (g.bone < 0.0) {
        g.bone = 0.0;
        touched = true;
      }
      if (!within(g.water) || !within(g.bone) || !within(g.iodine)) {
        out_of_range_pixel(dec.map, i, g);
      }
      result.saturated += touched;
      amplified[i] = g;
    }
  }

  const double ref = level.reference_cc();
  result.images.low = compose(amplified, table, table.low_kev(), 0.0, 0, ref, ref);
  result.images.high = compose(amplified, table, table.high_kev(), 0.0, 0, ref, ref);
  return result;
}

}  // namespace dectlab
