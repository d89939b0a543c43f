#include "dectlab/decomp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "dectlab/error.hpp"

namespace dectlab {

Fractions decompose_pixel(double mu_low, double mu_high, const AttenuationTable& table) noexcept {
  const Mat3& inv = table.inverse();
  return {
      inv[0][0] * mu_low + inv[0][1] * mu_high + inv[0][2],
      inv[1][0] * mu_low + inv[1][1] * mu_high + inv[1][2],
      inv[2][0] * mu_low + inv[2][1] * mu_high + inv[2][2],
  };
}

Fractions clamp_renormalize(const Fractions& raw) noexcept {
  Fractions f{std::max(raw.water, 0.0), std::max(raw.bone, 0.0), std::max(raw.iodine, 0.0)};
  // The raw triple sums to one, so after dropping negatives the sum is >= 1.
  const double s = f.sum();
  if (s > 0.0 && s != 1.0) {
    f.water /= s;
    f.bone /= s;
    f.iodine /= s;
  }
  return f;
}

Decomposition decompose_image(const MonoImage& low, const MonoImage& high,
                              const AttenuationTable& table, ClampPolicy policy, double tolerance) {
  if (!low.same_shape(high)) {
    throw Error(Errc::shape_mismatch, "decomp",
                "low-energy image is " + shape_string(low.width(), low.height()) +
                    " but high-energy image is " + shape_string(high.width(), high.height()));
  }
  if (low.energy_kev != table.low_kev() || high.energy_kev != table.high_kev()) {
    std::ostringstream os;
    os << "expected energies " << table.low_kev() << "/" << table.high_kev() << " keV, got "
       << low.energy_kev << "/" << high.energy_kev << " keV";
    throw Error(Errc::invalid_argument, "decomp", os.str());
  }

  Decomposition out{FractionMap(low.width(), low.height()), {}};
  const Vec3& ml = table.mu_low();
  const Vec3& mh = table.mu_high();
  auto outside = [tolerance](double v) { return v < -tolerance || v > 1.0 + tolerance; };

  for (std::size_t i = 0; i < low.size(); ++i) {
    const Fractions raw = decompose_pixel(low[i], high[i], table);

    const double r0 = std::abs(raw.water * ml[0] + raw.bone * ml[1] + raw.iodine * ml[2] - low[i]);
    const double r1 = std::abs(raw.water * mh[0] + raw.bone * mh[1] + raw.iodine * mh[2] - high[i]);
    const double r2 = std::abs(raw.sum() - 1.0);
    out.report.max_residual = std::max({out.report.max_residual, r0, r1, r2});

    if (outside(raw.water) || outside(raw.bone) || outside(raw.iodine)) ++out.report.out_of_range;

    if (policy == ClampPolicy::raw) {
      out.map[i] = raw;
      continue;
    }
    const Fractions clamped = clamp_renormalize(raw);
    if (std::abs(clamped.water - raw.water) > tolerance ||
        std::abs(clamped.bone - raw.bone) > tolerance ||
        std::abs(clamped.iodine - raw.iodine) > tolerance) {
      ++out.report.clamped;
    }
    out.map[i] = clamped;
  }
  return out;
}

const char* to_string(ClampPolicy policy) noexcept {
  return policy == ClampPolicy::raw ? "raw" : "clamp-renormalize";
}

ClampPolicy parse_clamp_policy(const std::string& name) {
  if (name == "clamp-renormalize") return ClampPolicy::clamp_renormalize;
  if (name == "raw") return ClampPolicy::raw;
  throw Error(Errc::invalid_argument, "decomp", "unknown clamp policy '" + name + "'");
}

}  // namespace dectlab
