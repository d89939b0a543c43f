#include "dectlab/attenuation.hpp"

#include <cmath>
#include <sstream>

#include "dectlab/error.hpp"

namespace dectlab {

AttenuationTable AttenuationTable::defaults() {
  return AttenuationTable(80.0, {0.184, 0.428, 3.784}, 110.0, {0.167, 0.342, 2.066});
}

AttenuationTable::AttenuationTable(double low_kev, const Vec3& mu_low, double high_kev,
                                   const Vec3& mu_high, double determinant_floor)
    : low_kev_(low_kev), high_kev_(high_kev), mu_low_(mu_low), mu_high_(mu_high) {
  if (!(low_kev > 0.0) || !(high_kev > 0.0) || low_kev == high_kev) {
    throw Error(Errc::invalid_argument, "decomp", "energies must be positive and distinct");
  }
  for (int i = 0; i < 3; ++i) {
    if (!(mu_low[i] > 0.0) || !(mu_high[i] > 0.0) || !std::isfinite(mu_low[i]) ||
        !std::isfinite(mu_high[i])) {
      throw Error(Errc::invalid_argument, "decomp", "attenuation coefficients must be positive and finite");
    }
  }
  system_ = {mu_low, mu_high, Vec3{1.0, 1.0, 1.0}};
  const Mat3& m = system_;

  // Cofactor expansion; inverse = adj(m) / det(m).
  const double c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
  const double c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
  const double c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
  determinant_ = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
  if (!(std::abs(determinant_) >= determinant_floor)) {
    std::ostringstream os;
    os << "material system is singular: |det| = " << std::abs(determinant_) << " < floor "
       << determinant_floor;
    throw Error(Errc::invalid_argument, "decomp", os.str());
  }
  const double inv_det = 1.0 / determinant_;
  inverse_[0][0] = c00 * inv_det;
  inverse_[1][0] = c01 * inv_det;
  inverse_[2][0] = c02 * inv_det;
  inverse_[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
  inverse_[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
  inverse_[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
  inverse_[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
  inverse_[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
  inverse_[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
}

const Vec3& AttenuationTable::mu_at(double kev) const {
  if (kev == low_kev_) return mu_low_;
  if (kev == high_kev_) return mu_high_;
  std::ostringstream os;
  os << "energy " << kev << " keV is not in the attenuation table (have " << low_kev_ << " and "
     << high_kev_ << " keV)";
  throw Error(Errc::invalid_argument, "decomp", os.str());
}

}  // namespace dectlab
