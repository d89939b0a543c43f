#pragma once

#include <array>

#include "dectlab/image.hpp"

namespace dectlab {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

/// Linear attenuation coefficients (cm^-1) of water, bone and iohexol at a
/// low and a high monoenergetic level, together with the precomputed inverse
/// of the three-material system
///
///   [ mu_w(E_L)  mu_b(E_L)  mu_i(E_L) ]
///   [ mu_w(E_H)  mu_b(E_H)  mu_i(E_H) ]
///   [    1          1          1      ]
class AttenuationTable {
 public:
  static constexpr double kDefaultDeterminantFloor = 1e-6;

  /// Water 0.184/0.167, bone 0.428/0.342, iohexol 3.784/2.066 cm^-1 at 80/110 keV.
  static AttenuationTable defaults();

  AttenuationTable(double low_kev, const Vec3& mu_low, double high_kev, const Vec3& mu_high,
                   double determinant_floor = kDefaultDeterminantFloor);

  double low_kev() const noexcept { return low_kev_; }
  double high_kev() const noexcept { return high_kev_; }
  const Vec3& mu_low() const noexcept { return mu_low_; }
  const Vec3& mu_high() const noexcept { return mu_high_; }

  bool has_energy(double kev) const noexcept { return kev == low_kev_ || kev == high_kev_; }
  /// Coefficients (water, bone, iodine) at the given energy; throws if absent.
  const Vec3& mu_at(double kev) const;

  double attenuation(const Fractions& f, double kev) const {
    const Vec3& mu = mu_at(kev);
    return f.water * mu[0] + f.bone * mu[1] + f.iodine * mu[2];
  }

  const Mat3& system() const noexcept { return system_; }
  const Mat3& inverse() const noexcept { return inverse_; }
  double determinant() const noexcept { return determinant_; }

 private:
  double low_kev_;
  double high_kev_;
  Vec3 mu_low_;
  Vec3 mu_high_;
  Mat3 system_{};
  Mat3 inverse_{};
  double determinant_ = 0.0;
};

}  // namespace dectlab
