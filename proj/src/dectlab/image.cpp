#include "dectlab/image.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "dectlab/error.hpp"

namespace dectlab {

namespace {

bool pixel_ok(const Fractions& f, double tol) {
  auto in_unit = [tol](double v) { return v >= -tol && v <= 1.0 + tol; };
  return in_unit(f.water) && in_unit(f.bone) && in_unit(f.iodine) &&
         std::abs(f.sum() - 1.0) <= tol;
}

}  // namespace

void FractionMap::validate(double tolerance) const {
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      const Fractions& f = at(x, y);
      if (!pixel_ok(f, tolerance)) {
        std::ostringstream os;
        os.precision(17);
        os << "pixel (" << x << ", " << y << ") violates fraction invariants: ("
           << f.water << ", " << f.bone << ", " << f.iodine << ")";
        throw Error(Errc::out_of_range, "fractions", os.str());
      }
    }
  }
}

bool FractionMap::is_valid(double tolerance) const noexcept {
  for (const Fractions& f : values()) {
    if (!pixel_ok(f, tolerance)) return false;
  }
  return true;
}

std::string shape_string(int width, int height) {
  return std::to_string(width) + "x" + std::to_string(height);
}

void MonoImage::check_finite() const {
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      if (!std::isfinite(at(x, y))) {
        throw Error(Errc::numeric, "image",
                    "non-finite value at pixel (" + std::to_string(x) + ", " + std::to_string(y) + ")");
      }
    }
  }
}

std::size_t count_set(const Mask& mask) noexcept {
  std::size_t n = 0;
  for (auto v : mask.values()) n += (v != 0);
  return n;
}

}  // namespace dectlab
