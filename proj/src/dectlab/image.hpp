#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dectlab {

/// Row-major 2D array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& at(int x, int y) { return data_[index(x, y)]; }
  const T& at(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  bool same_shape(const Grid& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Per-pixel material fractions: water, bone, iodinated contrast.
struct Fractions {
  double water = 1.0;
  double bone = 0.0;
  double iodine = 0.0;

  double sum() const noexcept { return water + bone + iodine; }
  friend bool operator==(const Fractions&, const Fractions&) = default;
};

/// Per-pixel (water, bone, iodine) triples. Valid maps have every component in
/// [0, 1] and unit sum; decomposition with the raw policy may produce maps that
/// are not valid, so the invariant is checked by validate() rather than enforced.
class FractionMap : public Grid<Fractions> {
 public:
  using Grid<Fractions>::Grid;

  /// Throws Errc::out_of_range naming the first offending pixel.
  void validate(double tolerance = 1e-9) const;
  bool is_valid(double tolerance = 1e-9) const noexcept;
};

std::string shape_string(int width, int height);

/// Monoenergetic attenuation image in cm^-1 with acquisition metadata.
class MonoImage : public Grid<double> {
 public:
  MonoImage() = default;
  MonoImage(int width, int height, double energy_kev, double dose_cc, double reference_cc,
            double fill = 0.0)
      : Grid<double>(width, height, fill),
        energy_kev(energy_kev), dose_cc(dose_cc), reference_cc(reference_cc) {}

  double energy_kev = 0.0;
  double dose_cc = 0.0;
  double reference_cc = 0.0;

  double dose_scale() const noexcept { return dose_cc / reference_cc; }
  /// Throws Errc::numeric naming the first non-finite pixel.
  void check_finite() const;
};

using Mask = Grid<std::uint8_t>;

std::size_t count_set(const Mask& mask) noexcept;

}  // namespace dectlab
