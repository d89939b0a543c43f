#include "dectlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dectlab/error.hpp"

namespace dectlab {

namespace {

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(Errc::shape_mismatch, "metrics",
                std::string(what) + ": shapes " + shape_string(a.width(), a.height()) + " and " +
                    shape_string(b.width(), b.height()) + " differ");
  }
}

}  // namespace

double mean_squared_error(const Grid<double>& test, const Grid<double>& reference) {
  require_same_shape(test, reference, "mse");
  if (test.size() == 0) throw Error(Errc::invalid_argument, "metrics", "mse of empty images");
  double acc = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double d = test[i] - reference[i];
    acc += d * d;
  }
  return acc / static_cast<double>(test.size());
}

double psnr(const Grid<double>& test, const Grid<double>& reference, double data_range) {
  if (!(data_range > 0.0)) throw Error(Errc::invalid_argument, "metrics", "data range must be > 0");
  const double mse = mean_squared_error(test, reference);
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(data_range * data_range / mse));
}

double ssim(const Grid<double>& test, const Grid<double>& reference, double data_range, int window, double k1,
            double k2) {
  require_same_shape(test, reference, "ssim");
  if (window < 3 || window % 2 == 0) {
    throw Error(Errc::invalid_argument, "metrics", "ssim window must be odd and >= 3");
  }
  if (test.width() < window || test.height() < window) {
    throw Error(Errc::shape_mismatch, "metrics",
                "image " + shape_string(test.width(), test.height()) + " is smaller than the " +
                    std::to_string(window) + "x" + std::to_string(window) + " ssim window");
  }
  if (!(data_range > 0.0)) throw Error(Errc::invalid_argument, "metrics", "data range must be > 0");
  const double c1 = (k1 * data_range) * (k1 * data_range);
  const double c2 = (k2 * data_range) * (k2 * data_range);
  const double n = static_cast<double>(window * window);

  double total = 0.0;
  std::size_t count = 0;
  for (int oy = 0; oy + window <= test.height(); ++oy) {
    for (int ox = 0; ox + window <= test.width(); ++ox) {
      double sx = 0, sy = 0;
      for (int y = oy; y < oy + window; ++y) {
        for (int x = ox; x < ox + window; ++x) {
          sx += test.at(x, y);
          sy += reference.at(x, y);
        }
      }
      const double mx = sx / n;
      const double my = sy / n;
      double vx = 0, vy = 0, cxy = 0;
      for (int y = oy; y < oy + window; ++y) {
        for (int x = ox; x < ox + window; ++x) {
          const double dx = test.at(x, y) - mx;
          const double dy = reference.at(x, y) - my;
          vx += dx * dx;
          vy += dy * dy;
          cxy += dx * dy;
        }
      }
      vx /= n;
      vy /= n;
      cxy /= n;
      total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double masked_mae(const Grid<double>& test, const Grid<double>& reference, const Mask& mask) {
  require_same_shape(test, reference, "masked mae");
  require_same_shape(test, mask, "masked mae");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!mask[i]) continue;
    acc += std::abs(test[i] - reference[i]);
    ++n;
  }
  if (n == 0) throw Error(Errc::invalid_argument, "metrics", "mask is empty");
  return acc / static_cast<double>(n);
}

std::size_t count_components(const Mask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<int> stack;
  std::size_t components = 0;
  for (int i = 0; i < static_cast<int>(mask.size()); ++i) {
    if (!mask[static_cast<std::size_t>(i)] || seen[static_cast<std::size_t>(i)]) continue;
    ++components;
    seen[static_cast<std::size_t>(i)] = 1;
    stack.push_back(i);
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int x = p % w;
      const int y = p / w;
      const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& q : nbr) {
        if (q[0] < 0 || q[0] >= w || q[1] < 0 || q[1] >= h) continue;
        const auto j = static_cast<std::size_t>(q[1] * w + q[0]);
        if (mask[j] && !seen[j]) {
          seen[j] = 1;
          stack.push_back(static_cast<int>(j));
        }
      }
    }
  }
  return components;
}

HoleStats hole_metric(const MonoImage& low, const MonoImage& high, const AttenuationTable& table, const Mask& mask,
                      double fraction_threshold, ClampPolicy policy) {
  require_same_shape(low, mask, "hole metric");
  const std::size_t mask_pixels = count_set(mask);
  if (mask_pixels == 0) {
    throw Error(Errc::invalid_argument, "metrics", "vessel mask is empty; hole fraction is undefined");
  }
  const Decomposition dec = decompose_image(low, high, table, policy);
  Mask holes(mask.width(), mask.height(), 0);
  HoleStats stats;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] && dec.map[i].iodine <= fraction_threshold) {
      holes[i] = 1;
      ++stats.hole_pixels;
    }
  }
  stats.hole_count = count_components(holes);
  stats.hole_pixel_fraction = static_cast<double>(stats.hole_pixels) / static_cast<double>(mask_pixels);
  return stats;
}

}  // namespace dectlab
