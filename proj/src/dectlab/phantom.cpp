#include "dectlab/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>

#include "dectlab/error.hpp"

namespace dectlab {

namespace {

[[noreturn]] void reject(Errc code, const std::string& what) {
  throw Error(code, "phantom", what);
}

bool circle_fits(double cx, double cy, double r, int w, int h) {
  return cx - r >= 0.0 && cy - r >= 0.0 && cx + r <= w - 1 && cy + r <= h - 1;
}

double dist2(int x, int y, double cx, double cy) {
  const double dx = x - cx;
  const double dy = y - cy;
  return dx * dx + dy * dy;
}

}  // namespace

void validate(const PhantomSpec& spec) {
  if (spec.width <= 0 || spec.height <= 0) {
    reject(Errc::invalid_argument, "grid size must be positive, got " + shape_string(spec.width, spec.height));
  }
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    reject(Errc::invalid_argument, "noise sigma must be >= 0");
  }
  for (std::size_t i = 0; i < spec.vessels.size(); ++i) {
    const VesselSpec& v = spec.vessels[i];
    const std::string tag = "vessel " + std::to_string(i);
    if (!(v.radius > 0.0)) reject(Errc::invalid_argument, tag + ": radius must be > 0");
    if (!(v.iodine_fraction > 0.0 && v.iodine_fraction <= 1.0)) {
      reject(Errc::invalid_argument, tag + ": iodine fraction must be in (0, 1]");
    }
    if (!circle_fits(v.cx, v.cy, v.radius, spec.width, spec.height)) {
      reject(Errc::out_of_range, tag + " does not fit inside the " + shape_string(spec.width, spec.height) + " grid");
    }
  }
  for (std::size_t i = 0; i < spec.bones.size(); ++i) {
    const BoneSpec& b = spec.bones[i];
    const std::string tag = "bone " + std::to_string(i);
    if (!(b.bone_fraction > 0.0 && b.bone_fraction <= 1.0)) {
      reject(Errc::invalid_argument, tag + ": bone fraction must be in (0, 1]");
    }
    if (b.shape == BoneSpec::Shape::rect) {
      if (!(b.x0 <= b.x1 && b.y0 <= b.y1)) reject(Errc::invalid_argument, tag + ": rectangle corners out of order");
      if (b.x0 < 0.0 || b.y0 < 0.0 || b.x1 > spec.width - 1 || b.y1 > spec.height - 1) {
        reject(Errc::out_of_range, tag + " does not fit inside the " + shape_string(spec.width, spec.height) + " grid");
      }
    } else {
      if (!(b.r_inner >= 0.0 && b.r_outer > b.r_inner)) {
        reject(Errc::invalid_argument, tag + ": annulus needs 0 <= r_inner < r_outer");
      }
      if (!circle_fits(b.cx, b.cy, b.r_outer, spec.width, spec.height)) {
        reject(Errc::out_of_range, tag + " does not fit inside the " + shape_string(spec.width, spec.height) + " grid");
      }
    }
  }
}

FractionMap generate_phantom(const PhantomSpec& spec) {
  validate(spec);
  FractionMap map(spec.width, spec.height, Fractions{1.0, 0.0, 0.0});

  for (const BoneSpec& b : spec.bones) {
    const Fractions f{1.0 - b.bone_fraction, b.bone_fraction, 0.0};
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        bool inside = false;
        if (b.shape == BoneSpec::Shape::rect) {
          inside = x >= b.x0 && x <= b.x1 && y >= b.y0 && y <= b.y1;
        } else {
          const double d2 = dist2(x, y, b.cx, b.cy);
          inside = d2 >= b.r_inner * b.r_inner && d2 <= b.r_outer * b.r_outer;
        }
        if (inside) map.at(x, y) = f;
      }
    }
  }

  for (const VesselSpec& v : spec.vessels) {
    const Fractions f{1.0 - v.iodine_fraction, 0.0, v.iodine_fraction};
    const double r2 = v.radius * v.radius;
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        if (dist2(x, y, v.cx, v.cy) <= r2) map.at(x, y) = f;
      }
    }
  }
  return map;
}

PhantomSpec random_phantom_spec(int width, int height, std::uint64_t seed,
                                const RandomPhantomOptions& opt) {
  if (width < 16 || height < 16) {
    reject(Errc::invalid_argument, "random phantoms need at least a 16x16 grid");
  }
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  PhantomSpec spec;
  spec.width = width;
  spec.height = height;
  spec.seed = seed;

  const double cx = (width - 1) / 2.0;
  const double cy = (height - 1) / 2.0;
  const double half = std::min(cx, cy);

  BoneSpec skull;
  skull.shape = BoneSpec::Shape::annulus;
  skull.cx = cx + uniform(-1.0, 1.0);
  skull.cy = cy + uniform(-1.0, 1.0);
  skull.r_outer = half - 1.5;
  skull.r_inner = skull.r_outer - uniform(2.0, 4.0);
  skull.bone_fraction = uniform(opt.min_bone_fraction, opt.max_bone_fraction);
  spec.bones.push_back(skull);

  const double inner = skull.r_inner - 1.0;
  if (uniform(0.0, 1.0) < 0.5) {
    BoneSpec block;
    block.shape = BoneSpec::Shape::rect;
    const double bw = uniform(0.15, 0.25) * inner;
    const double bh = uniform(0.15, 0.25) * inner;
    const double bx = cx + uniform(-0.3, 0.3) * inner;
    const double by = cy + uniform(0.1, 0.4) * inner;
    block.x0 = std::round(bx - bw);
    block.x1 = std::round(bx + bw);
    block.y0 = std::round(by - bh);
    block.y1 = std::round(by + bh);
    block.bone_fraction = uniform(opt.min_bone_fraction, opt.max_bone_fraction);
    spec.bones.push_back(block);
  }

  const int n_vessels = std::uniform_int_distribution<int>(opt.min_vessels, opt.max_vessels)(rng);
  for (int i = 0; i < n_vessels; ++i) {
    VesselSpec v;
    v.radius = uniform(opt.min_radius, opt.max_radius);
    const double reach = std::max(0.0, inner - v.radius);
    const double angle = uniform(0.0, 2.0 * 3.14159265358979323846);
    const double dist = reach * std::sqrt(uniform(0.0, 1.0));
    v.cx = cx + dist * std::cos(angle);
    v.cy = cy + dist * std::sin(angle);
    v.iodine_fraction = opt.iodine_fraction;
    spec.vessels.push_back(v);
  }
  validate(spec);
  return spec;
}

MonoImage compose(const FractionMap& map, const AttenuationTable& table, double energy_kev,
                  double noise_sigma, std::uint64_t seed, double dose_cc, double reference_cc) {
  if (!table.has_energy(energy_kev)) {
    std::ostringstream os;
    os << "energy " << energy_kev << " keV is not in the attenuation table";
    reject(Errc::invalid_argument, os.str());
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    reject(Errc::invalid_argument, "noise sigma must be >= 0");
  }
  MonoImage img(map.width(), map.height(), energy_kev, dose_cc, reference_cc);
  const Vec3& mu = table.mu_at(energy_kev);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const Fractions& f = map[i];
    img[i] = f.water * mu[0] + f.bone * mu[1] + f.iodine * mu[2];
  }
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (double& v : img.values()) v += noise(rng);
  }
  return img;
}

Mask vessel_mask(const FractionMap& map, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    reject(Errc::invalid_argument, "mask threshold must be in (0, 1)");
  }
  Mask mask(map.width(), map.height(), 0);
  for (std::size_t i = 0; i < map.size(); ++i) mask[i] = map[i].iodine > threshold ? 1 : 0;
  return mask;
}

}  // namespace dectlab
