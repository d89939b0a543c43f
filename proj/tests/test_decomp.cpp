#include <random>

#include "doctest.h"
#include "dectlab/attenuation.hpp"
#include "dectlab/decomp.hpp"
#include "dectlab/error.hpp"
#include "dectlab/phantom.hpp"

using namespace dectlab;

TEST_SUITE("decomp") {

TEST_CASE("default table") {
  const auto t = AttenuationTable::defaults();
  CHECK(t.low_kev() == 80.0);
  CHECK(t.high_kev() == 110.0);
  CHECK(t.determinant() == doctest::Approx(-0.166644).epsilon(1e-9));
}

TEST_CASE("table validation") {
  CHECK_THROWS_AS(AttenuationTable(80, {0.184, -0.428, 3.784}, 110, {0.167, 0.342, 2.066}), Error);
  // Bone column equal to water: singular.
  CHECK_THROWS_AS(AttenuationTable(80, {0.184, 0.184, 3.784}, 110, {0.167, 0.167, 2.066}), Error);
  CHECK_THROWS_AS(AttenuationTable(80, {0.184, 0.428, 3.784}, 80, {0.167, 0.342, 2.066}), Error);
}

TEST_CASE("pixel examples") {
  const auto t = AttenuationTable::defaults();
  auto near = [](const Fractions& f, double a, double b, double c) {
    CHECK(std::abs(f.water - a) < 1e-9);
    CHECK(std::abs(f.bone - b) < 1e-9);
    CHECK(std::abs(f.iodine - c) < 1e-9);
  };
  near(decompose_pixel(0.184, 0.167, t), 1, 0, 0);
  near(decompose_pixel(3.784, 2.066, t), 0, 0, 1);
  near(decompose_pixel(0.428, 0.342, t), 0, 1, 0);
  near(decompose_pixel(0.364, 0.26195, t), 0.95, 0, 0.05);
}

TEST_CASE("raw solve is affine in the pixel pair") {
  const auto t = AttenuationTable::defaults();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int i = 0; i < 500; ++i) {
    const double l1 = u(rng), h1 = u(rng), l2 = u(rng), h2 = u(rng), a = u(rng) / 4.0;
    const Fractions p = decompose_pixel(a * l1 + (1 - a) * l2, a * h1 + (1 - a) * h2, t);
    const Fractions p1 = decompose_pixel(l1, h1, t), p2 = decompose_pixel(l2, h2, t);
    CHECK(std::abs(p.water - (a * p1.water + (1 - a) * p2.water)) < 1e-9);
    CHECK(std::abs(p.bone - (a * p1.bone + (1 - a) * p2.bone)) < 1e-9);
    CHECK(std::abs(p.iodine - (a * p1.iodine + (1 - a) * p2.iodine)) < 1e-9);
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("clamp-renormalize") {
  const Fractions f = clamp_renormalize({1.2, -0.1, -0.1});
  CHECK(f.water == 1.0);
  CHECK(f.bone == 0.0);
  CHECK(f.iodine == 0.0);
  const Fractions g = clamp_renormalize({0.6, 0.6, -0.2});
  CHECK(g.water == doctest::Approx(0.5));
  CHECK(g.bone == doctest::Approx(0.5));
}

TEST_CASE("1x1 image round trip") {
  const auto t = AttenuationTable::defaults();
  MonoImage lo(1, 1, 80, 80, 80, 0.184), hi(1, 1, 110, 80, 80, 0.167);
  const Decomposition d = decompose_image(lo, hi, t);
  CHECK(d.report.clamped == 0);
  CHECK(std::abs(d.map[0].water - 1.0) < 1e-12);
}

TEST_CASE("image round trip on random phantoms") {
  const auto t = AttenuationTable::defaults();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FractionMap m = generate_phantom(random_phantom_spec(32, 32, seed));
    const Decomposition d = decompose_image(compose(m, t, 80, 0, 0), compose(m, t, 110, 0, 0), t);
    CHECK(d.report.clamped == 0);
    double worst = 0;
    for (std::size_t k = 0; k < m.size(); ++k) {
      worst = std::max({worst, std::abs(d.map[k].water - m[k].water), std::abs(d.map[k].bone - m[k].bone),
                        std::abs(d.map[k].iodine - m[k].iodine)});
    }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("noisy faint vessel forces clamping") {
  const auto t = AttenuationTable::defaults();
  PhantomSpec s;
  s.width = s.height = 48;
  s.vessels.push_back({24, 24, 10, 0.00625});
  const FractionMap m = generate_phantom(s);
  const Decomposition d = decompose_image(compose(m, t, 80, 0.02, 1), compose(m, t, 110, 0.02, 2), t);
  CHECK(d.report.clamped > 0);
  CHECK(d.map.is_valid());
  const Decomposition raw = decompose_image(compose(m, t, 80, 0.02, 1), compose(m, t, 110, 0.02, 2), t,
                                            ClampPolicy::raw);
  CHECK(raw.report.clamped == 0);
  CHECK(raw.report.out_of_range > 0);
}

TEST_CASE("shape and energy mismatches") {
  const auto t = AttenuationTable::defaults();
  MonoImage lo(4, 4, 80, 80, 80), hi(4, 3, 110, 80, 80);
  try {
    decompose_image(lo, hi, t);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::shape_mismatch);
    CHECK(std::string(e.what()).find("4x3") != std::string::npos);
  }
  MonoImage swapped(4, 4, 110, 80, 80);
  CHECK_THROWS_AS(decompose_image(swapped, swapped, t), Error);
}

TEST_CASE("policy names") {
  CHECK(parse_clamp_policy("raw") == ClampPolicy::raw);
  CHECK(std::string(to_string(ClampPolicy::clamp_renormalize)) == "clamp-renormalize");
  CHECK_THROWS_AS(parse_clamp_policy("clip"), Error);
}

}  // TEST_SUITE
