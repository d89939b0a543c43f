#include <cmath>
#include <random>

#include "doctest.h"
#include "dectlab/error.hpp"
#include "dectlab/sampler.hpp"
#include "dectlab/seed.hpp"
#include "dectlab/train.hpp"

using namespace dectlab;

namespace {

struct Moments {
  double mean = 0, var = 0;
  std::size_t n = 0;
};

Moments moments(std::span<const double> xs) {
  Moments m;
  m.n = xs.size();
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(m.n);
  for (double x : xs) m.var += (x - m.mean) * (x - m.mean);
  m.var /= static_cast<double>(m.n - 1);
  return m;
}

// Standard errors for Gaussian samples.
double se_mean(const Moments& m) { return std::sqrt(m.var / static_cast<double>(m.n)); }
double se_var(const Moments& m) { return m.var * std::sqrt(2.0 / static_cast<double>(m.n - 1)); }

PatchMlp randomized_mlp(int patch, int hidden, std::mt19937_64& rng) {
  PatchMlp m(patch, hidden);
  std::normal_distribution<double> g(0.0, 0.5);
  for (double& p : m.parameters()) p = g(rng);
  m.condition_offset = g(rng);
  m.condition_scale = 1.0 + std::abs(g(rng));
  return m;
}

}  // namespace

TEST_SUITE("diffusion") {

TEST_CASE("schedule examples") {
  const auto s1 = DiffusionSchedule::linear(1, 0.1, 0.1);
  CHECK(s1.alpha(1) == doctest::Approx(0.9));
  CHECK(s1.alpha_bar(1) == doctest::Approx(0.9));
  const auto s4 = DiffusionSchedule::linear(4, 0.1, 0.4);
  const double betas[] = {0.1, 0.2, 0.3, 0.4};
  const double bars[] = {0.9, 0.72, 0.504, 0.3024};
  for (int t = 1; t <= 4; ++t) {
    CHECK(s4.beta(t) == doctest::Approx(betas[t - 1]).epsilon(1e-14));
    CHECK(std::abs(s4.alpha_bar(t) - bars[t - 1]) < 1e-12);
  }
  const auto s1000 = DiffusionSchedule::linear(kDefaultSteps, kDefaultBetaStart, kDefaultBetaEnd);
  CHECK(s1000.alpha_bar(1000) < 5e-5);
  CHECK(s1000.alpha_bar(1000) == doctest::Approx(4.0358e-5).epsilon(1e-3));
}

TEST_CASE("schedule invariants") {
  for (int T : {1, 4, 50, 1000}) {
    for (auto [b0, b1] : {std::pair{1e-4, 0.02}, std::pair{0.02, 0.4}, std::pair{0.3, 0.3}}) {
      const auto s = DiffusionSchedule::linear(T, b0, b1);
      double prod = 1.0;
      for (int t = 1; t <= T; ++t) {
        CHECK(s.beta(t) > 0.0);
        CHECK(s.beta(t) < 1.0);
        if (t > 1) {
          CHECK(s.beta(t) >= s.beta(t - 1));
          CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
          CHECK(std::abs(s.alpha_bar(t) - s.alpha_bar(t - 1) * s.alpha(t)) < 1e-12);
        }
        prod *= s.alpha(t);
        CHECK(std::abs(s.alpha_bar(t) - prod) < 1e-12);
        CHECK(s.alpha_bar(t) > 0.0);
        CHECK(s.alpha_bar(t) < 1.0);
      }
    }
  }
}

TEST_CASE("schedule errors name the bound") {
  auto msg = [](int T, double a, double b) {
    try {
      DiffusionSchedule::linear(T, a, b);
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(msg(0, 0.1, 0.2).find("step count") != std::string::npos);
  CHECK(msg(10, 0.0, 0.2).find("beta_start") != std::string::npos);
  CHECK(msg(10, 0.1, 1.0).find("beta_end") != std::string::npos);
  CHECK(msg(10, 0.3, 0.2).find("beta_start") != std::string::npos);
  const auto s = DiffusionSchedule::linear(4, 0.1, 0.4);
  CHECK_THROWS_AS(s.alpha_bar(0), Error);
  CHECK_THROWS_AS(s.alpha_bar(5), Error);
}

TEST_CASE("forward_sample") {
  const auto s = DiffusionSchedule::linear(4, 0.1, 0.4);
  const std::vector<double> x0{1.0, -2.0, 0.5}, zero(3, 0.0), eps{0.3, 0.1, -1.0};
  const auto a = forward_sample(x0, 2, s, zero);
  for (int i = 0; i < 3; ++i) CHECK(a[i] == doctest::Approx(std::sqrt(0.72) * x0[i]));
  const auto b = forward_sample(zero, 3, s, eps);
  for (int i = 0; i < 3; ++i) CHECK(b[i] == doctest::Approx(std::sqrt(1 - 0.504) * eps[i]));
  CHECK_THROWS_AS(forward_sample(x0, 1, s, std::vector<double>(2)), Error);
  CHECK_THROWS_AS(forward_sample(x0, 9, s, eps), Error);
}

TEST_CASE("forward_sample moments") {
  // alpha_bar = 0.5 exactly for T=1, beta=0.5.
  const auto s = DiffusionSchedule::linear(1, 0.5, 0.5);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  const std::size_t n = 100000;
  for (double x0v : {0.0, 1.5}) {
    std::vector<double> x0(n, x0v), eps(n);
    for (double& e : eps) e = g(rng);
    const Moments m = moments(forward_sample(x0, 1, s, eps));
    CHECK(std::abs(m.mean - std::sqrt(0.5) * x0v) < 3 * se_mean(m));
    CHECK(std::abs(m.var - 0.5) < 3 * se_var(m));
  }
}

TEST_CASE("oracle examples") {
  CHECK(oracle_eps(1.0, 0.5, 0.0, 1.0) == doctest::Approx(0.70710678).epsilon(1e-8));
  // Degenerate prior: posterior mean is the prior mean.
  const double xt = 0.8, ab = 0.3;
  CHECK(oracle_eps(xt, ab, 2.0, 0.0) == doctest::Approx((xt - std::sqrt(ab) * 2.0) / std::sqrt(1 - ab)));
  CHECK_THROWS_AS(oracle_eps(1.0, 1.0, 0.0, 1.0), Error);
}

TEST_CASE("contrived exact model has zero loss and zero gradient") {
  // With zero weights the residual is zero, so condition == x0 makes the
  // noise estimate exact.
  const auto s = DiffusionSchedule::linear(10, 0.02, 0.4);
  PatchMlp m(3, 4);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  for (double& w : m.w1()) w = g(rng);
  std::vector<double> x0(9), eps(9);
  for (auto& v : x0) v = g(rng);
  for (auto& v : eps) v = g(rng);
  const LossAndGradient r = training_target_loss(DenoiserModel(m), x0, x0, 4, eps, s);
  CHECK(r.loss < 1e-24);
  for (double d : r.gradient) CHECK(std::abs(d) < 1e-12);
}

TEST_CASE("loss is nonnegative and the oracle is not trainable") {
  const auto s = DiffusionSchedule::linear(10, 0.02, 0.4);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    const PatchMlp m = randomized_mlp(2, 3, rng);
    std::vector<double> x0(4), c(4), eps(4);
    for (auto* v : {&x0, &c, &eps})
      for (double& e : *v) e = g(rng);
    CHECK(training_target_loss(DenoiserModel(m), x0, c, 1 + trial % 10, eps, s).loss >= 0.0);
  }
  const std::vector<double> p(4, 0.0);
  CHECK_THROWS_AS(training_target_loss(DenoiserModel(GaussianOracle{}), p, p, 1, p, s), Error);
}

TEST_CASE("analytic gradient matches central differences") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int trial = 0; trial < 120; ++trial) {
    const int patch = 2 + trial % 3, hidden = 3 + trial % 5, T = 10 + trial % 40;
    const auto s = DiffusionSchedule::linear(T, 0.02, 0.4);
    DenoiserModel model(randomized_mlp(patch, hidden, rng));
    const std::size_t n = static_cast<std::size_t>(patch * patch);
    std::vector<double> x0(n), c(n), eps(n);
    for (auto* v : {&x0, &c, &eps})
      for (double& e : *v) e = g(rng);
    const int t = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(T));
    const LossAndGradient r = training_target_loss(model, x0, c, t, eps, s);
    auto params = model.mlp().parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double keep = params[i];
      params[i] = keep + 1e-5;
      const double up = training_target_loss(model, x0, c, t, eps, s).loss;
      params[i] = keep - 1e-5;
      const double down = training_target_loss(model, x0, c, t, eps, s).loss;
      params[i] = keep;
      const double fd = (up - down) / 2e-5;
      const double scale = std::max({std::abs(fd), std::abs(r.gradient[i]), 1e-6});
      worst = std::max(worst, std::abs(fd - r.gradient[i]) / scale);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("tile origins cover the extent") {
  CHECK(tile_origins(16, 8, 4) == std::vector<int>{0, 4, 8});
  CHECK(tile_origins(18, 8, 4) == std::vector<int>{0, 4, 8, 10});
  CHECK(tile_origins(8, 8, 4) == std::vector<int>{0});
  CHECK_THROWS_AS(tile_origins(6, 8, 4), Error);
}

TEST_CASE("constant tile predictions blend to a constant field") {
  // A zero-weight model with bias b predicts the same eps in every tile
  // when x_t and condition are constant.
  const auto s = DiffusionSchedule::linear(10, 0.02, 0.4);
  PatchMlp m(4, 3);
  for (double& b : m.b2()) b = 0.25;
  Grid<double> xt(13, 11, 0.4), cond(13, 11, -0.2);
  const Grid<double> eps = predict_eps(DenoiserModel(m), xt, cond, 5, s);
  const double ab = s.alpha_bar(5);
  const double want = (0.4 - std::sqrt(ab) * (-0.2 + 0.25)) / std::sqrt(1 - ab);
  for (double v : eps.values()) CHECK(std::abs(v - want) < 1e-12);
}

TEST_CASE("training: zero learning rate leaves parameters alone") {
  std::vector<PatchSample> data;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 0.1);
  for (int i = 0; i < 20; ++i) {
    PatchSample p{std::vector<double>(16), std::vector<double>(16)};
    for (int k = 0; k < 16; ++k) {
      p.condition[k] = g(rng);
      p.target[k] = p.condition[k] + 0.1;
    }
    data.push_back(p);
  }
  const auto s = DiffusionSchedule::linear(20, 0.02, 0.4);
  TrainConfig cfg;
  cfg.patch = 4;
  cfg.hidden = 8;
  cfg.epochs = 5;
  cfg.learning_rate = 0.0;
  cfg.seed = 3;
  const TrainResult r = train_denoiser(data, s, cfg);
  const PatchMlp init = PatchMlp::random(4, 8, derive_seed(3, 0));
  const auto got = r.model.mlp().parameters();
  const auto want = init.parameters();
  CHECK(std::equal(got.begin(), got.end(), want.begin(), want.end()));
  CHECK(r.loss_trace.size() == 5);
}

TEST_CASE("training: identity task is solved at initialisation") {
  // Zero output layer means x0-hat = condition, which is exact here. Plain
  // gradient steps keep it there; Adam rescales the vanishing gradient and
  // wanders, but only slightly.
  std::vector<PatchSample> data;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g(0.0, 0.3);
  for (int i = 0; i < 16; ++i) {
    PatchSample p{std::vector<double>(16), {}};
    for (double& v : p.target) v = g(rng);
    p.condition = p.target;
    data.push_back(p);
  }
  TrainConfig cfg;
  cfg.patch = 4;
  cfg.hidden = 8;
  cfg.epochs = 20;
  cfg.optimizer = Optimizer::sgd;
  const auto s = DiffusionSchedule::linear(20, 0.02, 0.4);
  const TrainResult r = train_denoiser(data, s, cfg);
  for (double l : r.loss_trace) CHECK(l < 1e-20);
  cfg.optimizer = Optimizer::adam;
  const TrainResult a = train_denoiser(data, s, cfg);
  CHECK(a.loss_trace.front() < 1e-20);
  for (double l : a.loss_trace) CHECK(l < 1e-2);
}

TEST_CASE("training: shifted identity task, 500 epochs, smoothed loss halves") {
  std::vector<PatchSample> data;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> g(0.0, 0.3);
  for (int i = 0; i < 32; ++i) {
    PatchSample p{std::vector<double>(16), std::vector<double>(16)};
    for (int k = 0; k < 16; ++k) {
      p.condition[k] = g(rng);
      p.target[k] = p.condition[k] + 0.2;
    }
    data.push_back(p);
  }
  TrainConfig cfg;
  cfg.patch = 4;
  cfg.hidden = 16;
  cfg.epochs = 500;
  cfg.batch_size = 8;
  cfg.seed = 12;
  const TrainResult r = train_denoiser(data, DiffusionSchedule::linear(50, 0.02, 0.4), cfg);
  const auto sm = smooth_trace(r.loss_trace, 20);
  CHECK(sm.back() <= 0.5 * r.loss_trace.front());
  CHECK(sm.back() < sm[19]);
}

TEST_CASE("training: single sample, smoothed trace decreases") {
  PatchSample p{std::vector<double>(16), std::vector<double>(16)};
  for (int k = 0; k < 16; ++k) {
    p.condition[k] = -0.9 + 0.01 * k;
    p.target[k] = p.condition[k] + (k % 3 == 0 ? 0.8 : 0.3);
  }
  TrainConfig cfg;
  cfg.patch = 4;
  cfg.hidden = 16;
  cfg.epochs = 600;
  cfg.batch_size = 1;
  cfg.seed = 4;
  const TrainResult r = train_denoiser(std::vector<PatchSample>{p}, DiffusionSchedule::linear(50, 0.02, 0.4), cfg);
  const auto sm = smooth_trace(r.loss_trace, 100);
  for (std::size_t e = 299; e < sm.size(); e += 100) CHECK(sm[e] < 0.1 * sm[99]);
}

TEST_CASE("training: divergence is reported") {
  std::vector<PatchSample> data;
  for (int i = 0; i < 8; ++i) data.push_back({std::vector<double>(16, 0.5 + i), std::vector<double>(16, -0.5)});
  TrainConfig cfg;
  cfg.patch = 4;
  cfg.hidden = 8;
  cfg.epochs = 50;
  cfg.learning_rate = 1e6;
  cfg.optimizer = Optimizer::sgd;
  try {
    train_denoiser(data, DiffusionSchedule::linear(50, 0.02, 0.4), cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::numeric);
    CHECK(std::string(e.what()).find("smaller learning rate") != std::string::npos);
  }
}

TEST_CASE("sampler: oracle recovers the prior moments") {
  for (auto [T, b0, b1] : {std::tuple{50, 0.02, 0.4}, std::tuple{1000, 1e-4, 0.02}}) {
    const auto s = DiffusionSchedule::linear(T, b0, b1);
    const Grid<double> cond(100, 100, 0.0);
    const Grid<double> x = ddpm_sample(cond, DenoiserModel(GaussianOracle{2.0, 0.25}), s, 42);
    const Moments m = moments(x.values());
    CHECK(std::abs(m.mean - 2.0) < 3 * se_mean(m));
    CHECK(std::abs(m.var - 0.25) < 3 * se_var(m));
  }
}

TEST_CASE("sampler: single step algebra") {
  const auto s = DiffusionSchedule::linear(1, 0.3, 0.3);
  const GaussianOracle o{0.5, 2.0};
  const Grid<double> cond(5, 4, 0.0);
  const Grid<double> x = ddpm_sample(cond, DenoiserModel(o), s, 99);
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x1 = g(rng);
    const double eps = oracle_eps(x1, 0.7, o.prior_mean, o.prior_var);
    const double want = (x1 - 0.3 / std::sqrt(0.3) * eps) / std::sqrt(0.7);
    CHECK(std::abs(x[i] - want) < 1e-12);
  }
}

TEST_CASE("sampler: deterministic per seed") {
  const auto s = DiffusionSchedule::linear(20, 0.02, 0.4);
  std::mt19937_64 rng(1);
  DenoiserModel m(randomized_mlp(4, 6, rng));
  Grid<double> cond(12, 10, -0.5);
  const Grid<double> a = ddpm_sample(cond, m, s, 5), b = ddpm_sample(cond, m, s, 5), c = ddpm_sample(cond, m, s, 6);
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("sampler: non-finite chain names the step") {
  const auto s = DiffusionSchedule::linear(5, 0.02, 0.4);
  PatchMlp m(2, 2);
  for (double& b : m.b2()) b = 1e308;
  Grid<double> cond(4, 4, 0.0);
  try {
    ddpm_sample(cond, DenoiserModel(m), s, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::numeric);
    CHECK(std::string(e.what()).find("step 5") != std::string::npos);
  }
}

TEST_CASE("normalization window") {
  CHECK(normalize_attenuation(0.0) == -1.0);
  CHECK(normalize_attenuation(4.0) == 1.0);
  CHECK(denormalize_attenuation(normalize_attenuation(0.3645)) == doctest::Approx(0.3645).epsilon(1e-15));
}

}  // TEST_SUITE
