#include "dectlab/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dectlab/error.hpp"
#include "dectlab/train.hpp"

namespace dectlab {

Grid<double> predict_eps(const DenoiserModel& model, const Grid<double>& xt, const Grid<double>& condition, int t,
                         const DiffusionSchedule& schedule) {
  if (!xt.same_shape(condition)) {
    throw Error(Errc::shape_mismatch, "diffusion",
                "x_t is " + shape_string(xt.width(), xt.height()) + " but condition is " +
                    shape_string(condition.width(), condition.height()));
  }
  Grid<double> eps(xt.width(), xt.height(), 0.0);

  if (model.kind() == DenoiserKind::oracle_gaussian) {
    const GaussianOracle& o = model.oracle();
    for (std::size_t i = 0; i < xt.size(); ++i) eps[i] = oracle_eps(xt[i], t, schedule, o.prior_mean, o.prior_var);
    return eps;
  }

  const PatchMlp& mlp = model.mlp();
  const int p = mlp.patch();
  const int stride = std::max(1, p / 2);
  const auto xs = tile_origins(xt.width(), p, stride);
  const auto ys = tile_origins(xt.height(), p, stride);
  const auto p2 = static_cast<std::size_t>(p * p);

  Grid<double> coverage(xt.width(), xt.height(), 0.0);
  std::vector<double> patch_x(p2), patch_c(p2), out(p2);
  PatchWorkspace ws(mlp);
  const double alpha_bar = schedule.alpha_bar(t);

  for (int oy : ys) {
    for (int ox : xs) {
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          const auto k = static_cast<std::size_t>(y * p + x);
          patch_x[k] = xt.at(ox + x, oy + y);
          patch_c[k] = condition.at(ox + x, oy + y);
        }
      }
      predict_patch_eps(mlp, patch_x, patch_c, alpha_bar, ws, out);
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          eps.at(ox + x, oy + y) += out[static_cast<std::size_t>(y * p + x)];
          coverage.at(ox + x, oy + y) += 1.0;
        }
      }
    }
  }
  for (std::size_t i = 0; i < eps.size(); ++i) eps[i] /= coverage[i];
  return eps;
}

Grid<double> ddpm_sample(const Grid<double>& condition, const DenoiserModel& model, const DiffusionSchedule& schedule,
                         std::uint64_t seed) {
  for (double v : condition.values()) {
    if (!std::isfinite(v)) throw Error(Errc::numeric, "diffusion", "condition image is not finite");
  }
  if (model.kind() == DenoiserKind::patch_mlp) model.mlp().check();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Grid<double> x(condition.width(), condition.height(), 0.0);
  for (double& v : x.values()) v = gauss(rng);

  for (int t = schedule.steps(); t >= 1; --t) {
    const Grid<double> eps = predict_eps(model, x, condition, t, schedule);
    const double beta = schedule.beta(t);
    const double coef = beta / std::sqrt(1.0 - schedule.alpha_bar(t));
    const double inv_root_alpha = 1.0 / std::sqrt(schedule.alpha(t));
    const double sigma = std::sqrt(beta);
    for (std::size_t i = 0; i < x.size(); ++i) {
      double v = (x[i] - coef * eps[i]) * inv_root_alpha;
      if (t > 1) v += sigma * gauss(rng);
      if (!std::isfinite(v)) {
        throw Error(Errc::numeric, "diffusion", "sample became non-finite at step " + std::to_string(t));
      }
      x[i] = v;
    }
  }
  return x;
}

MonoImage enhance_ddpm(const MonoImage& low, const DenoiserModel& model, const DiffusionSchedule& schedule,
                       std::uint64_t seed) {
  low.check_finite();
  Grid<double> cond(low.width(), low.height(), 0.0);
  for (std::size_t i = 0; i < low.size(); ++i) cond[i] = normalize_attenuation(low[i]);
  const Grid<double> sample = ddpm_sample(cond, model, schedule, seed);
  MonoImage out(low.width(), low.height(), low.energy_kev, low.reference_cc, low.reference_cc);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = denormalize_attenuation(sample[i]);
  return out;
}

}  // namespace dectlab
