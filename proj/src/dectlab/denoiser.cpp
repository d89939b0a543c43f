#include "dectlab/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dectlab/error.hpp"

namespace dectlab {

PatchMlp::PatchMlp(int patch, int hidden) : patch_(patch), hidden_(hidden) {
  if (patch < 1 || hidden < 1) {
    throw Error(Errc::invalid_argument, "diffusion", "patch side and hidden width must be >= 1");
  }
  params_.assign(expected_size(), 0.0);
}

PatchMlp PatchMlp::random(int patch, int hidden, std::uint64_t seed) {
  PatchMlp m(patch, hidden);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> layer1(0.0, std::sqrt(2.0 / m.input_size()));
  for (double& w : m.w1()) w = layer1(rng);
  // Output layer starts at zero: the initial model predicts the condition
  // itself as the clean patch, and no rectifier units die in the first steps.
  return m;
}

void PatchMlp::check() const {
  if (patch_ < 1 || hidden_ < 1) {
    throw Error(Errc::invalid_argument, "diffusion", "patch side and hidden width must be >= 1");
  }
  const std::size_t expected = expected_size();
  if (params_.size() != expected) {
    throw Error(Errc::shape_mismatch, "diffusion",
                "parameter block has " + std::to_string(params_.size()) + " values, expected " +
                    std::to_string(expected));
  }
  for (double p : params_) {
    if (!std::isfinite(p)) throw Error(Errc::numeric, "diffusion", "model parameters are not finite");
  }
  if (!std::isfinite(condition_offset) || !std::isfinite(condition_scale) || !(condition_scale > 0.0)) {
    throw Error(Errc::numeric, "diffusion", "condition standardization must be finite with a positive scale");
  }
}

void PatchMlp::forward(std::span<const double> input, std::span<double> hidden_act,
                       std::span<double> output) const {
  const int in = input_size();
  const auto W1 = w1();
  const auto B1 = b1();
  const auto W2 = w2();
  const auto B2 = b2();
  for (int h = 0; h < hidden_; ++h) {
    const double* row = W1.data() + static_cast<std::size_t>(h) * in;
    double acc = B1[h];
    for (int i = 0; i < in; ++i) acc += row[i] * input[i];
    hidden_act[h] = acc > 0.0 ? acc : 0.0;
  }
  for (int o = 0; o < output_size(); ++o) {
    const double* row = W2.data() + static_cast<std::size_t>(o) * hidden_;
    double acc = B2[o];
    for (int h = 0; h < hidden_; ++h) acc += row[h] * hidden_act[h];
    output[o] = acc;
  }
}

void PatchMlp::accumulate_gradient(std::span<const double> input, std::span<const double> hidden_act,
                                   std::span<const double> output_grad, std::span<double> grad) const {
  const int in = input_size();
  const int out = output_size();
  double* gW1 = grad.data();
  double* gB1 = gW1 + w1_size();
  double* gW2 = gB1 + hidden_;
  double* gB2 = gW2 + w2_size();
  const auto W2 = w2();

  std::vector<double> hidden_grad(static_cast<std::size_t>(hidden_), 0.0);
  for (int o = 0; o < out; ++o) {
    const double g = output_grad[o];
    gB2[o] += g;
    double* grow = gW2 + static_cast<std::size_t>(o) * hidden_;
    const double* wrow = W2.data() + static_cast<std::size_t>(o) * hidden_;
    for (int h = 0; h < hidden_; ++h) {
      grow[h] += g * hidden_act[h];
      hidden_grad[h] += g * wrow[h];
    }
  }
  for (int h = 0; h < hidden_; ++h) {
    if (hidden_act[h] <= 0.0) continue;  // rectifier gate
    const double g = hidden_grad[h];
    gB1[h] += g;
    double* grow = gW1 + static_cast<std::size_t>(h) * in;
    for (int i = 0; i < in; ++i) grow[i] += g * input[i];
  }
}

const char* to_string(DenoiserKind kind) noexcept {
  return kind == DenoiserKind::oracle_gaussian ? "oracle-gaussian" : "patch-mlp";
}

const GaussianOracle& DenoiserModel::oracle() const {
  if (const auto* o = std::get_if<GaussianOracle>(&impl_)) return *o;
  throw Error(Errc::invalid_argument, "diffusion", "model is not an oracle-gaussian denoiser");
}

const PatchMlp& DenoiserModel::mlp() const {
  if (const auto* m = std::get_if<PatchMlp>(&impl_)) return *m;
  throw Error(Errc::invalid_argument, "diffusion", "model is not a patch-mlp denoiser");
}

PatchMlp& DenoiserModel::mlp() {
  if (auto* m = std::get_if<PatchMlp>(&impl_)) return *m;
  throw Error(Errc::invalid_argument, "diffusion", "model is not a patch-mlp denoiser");
}

void assemble_input(std::span<const double> xt, std::span<const double> condition, double sqrt_alpha_bar,
                    std::span<double> out) {
  std::copy(xt.begin(), xt.end(), out.begin());
  std::copy(condition.begin(), condition.end(), out.begin() + static_cast<std::ptrdiff_t>(xt.size()));
  out[xt.size() + condition.size()] = sqrt_alpha_bar;
}

void predict_patch_eps(const PatchMlp& mlp, std::span<const double> xt, std::span<const double> condition,
                       double alpha_bar, PatchWorkspace& ws, std::span<double> eps_out) {
  const double root_ab = std::sqrt(alpha_bar);
  const double inv_noise = 1.0 / std::sqrt(1.0 - alpha_bar);
  assemble_input(xt, condition, root_ab, ws.input);
  const auto p2 = xt.size();
  for (std::size_t k = 0; k < condition.size(); ++k) {
    ws.input[p2 + k] = (condition[k] - mlp.condition_offset) * mlp.condition_scale;
  }
  mlp.forward(ws.input, ws.hidden, ws.residual);
  for (std::size_t k = 0; k < eps_out.size(); ++k) {
    eps_out[k] = (xt[k] - root_ab * (condition[k] + ws.residual[k])) * inv_noise;
  }
}

LossAndGradient training_target_loss(const DenoiserModel& model, std::span<const double> x0,
                                     std::span<const double> condition, int t, std::span<const double> eps,
                                     const DiffusionSchedule& schedule) {
  if (model.kind() != DenoiserKind::patch_mlp) {
    throw Error(Errc::invalid_argument, "diffusion", "the oracle denoiser has no trainable parameters");
  }
  const PatchMlp& mlp = model.mlp();
  const auto p2 = static_cast<std::size_t>(mlp.output_size());
  if (x0.size() != p2 || condition.size() != p2 || eps.size() != p2) {
    throw Error(Errc::shape_mismatch, "diffusion",
                "patches must have " + std::to_string(p2) + " values for a " + std::to_string(mlp.patch()) +
                    "x" + std::to_string(mlp.patch()) + " model");
  }
  const std::vector<double> xt = forward_sample(x0, t, schedule, eps);
  const double alpha_bar = schedule.alpha_bar(t);
  PatchWorkspace ws(mlp);
  std::vector<double> pred(p2);
  predict_patch_eps(mlp, xt, condition, alpha_bar, ws, pred);

  LossAndGradient r;
  const double slope = eps_head_slope(alpha_bar);
  std::vector<double> residual_grad(p2);
  for (std::size_t k = 0; k < p2; ++k) {
    const double d = pred[k] - eps[k];
    r.loss += d * d;
    residual_grad[k] = 2.0 * d / static_cast<double>(p2) * slope;
  }
  r.loss /= static_cast<double>(p2);
  r.gradient.assign(mlp.parameter_count(), 0.0);
  mlp.accumulate_gradient(ws.input, ws.hidden, residual_grad, r.gradient);
  return r;
}

double oracle_eps(double xt, double alpha_bar, double prior_mean, double prior_var) {
  const double noise_var = 1.0 - alpha_bar;
  if (!(noise_var > 0.0)) {
    throw Error(Errc::numeric, "diffusion", "1 - alpha_bar is zero; the oracle is undefined at this step");
  }
  if (!(prior_var >= 0.0)) throw Error(Errc::invalid_argument, "diffusion", "prior variance must be >= 0");
  const double root_ab = std::sqrt(alpha_bar);
  const double posterior_mean =
      (root_ab * prior_var * xt + noise_var * prior_mean) / (alpha_bar * prior_var + noise_var);
  return (xt - root_ab * posterior_mean) / std::sqrt(noise_var);
}

double oracle_eps(double xt, int t, const DiffusionSchedule& schedule, double prior_mean, double prior_var) {
  return oracle_eps(xt, schedule.alpha_bar(t), prior_mean, prior_var);
}

}  // namespace dectlab
