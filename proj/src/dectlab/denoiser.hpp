#pragma once

#include <cstddef>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dectlab/diffusion.hpp"

namespace dectlab {

/// Closed-form noise predictor for a scalar Gaussian prior N(mean, var).
struct GaussianOracle {
  double prior_mean = 0.0;
  double prior_var = 1.0;
};

/// Two-layer rectifier perceptron on [x_t patch | condition patch |
/// sqrt(alpha_bar_t)]. Its output is a residual r on the condition patch; the
/// noise estimate is eps = (x_t - sqrt(alpha_bar) (condition + r)) / sqrt(1 - alpha_bar)
/// (see predict_patch_eps).
///
/// Parameters are stored contiguously as w1 (hidden x input, row-major), b1,
/// w2 (output x hidden, row-major), b2.
class PatchMlp {
 public:
  static constexpr const char* kInputLayout = "x_t|condition|sqrt_alpha_bar";
  static constexpr const char* kOutputHead = "eps_from_condition_residual";

  PatchMlp() = default;
  PatchMlp(int patch, int hidden);  // zero parameters

  /// He-style first layer drawn from `seed`; zero output layer.
  static PatchMlp random(int patch, int hidden, std::uint64_t seed);

  int patch() const noexcept { return patch_; }
  int hidden() const noexcept { return hidden_; }
  int input_size() const noexcept { return 2 * patch_ * patch_ + 1; }
  int output_size() const noexcept { return patch_ * patch_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  std::span<double> w1() noexcept { return block(0, w1_size()); }
  std::span<double> b1() noexcept { return block(w1_size(), hidden_); }
  std::span<double> w2() noexcept { return block(w1_size() + hidden_, w2_size()); }
  std::span<double> b2() noexcept { return block(w1_size() + hidden_ + w2_size(), output_size()); }
  std::span<const double> w1() const noexcept { return block(0, w1_size()); }
  std::span<const double> b1() const noexcept { return block(w1_size(), hidden_); }
  std::span<const double> w2() const noexcept { return block(w1_size() + hidden_, w2_size()); }
  std::span<const double> b2() const noexcept { return block(w1_size() + hidden_ + w2_size(), output_size()); }

  /// The condition patch enters the network as (c - offset) * scale. Set from
  /// training-set statistics; not trained.
  double condition_offset = 0.0;
  double condition_scale = 1.0;

  /// Throws unless dimensions are consistent and all parameters finite.
  void check() const;

  /// `hidden_act` receives the post-rectifier activations.
  void forward(std::span<const double> input, std::span<double> hidden_act, std::span<double> output) const;

  /// Adds d(loss)/d(params) into `grad` (same layout as parameters()) given
  /// d(loss)/d(output). `hidden_act` must come from forward() on `input`.
  void accumulate_gradient(std::span<const double> input, std::span<const double> hidden_act,
                           std::span<const double> output_grad, std::span<double> grad) const;

 private:
  std::size_t w1_size() const noexcept { return static_cast<std::size_t>(hidden_) * input_size(); }
  std::size_t w2_size() const noexcept { return static_cast<std::size_t>(output_size()) * hidden_; }
  std::size_t expected_size() const noexcept { return w1_size() + hidden_ + w2_size() + output_size(); }
  std::span<double> block(std::size_t off, std::size_t n) noexcept { return std::span<double>(params_).subspan(off, n); }
  std::span<const double> block(std::size_t off, std::size_t n) const noexcept {
    return std::span<const double>(params_).subspan(off, n);
  }

  int patch_ = 0;
  int hidden_ = 0;
  std::vector<double> params_;
};

enum class DenoiserKind { oracle_gaussian, patch_mlp };

const char* to_string(DenoiserKind kind) noexcept;

class DenoiserModel {
 public:
  DenoiserModel(GaussianOracle oracle) : impl_(oracle) {}
  DenoiserModel(PatchMlp mlp) : impl_(std::move(mlp)) {}

  DenoiserKind kind() const noexcept {
    return std::holds_alternative<GaussianOracle>(impl_) ? DenoiserKind::oracle_gaussian : DenoiserKind::patch_mlp;
  }
  /// Throws Errc::invalid_argument for the wrong kind.
  const GaussianOracle& oracle() const;
  const PatchMlp& mlp() const;
  PatchMlp& mlp();

 private:
  std::variant<GaussianOracle, PatchMlp> impl_;
};

/// Concatenates [x_t | condition | sqrt_alpha_bar] into `out`.
void assemble_input(std::span<const double> xt, std::span<const double> condition, double sqrt_alpha_bar,
                    std::span<double> out);

/// Scratch buffers for predict_patch_eps, sized for one model.
struct PatchWorkspace {
  explicit PatchWorkspace(const PatchMlp& mlp)
      : input(static_cast<std::size_t>(mlp.input_size())),
        hidden(static_cast<std::size_t>(mlp.hidden())),
        residual(static_cast<std::size_t>(mlp.output_size())) {}
  std::vector<double> input;
  std::vector<double> hidden;
  std::vector<double> residual;
};

/// Noise estimate for one patch at signal level alpha_bar. Leaves the network
/// input and activations in `ws` for a following backward pass.
void predict_patch_eps(const PatchMlp& mlp, std::span<const double> xt, std::span<const double> condition,
                       double alpha_bar, PatchWorkspace& ws, std::span<double> eps_out);

/// d(eps_k)/d(r_k) of the output head; the same for every k.
inline double eps_head_slope(double alpha_bar) { return -std::sqrt(alpha_bar) / std::sqrt(1.0 - alpha_bar); }

struct LossAndGradient {
  double loss = 0.0;
  /// Same layout as PatchMlp::parameters().
  std::vector<double> gradient;
};

/// Mean squared error between `eps` and the model's prediction on the noised
/// patch, with the analytic parameter gradient.
LossAndGradient training_target_loss(const DenoiserModel& model, std::span<const double> x0,
                                     std::span<const double> condition, int t, std::span<const double> eps,
                                     const DiffusionSchedule& schedule);

/// Noise implied by the exact posterior mean E[x0 | x_t] under a Gaussian prior.
double oracle_eps(double xt, int t, const DiffusionSchedule& schedule, double prior_mean, double prior_var);
/// Same, at an explicit alpha_bar; throws Errc::numeric when 1 - alpha_bar is zero.
double oracle_eps(double xt, double alpha_bar, double prior_mean, double prior_var);

}  // namespace dectlab
