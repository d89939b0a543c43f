#include "dectlab/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "dectlab/error.hpp"
#include "dectlab/seed.hpp"

namespace dectlab {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;

}  // namespace

const char* to_string(Optimizer opt) noexcept { return opt == Optimizer::sgd ? "sgd" : "adam"; }

Optimizer parse_optimizer(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  throw Error(Errc::invalid_argument, "diffusion", "unknown optimizer '" + name + "'");
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const char* field) {
    if (!ok) throw Error(Errc::invalid_argument, "diffusion", std::string("train config: ") + field + " must be positive");
  };
  need(epochs > 0, "epochs");
  need(batch_size > 0, "batch_size");
  need(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate");
  need(patch > 0, "patch");
  need(hidden > 0, "hidden");
  need(patch_stride > 0, "patch_stride");
  need(report_every > 0, "report_every");
}

std::vector<int> tile_origins(int extent, int patch, int stride) {
  if (patch > extent) {
    throw Error(Errc::shape_mismatch, "diffusion",
                "image extent " + std::to_string(extent) + " is smaller than the patch side " + std::to_string(patch));
  }
  std::vector<int> origins;
  for (int o = 0; o + patch <= extent; o += stride) origins.push_back(o);
  if (origins.back() != extent - patch) origins.push_back(extent - patch);
  return origins;
}

std::vector<PatchSample> extract_patches(const Grid<double>& target, const Grid<double>& condition, int patch,
                                         int stride) {
  if (!target.same_shape(condition)) {
    throw Error(Errc::shape_mismatch, "diffusion",
                "target is " + shape_string(target.width(), target.height()) + " but condition is " +
                    shape_string(condition.width(), condition.height()));
  }
  std::vector<PatchSample> out;
  const auto xs = tile_origins(target.width(), patch, stride);
  const auto ys = tile_origins(target.height(), patch, stride);
  for (int oy : ys) {
    for (int ox : xs) {
      PatchSample s;
      s.target.reserve(static_cast<std::size_t>(patch * patch));
      s.condition.reserve(static_cast<std::size_t>(patch * patch));
      for (int y = 0; y < patch; ++y) {
        for (int x = 0; x < patch; ++x) {
          s.target.push_back(target.at(ox + x, oy + y));
          s.condition.push_back(condition.at(ox + x, oy + y));
        }
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

TrainResult train_denoiser(std::span<const PatchSample> dataset, const DiffusionSchedule& schedule,
                           const TrainConfig& config, const TrainProgress& progress) {
  config.validate();
  if (dataset.empty()) throw Error(Errc::invalid_argument, "diffusion", "training dataset is empty");
  const auto p2 = static_cast<std::size_t>(config.patch * config.patch);
  for (const PatchSample& s : dataset) {
    if (s.target.size() != p2 || s.condition.size() != p2) {
      throw Error(Errc::shape_mismatch, "diffusion",
                  "training patches must have " + std::to_string(p2) + " values");
    }
  }

  PatchMlp mlp = PatchMlp::random(config.patch, config.hidden, derive_seed(config.seed, 0));
  {
    double sum = 0.0, sum2 = 0.0;
    for (const PatchSample& s : dataset) {
      for (double c : s.condition) {
        sum += c;
        sum2 += c * c;
      }
    }
    const double n = static_cast<double>(dataset.size() * p2);
    const double mean = sum / n;
    const double var = std::max(0.0, sum2 / n - mean * mean);
    mlp.condition_offset = mean;
    mlp.condition_scale = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }
  std::mt19937_64 rng(derive_seed(config.seed, 1));
  std::uniform_int_distribution<int> draw_step(1, schedule.steps());
  std::normal_distribution<double> gauss(0.0, 1.0);

  const std::size_t n_params = mlp.parameter_count();
  std::vector<double> grad(n_params), m1(n_params, 0.0), m2(n_params, 0.0);
  std::vector<double> eps(p2), xt(p2), pred(p2), residual_grad(p2);
  PatchWorkspace ws(mlp);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result{DenoiserModel(PatchMlp{}), {}};
  result.loss_trace.reserve(static_cast<std::size_t>(config.epochs));
  long long adam_step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const double inv_batch = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);

      for (std::size_t b = start; b < end; ++b) {
        const PatchSample& s = dataset[order[b]];
        const int t = draw_step(rng);
        for (double& e : eps) e = gauss(rng);
        const double alpha_bar = schedule.alpha_bar(t);
        const double signal = std::sqrt(alpha_bar);
        const double noise = std::sqrt(1.0 - alpha_bar);
        for (std::size_t k = 0; k < p2; ++k) xt[k] = signal * s.target[k] + noise * eps[k];
        predict_patch_eps(mlp, xt, s.condition, alpha_bar, ws, pred);
        const double slope = eps_head_slope(alpha_bar);
        double loss = 0.0;
        for (std::size_t k = 0; k < p2; ++k) {
          const double d = pred[k] - eps[k];
          loss += d * d;
          residual_grad[k] = 2.0 * d / static_cast<double>(p2) * slope * inv_batch;
        }
        loss /= static_cast<double>(p2);
        epoch_loss += loss;
        mlp.accumulate_gradient(ws.input, ws.hidden, residual_grad, grad);
      }

      auto params = mlp.parameters();
      if (config.optimizer == Optimizer::sgd) {
        for (std::size_t i = 0; i < n_params; ++i) params[i] -= config.learning_rate * grad[i];
      } else {
        ++adam_step;
        const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam_step));
        const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam_step));
        for (std::size_t i = 0; i < n_params; ++i) {
          m1[i] = kAdamBeta1 * m1[i] + (1.0 - kAdamBeta1) * grad[i];
          m2[i] = kAdamBeta2 * m2[i] + (1.0 - kAdamBeta2) * grad[i] * grad[i];
          params[i] -= config.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + kAdamEpsilon);
        }
      }
    }
    epoch_loss /= static_cast<double>(dataset.size());
    if (!std::isfinite(epoch_loss)) {
      std::ostringstream os;
      os << "training loss diverged at epoch " << epoch << "; try a smaller learning rate (currently "
         << config.learning_rate << ")";
      throw Error(Errc::numeric, "diffusion", os.str());
    }
    result.loss_trace.push_back(epoch_loss);
    if (progress && (epoch % config.report_every == 0 || epoch == config.epochs)) progress(epoch, epoch_loss);
  }
  mlp.check();
  result.model = DenoiserModel(std::move(mlp));
  return result;
}

std::vector<double> smooth_trace(std::span<const double> trace, int window) {
  if (window < 1) throw Error(Errc::invalid_argument, "diffusion", "smoothing window must be >= 1");
  std::vector<double> out(trace.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    acc += trace[i];
    if (i >= static_cast<std::size_t>(window)) acc -= trace[i - static_cast<std::size_t>(window)];
    out[i] = acc / static_cast<double>(std::min<std::size_t>(i + 1, static_cast<std::size_t>(window)));
  }
  return out;
}

}  // namespace dectlab
