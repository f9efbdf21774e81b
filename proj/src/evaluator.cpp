// SPDX-License-Identifier: Apache-2.0
#include "idea_eval/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "idea_eval/error.hpp"
#include "idea_eval/metrics.hpp"
#include "idea_eval/stats.hpp"
#include "mlp.hpp"

namespace idea_eval {

using detail::MlpShape;

void EvaluatorConfig::validate() const {
  if (hidden_dim == 0) throw Error(ErrorKind::InvalidConfig, "hidden_dim must be positive");
  if (batch_size == 0) throw Error(ErrorKind::InvalidConfig, "batch_size must be positive");
  if (epochs == 0) throw Error(ErrorKind::InvalidConfig, "epochs must be positive");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidConfig, "learning_rate must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "dropout must lie in [0, 1)");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) ||
      !(adam_eps > 0.0)) {
    throw Error(ErrorKind::InvalidConfig, "Adam parameters out of range");
  }
}

Standardizer fit_standardizer(std::span<const FeatureVector> features) {
  if (features.empty()) throw Error(ErrorKind::EmptyInput, "cannot standardize zero features");
  const std::size_t dim = features.front().size();
  for (const auto& f : features) {
    if (f.size() != dim) {
      throw Error(ErrorKind::DimMismatch,
                  fmt::format("feature dims differ: {} vs {}", dim, f.size()));
    }
  }
  Standardizer s;
  s.mean.resize(dim);
  s.std.resize(dim);
  std::vector<double> column(features.size());
  for (std::size_t d = 0; d < dim; ++d) {
    for (std::size_t i = 0; i < features.size(); ++i) column[i] = features[i][d];
    s.mean[d] = mean_of(column);
    s.std[d] = std::max(stddev_of(column), kStdFloor);
  }
  return s;
}

namespace {

std::vector<double> flatten_params(const Evaluator& e) {
  std::vector<double> p;
  p.reserve(e.w1.size() + e.b1.size() + e.w2.size() + 1);
  p.insert(p.end(), e.w1.begin(), e.w1.end());
  p.insert(p.end(), e.b1.begin(), e.b1.end());
  p.insert(p.end(), e.w2.begin(), e.w2.end());
  p.push_back(e.b2);
  return p;
}

void unflatten_params(std::span<const double> p, const MlpShape& shape, Evaluator& e) {
  const auto at = [&](std::size_t off, std::size_t n) {
    return std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(off),
                               p.begin() + static_cast<std::ptrdiff_t>(off + n));
  };
  e.w1 = at(shape.w1_offset(), shape.hidden * shape.input);
  e.b1 = at(shape.b1_offset(), shape.hidden);
  e.w2 = at(shape.w2_offset(), shape.hidden);
  e.b2 = p[shape.b2_offset()];
}

void standardize_into(std::span<const double> feature, const std::vector<double>& mean,
                      const std::vector<double>& std, std::span<double> out) {
  for (std::size_t d = 0; d < feature.size(); ++d) out[d] = (feature[d] - mean[d]) / std[d];
}

struct Adam {
  std::vector<double> m, v;
  std::size_t t = 0;

  explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, const EvaluatorConfig& c) {
    ++t;
    const double bc1 = 1.0 - std::pow(c.adam_beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(c.adam_beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = c.adam_beta1 * m[i] + (1.0 - c.adam_beta1) * grad[i];
      v[i] = c.adam_beta2 * v[i] + (1.0 - c.adam_beta2) * grad[i] * grad[i];
      params[i] -= c.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c.adam_eps);
    }
  }
};

// Glorot-uniform weights, zero hidden biases, output bias at `output_bias`.
std::vector<double> init_params(const MlpShape& shape, double output_bias, std::mt19937_64& rng) {
  std::vector<double> p(shape.param_count(), 0.0);
  const double a1 = std::sqrt(6.0 / static_cast<double>(shape.input + shape.hidden));
  const double a2 = std::sqrt(6.0 / static_cast<double>(shape.hidden + 1));
  std::uniform_real_distribution<double> u1(-a1, a1), u2(-a2, a2);
  for (std::size_t i = 0; i < shape.hidden * shape.input; ++i) p[shape.w1_offset() + i] = u1(rng);
  for (std::size_t j = 0; j < shape.hidden; ++j) p[shape.w2_offset() + j] = u2(rng);
  p[shape.b2_offset()] = output_bias;
  return p;
}

void fill_dropout_mask(std::span<double> mask, double rate, std::mt19937_64& rng) {
  std::bernoulli_distribution drop(rate);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = drop(rng) ? 0.0 : keep_scale;
}

}  // namespace

TrainResult train(std::span<const FeatureVector> features, std::span<const double> labels,
                  const EvaluatorConfig& config) {
  config.validate();
  if (features.size() != labels.size()) {
    throw Error(ErrorKind::LengthMismatch,
                fmt::format("{} features vs {} labels", features.size(), labels.size()));
  }
  if (features.size() < 2) throw Error(ErrorKind::EmptyInput, "training needs at least 2 examples");
  for (double y : labels) {
    if (!std::isfinite(y)) throw Error(ErrorKind::InvalidRecord, "non-finite training label");
  }
  const auto standardizer = fit_standardizer(features);
  const std::size_t n = features.size();
  const MlpShape shape{features.front().size(), config.hidden_dim};
  if (shape.input == 0) throw Error(ErrorKind::EmptyInput, "features have zero dimensions");

  std::vector<double> inputs(n * shape.input);
  for (std::size_t i = 0; i < n; ++i) {
    standardize_into(features[i], standardizer.mean, standardizer.std,
                     std::span<double>(inputs).subspan(i * shape.input, shape.input));
  }
  for (double x : inputs) {
    if (!std::isfinite(x)) throw Error(ErrorKind::InvalidRecord, "non-finite feature value");
  }

  std::mt19937_64 rng(config.seed);
  auto params = init_params(shape, mean_of(labels), rng);
  Adam adam(params.size());
  std::vector<double> grad(params.size());

  const auto evaluate = [&](std::span<const double> p, std::vector<double>& preds) {
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = detail::mlp_forward(shape, p, std::span<const double>(inputs).subspan(i * shape.input, shape.input));
      sse += (preds[i] - labels[i]) * (preds[i] - labels[i]);
    }
    return sse / static_cast<double>(n);
  };

  TrainHistory history;
  std::vector<double> preds(n);
  history.initial_mse = evaluate(params, preds);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> batch_inputs, batch_targets, mask;

  std::vector<double> best_rho_params, best_mse_params;
  std::size_t best_rho_epoch = 0, best_mse_epoch = 0;
  double best_rho = -std::numeric_limits<double>::infinity();
  double best_mse = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t size = std::min(config.batch_size, n - start);
      batch_inputs.resize(size * shape.input);
      batch_targets.resize(size);
      for (std::size_t b = 0; b < size; ++b) {
        const std::size_t i = order[start + b];
        std::copy_n(inputs.begin() + static_cast<std::ptrdiff_t>(i * shape.input), shape.input,
                    batch_inputs.begin() + static_cast<std::ptrdiff_t>(b * shape.input));
        batch_targets[b] = labels[i];
      }
      mask.clear();
      if (config.dropout > 0.0) {
        mask.resize(size * shape.hidden);
        fill_dropout_mask(mask, config.dropout, rng);
      }
      const double loss =
          detail::mlp_loss_and_grad(shape, params, batch_inputs, batch_targets, mask, grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::NanLoss, fmt::format("loss became non-finite in epoch {}", epoch));
      }
      adam.step(params, grad, config);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_mse = evaluate(params, preds);
    if (!std::isfinite(record.train_mse)) {
      throw Error(ErrorKind::NanLoss, fmt::format("training MSE became non-finite in epoch {}", epoch));
    }
    const auto corr = try_spearman(preds, labels);
    record.train_spearman = corr ? corr->rho : std::numeric_limits<double>::quiet_NaN();
    history.epochs.push_back(record);

    if (corr && corr->rho > best_rho) {
      best_rho = corr->rho;
      best_rho_epoch = epoch;
      best_rho_params = params;
    }
    if (record.train_mse < best_mse) {
      best_mse = record.train_mse;
      best_mse_epoch = epoch;
      best_mse_params = params;
    }
  }

  TrainResult result;
  if (best_rho_epoch != 0) {
    history.selected_epoch = best_rho_epoch;
    history.selected_by = SelectionMetric::TrainSpearman;
    params = std::move(best_rho_params);
  } else {
    history.selected_epoch = best_mse_epoch;
    history.selected_by = SelectionMetric::TrainMse;
    params = std::move(best_mse_params);
  }
  auto& e = result.evaluator;
  e.input_dim = shape.input;
  e.hidden_dim = shape.hidden;
  unflatten_params(params, shape, e);
  e.feat_mean = standardizer.mean;
  e.feat_std = standardizer.std;
  result.history = std::move(history);
  return result;
}

double predict(const Evaluator& evaluator, std::span<const double> feature, bool clamp) {
  if (feature.size() != evaluator.input_dim) {
    throw Error(ErrorKind::DimMismatch,
                fmt::format("feature has {} dims, evaluator expects {}", feature.size(),
                            evaluator.input_dim));
  }
  std::vector<double> x(feature.size());
  standardize_into(feature, evaluator.feat_mean, evaluator.feat_std, x);
  const MlpShape shape{evaluator.input_dim, evaluator.hidden_dim};
  const double out = detail::mlp_forward(shape, flatten_params(evaluator), x);
  return clamp ? std::clamp(out, 1.0, 10.0) : out;
}

GradCheckResult grad_check(const GradCheckOptions& options) {
  const MlpShape shape{options.input_dim, options.hidden_dim};
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto params = init_params(shape, normal(rng), rng);
  for (std::size_t j = 0; j < shape.hidden; ++j) params[shape.b1_offset() + j] = 0.1 * normal(rng);
  std::vector<double> inputs(options.samples * shape.input), targets(options.samples);
  for (auto& x : inputs) x = normal(rng);
  for (auto& y : targets) y = normal(rng);

  // With dropout on, every evaluation draws a fresh mask, which is exactly
  // the mistake the check must expose.
  std::vector<double> mask;
  const auto draw_mask = [&] {
    mask.clear();
    if (options.dropout > 0.0) {
      mask.resize(options.samples * shape.hidden);
      fill_dropout_mask(mask, options.dropout, rng);
    }
  };

  std::vector<double> grad(params.size());
  draw_mask();
  detail::mlp_loss_and_grad(shape, params, inputs, targets, mask, grad);

  std::vector<std::size_t> probe(params.size());
  std::iota(probe.begin(), probe.end(), 0);
  if (options.probes != 0 && options.probes < probe.size()) {
    std::shuffle(probe.begin(), probe.end(), rng);
    probe.resize(options.probes);
  }

  const auto base_pattern = detail::relu_pattern(shape, params, inputs);
  GradCheckResult result;
  for (std::size_t idx : probe) {
    const double saved = params[idx];
    const double hi = saved + options.step;
    const double lo = saved - options.step;
    params[idx] = hi;
    draw_mask();
    const long double up = detail::mlp_loss(shape, params, inputs, targets, mask);
    const bool kink_up = detail::relu_pattern(shape, params, inputs) != base_pattern;
    params[idx] = lo;
    draw_mask();
    const long double down = detail::mlp_loss(shape, params, inputs, targets, mask);
    const bool kink_down = detail::relu_pattern(shape, params, inputs) != base_pattern;
    params[idx] = saved;
    // The loss is not differentiable across a ReLU switch; such a difference
    // says nothing about backprop.
    if (kink_up || kink_down) {
      ++result.skipped;
      continue;
    }

    const auto numeric = static_cast<double>((up - down) / (static_cast<long double>(hi) - lo));
    const double analytic = grad[idx];
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(numeric - analytic) / scale);
    ++result.probed;
  }
  result.passed = result.max_relative_error < options.tolerance;
  return result;
}

}  // namespace idea_eval
