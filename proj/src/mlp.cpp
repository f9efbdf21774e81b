// SPDX-License-Identifier: Apache-2.0
#include "mlp.hpp"

#include <algorithm>

namespace idea_eval::detail {

namespace {

// hidden = relu(W1 x + b1); the ReLU gate is read back as hidden > 0.
void hidden_layer(const MlpShape& shape, std::span<const double> params, std::span<const double> x,
                  std::span<double> hidden) {
  const double* w1 = params.data() + shape.w1_offset();
  const double* b1 = params.data() + shape.b1_offset();
  for (std::size_t j = 0; j < shape.hidden; ++j) {
    const double* row = w1 + j * shape.input;
    double z = b1[j];
    for (std::size_t k = 0; k < shape.input; ++k) z += row[k] * x[k];
    hidden[j] = z > 0.0 ? z : 0.0;
  }
}

}  // namespace

double mlp_forward(const MlpShape& shape, std::span<const double> params, std::span<const double> x) {
  std::vector<double> hidden(shape.hidden);
  hidden_layer(shape, params, x, hidden);
  const double* w2 = params.data() + shape.w2_offset();
  double out = params[shape.b2_offset()];
  for (std::size_t j = 0; j < shape.hidden; ++j) out += w2[j] * hidden[j];
  return out;
}

double mlp_loss_and_grad(const MlpShape& shape, std::span<const double> params,
                         std::span<const double> inputs, std::span<const double> targets,
                         std::span<const double> mask, std::span<double> grad) {
  const std::size_t batch = targets.size();
  std::fill(grad.begin(), grad.end(), 0.0);
  const double* w2 = params.data() + shape.w2_offset();
  double* g_w1 = grad.data() + shape.w1_offset();
  double* g_b1 = grad.data() + shape.b1_offset();
  double* g_w2 = grad.data() + shape.w2_offset();
  double& g_b2 = grad[shape.b2_offset()];

  std::vector<double> hidden(shape.hidden);
  double loss = 0.0;
  const double scale = 2.0 / static_cast<double>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto x = inputs.subspan(i * shape.input, shape.input);
    hidden_layer(shape, params, x, hidden);
    const double* m = mask.empty() ? nullptr : mask.data() + i * shape.hidden;
    double out = params[shape.b2_offset()];
    for (std::size_t j = 0; j < shape.hidden; ++j) {
      const double h = m ? hidden[j] * m[j] : hidden[j];
      out += w2[j] * h;
    }
    const double residual = out - targets[i];
    loss += residual * residual;

    const double d_out = scale * residual;
    g_b2 += d_out;
    for (std::size_t j = 0; j < shape.hidden; ++j) {
      if (hidden[j] <= 0.0) continue;
      const double keep = m ? m[j] : 1.0;
      if (keep == 0.0) continue;
      g_w2[j] += d_out * hidden[j] * keep;
      const double d_pre = d_out * w2[j] * keep;
      g_b1[j] += d_pre;
      double* row = g_w1 + j * shape.input;
      for (std::size_t k = 0; k < shape.input; ++k) row[k] += d_pre * x[k];
    }
  }
  return loss / static_cast<double>(batch);
}

std::vector<char> relu_pattern(const MlpShape& shape, std::span<const double> params,
                               std::span<const double> inputs) {
  const std::size_t batch = inputs.size() / shape.input;
  std::vector<char> pattern(batch * shape.hidden);
  std::vector<double> hidden(shape.hidden);
  for (std::size_t i = 0; i < batch; ++i) {
    hidden_layer(shape, params, inputs.subspan(i * shape.input, shape.input), hidden);
    for (std::size_t j = 0; j < shape.hidden; ++j) pattern[i * shape.hidden + j] = hidden[j] > 0.0;
  }
  return pattern;
}

long double mlp_loss(const MlpShape& shape, std::span<const double> params,
                     std::span<const double> inputs, std::span<const double> targets,
                     std::span<const double> mask) {
  using wide = long double;
  const std::size_t batch = targets.size();
  const double* w1 = params.data() + shape.w1_offset();
  const double* b1 = params.data() + shape.b1_offset();
  const double* w2 = params.data() + shape.w2_offset();
  wide loss = 0.0L;
  for (std::size_t i = 0; i < batch; ++i) {
    const double* x = inputs.data() + i * shape.input;
    const double* m = mask.empty() ? nullptr : mask.data() + i * shape.hidden;
    wide out = params[shape.b2_offset()];
    for (std::size_t j = 0; j < shape.hidden; ++j) {
      wide z = b1[j];
      for (std::size_t k = 0; k < shape.input; ++k) z += static_cast<wide>(w1[j * shape.input + k]) * x[k];
      if (z <= 0.0L) continue;
      out += static_cast<wide>(w2[j]) * (m ? z * m[j] : z);
    }
    const wide residual = out - targets[i];
    loss += residual * residual;
  }
  return loss / static_cast<wide>(batch);
}

}  // namespace idea_eval::detail
