// SPDX-License-Identifier: Apache-2.0
#pragma once

// Flat-parameter MLP core shared by training and gradient checking.
// Parameter order: W1 (hidden x input, row-major), b1, w2, b2.

#include <span>
#include <vector>

namespace idea_eval::detail {

struct MlpShape {
  std::size_t input = 0;
  std::size_t hidden = 0;

  std::size_t w1_offset() const { return 0; }
  std::size_t b1_offset() const { return hidden * input; }
  std::size_t w2_offset() const { return b1_offset() + hidden; }
  std::size_t b2_offset() const { return w2_offset() + hidden; }
  std::size_t param_count() const { return b2_offset() + 1; }
};

/// Output for one standardized input.
double mlp_forward(const MlpShape& shape, std::span<const double> params, std::span<const double> x);

/// Mean squared error over a batch and its gradient (written to `grad`).
/// `inputs` is row-major batch x input. `mask`, if nonempty, is batch x hidden
/// multipliers applied to the hidden activation (inverted dropout).
double mlp_loss_and_grad(const MlpShape& shape, std::span<const double> params,
                         std::span<const double> inputs, std::span<const double> targets,
                         std::span<const double> mask, std::span<double> grad);

/// Loss only, same conventions, accumulated in extended precision so that
/// central differences resolve small gradients.
long double mlp_loss(const MlpShape& shape, std::span<const double> params,
                     std::span<const double> inputs, std::span<const double> targets,
                     std::span<const double> mask);

/// Which hidden units are active (pre-activation > 0), batch x hidden.
std::vector<char> relu_pattern(const MlpShape& shape, std::span<const double> params,
                               std::span<const double> inputs);

}  // namespace idea_eval::detail
