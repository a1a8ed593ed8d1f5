// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fdmimo/types.hpp"

namespace fdmimo {

enum class Activation { Linear, LeakyRelu, Tanh };

struct DenseLayer {
  RMatrix weight;  // out x in
  RVector bias;
  Activation activation = Activation::Linear;
};

/// Fully connected network. Batches are column-stacked: X is in x batch.
struct MLPParams {
  std::vector<DenseLayer> layers;
  double leaky_slope = 0.01;

  int input_dim() const;
  int output_dim() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
  /// Throws std::invalid_argument when consecutive layer sizes do not chain.
  void validate() const;
  /// Same shapes, all zero.
  MLPParams zeros_like() const;
};

/// dims = {in, h1, ..., out}; acts has dims.size() - 1 entries. Weights are
/// uniform in +-1/sqrt(fan_in), biases zero.
MLPParams make_mlp(const std::vector<int>& dims, const std::vector<Activation>& acts, double leaky_slope,
                   std::mt19937_64& rng);

struct MLPCache {
  std::vector<RMatrix> inputs;  // input to each layer
  std::vector<RMatrix> pre;     // pre-activation of each layer
};

RMatrix mlp_forward(const MLPParams& net, const RMatrix& X, MLPCache* cache = nullptr);

/// Reverse pass for d(loss)/d(output). Gradients are added into `grads`
/// (same shapes as `net`); returns d(loss)/d(input).
RMatrix mlp_backward(const MLPParams& net, const MLPCache& cache, const RMatrix& d_output, MLPParams& grads);

/// Adam optimizer state for one network.
struct AdamState {
  MLPParams m;
  MLPParams v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  explicit AdamState(const MLPParams& like) : m(like.zeros_like()), v(like.zeros_like()) {}
};

void adam_update(MLPParams& net, const MLPParams& grads, AdamState& state, double learning_rate);

}  // namespace fdmimo
