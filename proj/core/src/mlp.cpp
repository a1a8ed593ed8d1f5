// SPDX-License-Identifier: Apache-2.0
#include "fdmimo/mlp.hpp"

#include <cmath>

namespace fdmimo {

int MLPParams::input_dim() const {
  if (layers.empty()) throw std::invalid_argument("empty network");
  return static_cast<int>(layers.front().weight.cols());
}

int MLPParams::output_dim() const {
  if (layers.empty()) throw std::invalid_argument("empty network");
  return static_cast<int>(layers.back().weight.rows());
}

std::size_t MLPParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

bool MLPParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

void MLPParams::validate() const {
  if (layers.empty()) throw std::invalid_argument("empty network");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weight.rows() < 1 || l.weight.cols() < 1) throw std::invalid_argument("empty layer");
    if (l.bias.size() != l.weight.rows()) throw std::invalid_argument("bias size does not match layer width");
    if (i > 0 && l.weight.cols() != layers[i - 1].weight.rows()) {
      throw std::invalid_argument("layer dimensions do not chain");
    }
  }
}

MLPParams MLPParams::zeros_like() const {
  MLPParams z = *this;
  for (auto& l : z.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  return z;
}

MLPParams make_mlp(const std::vector<int>& dims, const std::vector<Activation>& acts, double leaky_slope,
                   std::mt19937_64& rng) {
  if (dims.size() < 2 || acts.size() != dims.size() - 1) throw std::invalid_argument("bad layer specification");
  MLPParams net;
  net.leaky_slope = leaky_slope;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    if (dims[i] < 1 || dims[i + 1] < 1) throw std::invalid_argument("layer sizes must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    DenseLayer l;
    l.weight.resize(dims[i + 1], dims[i]);
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) l.weight(r, c) = dist(rng);
    }
    l.bias = RVector::Zero(dims[i + 1]);
    l.activation = acts[i];
    net.layers.push_back(std::move(l));
  }
  return net;
}

namespace {

void apply_activation(RMatrix& a, Activation act, double slope) {
  switch (act) {
    case Activation::Linear: break;
    case Activation::LeakyRelu: a = a.cwiseMax(slope * a); break;
    case Activation::Tanh: a = a.array().tanh().matrix(); break;
  }
}

}  // namespace

RMatrix mlp_forward(const MLPParams& net, const RMatrix& X, MLPCache* cache) {
  if (X.rows() != net.input_dim()) throw std::invalid_argument("network input dimension mismatch");
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  RMatrix a = X;
  for (const auto& l : net.layers) {
    RMatrix z = l.weight * a;
    z.colwise() += l.bias;
    if (cache) {
      cache->inputs.push_back(std::move(a));
      cache->pre.push_back(z);
    }
    apply_activation(z, l.activation, net.leaky_slope);
    a = std::move(z);
  }
  return a;
}

RMatrix mlp_backward(const MLPParams& net, const MLPCache& cache, const RMatrix& d_output, MLPParams& grads) {
  if (cache.pre.size() != net.layers.size()) throw std::invalid_argument("cache does not match network");
  RMatrix delta = d_output;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const auto& l = net.layers[i];
    const RMatrix& z = cache.pre[i];
    switch (l.activation) {
      case Activation::Linear: break;
      case Activation::LeakyRelu:
        delta = (z.array() > 0.0).select(delta, net.leaky_slope * delta);
        break;
      case Activation::Tanh:
        delta = (delta.array() * (1.0 - z.array().tanh().square())).matrix();
        break;
    }
    grads.layers[i].weight.noalias() += delta * cache.inputs[i].transpose();
    grads.layers[i].bias += delta.rowwise().sum();
    delta = l.weight.transpose() * delta;
  }
  return delta;
}

void adam_update(MLPParams& net, const MLPParams& grads, AdamState& state, double learning_rate) {
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  auto step = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseAbs2();
    p.array() -= learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  };
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    step(net.layers[i].weight, grads.layers[i].weight, state.m.layers[i].weight, state.v.layers[i].weight);
    step(net.layers[i].bias, grads.layers[i].bias, state.m.layers[i].bias, state.v.layers[i].bias);
  }
}

}  // namespace fdmimo
