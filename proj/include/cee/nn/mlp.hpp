#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cee/core/error.hpp"
#include "cee/core/random.hpp"
#include "cee/nn/autodiff.hpp"
#include "cee/nn/kernels.hpp"
#include "cee/nn/tensor.hpp"

namespace cee::nn {

enum class Activation { Relu, Tanh };

template <typename T>
struct DenseLayer {
  Tensor<T> weight;  // out x in
  Tensor<T> bias;    // out

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }
};

/// Fully connected network; every layer except the last is followed by `hidden`.
template <typename T>
struct MlpParams {
  std::vector<DenseLayer<T>> layers;
  Activation hidden = Activation::Relu;

  std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in(); }
  std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Weights and biases in a fixed order (w0, b0, w1, b1, ...).
  std::vector<Tensor<T>*> tensors() {
    std::vector<Tensor<T>*> out;
    for (auto& l : layers) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }
  std::vector<const Tensor<T>*> tensors() const {
    std::vector<const Tensor<T>*> out;
    for (const auto& l : layers) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  void validate() const {
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const auto& l = layers[k];
      if (l.weight.rank() != 2 || l.bias.size() != l.out())
        throw ConfigError("layer " + std::to_string(k) + " has inconsistent weight/bias shapes");
      if (k > 0 && layers[k - 1].out() != l.in())
        throw ConfigError("layer " + std::to_string(k) + " input width does not chain");
    }
  }

  /// Same architecture, all entries zero (gradient accumulator).
  MlpParams zeros_like() const {
    MlpParams z;
    z.hidden = hidden;
    for (const auto& l : layers)
      z.layers.push_back({Tensor<T>(l.weight.shape(), T{0}), Tensor<T>(l.bias.shape(), T{0})});
    return z;
  }

  template <typename U>
  MlpParams<U> cast() const {
    MlpParams<U> p;
    p.hidden = hidden;
    for (const auto& l : layers) p.layers.push_back({l.weight.template cast<U>(), l.bias.template cast<U>()});
    return p;
  }
};

/// Layer sizes e.g. {in, 64, 64, out}; all parameters zero.
template <typename T>
MlpParams<T> make_mlp(std::span<const std::size_t> sizes, Activation hidden = Activation::Relu) {
  if (sizes.size() < 2) throw ConfigError("an MLP needs at least an input and an output size");
  MlpParams<T> p;
  p.hidden = hidden;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k)
    p.layers.push_back({Tensor<T>(sizes[k + 1], sizes[k]), Tensor<T>(Shape{sizes[k + 1]})});
  return p;
}

template <typename T>
MlpParams<T> make_mlp(std::initializer_list<std::size_t> sizes, Activation hidden = Activation::Relu) {
  std::vector<std::size_t> v(sizes);
  return make_mlp<T>(std::span<const std::size_t>(v), hidden);
}

/// Parameters registered as leaves on a tape; read gradients back after backward.
template <typename T>
struct MlpBinding {
  std::vector<Var<T>> weights;
  std::vector<Var<T>> biases;
};

template <typename T>
MlpBinding<T> bind(Tape<T>& tape, const MlpParams<T>& params) {
  MlpBinding<T> b;
  for (const auto& l : params.layers) {
    b.weights.push_back(tape.parameter(l.weight));
    b.biases.push_back(tape.parameter(l.bias));
  }
  return b;
}

template <typename T>
Var<T> activate(Var<T> x, Activation a) {
  return a == Activation::Relu ? relu(x) : tanh(x);
}

/// Taped forward pass through all layers.
template <typename T>
Var<T> mlp_forward(const MlpParams<T>& params, const MlpBinding<T>& binding, Var<T> input) {
  if (input.value().cols() != params.in_dim()) {
    throw ConfigError("mlp_forward: input width " + std::to_string(input.value().cols()) +
                      " but network expects " + std::to_string(params.in_dim()));
  }
  Var<T> h = input;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    h = linear(h, binding.weights[k], binding.biases[k]);
    if (k + 1 < params.layers.size()) h = activate(h, params.hidden);
  }
  return h;
}

/// Taped forward pass that stops before the output layer (returns the last hidden activation).
template <typename T>
Var<T> mlp_trunk(const MlpParams<T>& params, const MlpBinding<T>& binding, Var<T> input) {
  if (input.value().cols() != params.in_dim()) throw ConfigError("mlp_trunk: input width mismatch");
  Var<T> h = input;
  for (std::size_t k = 0; k + 1 < params.layers.size(); ++k)
    h = activate(linear(h, binding.weights[k], binding.biases[k]), params.hidden);
  return h;
}

template <typename T>
MlpParams<T> gradients(const Tape<T>& tape, const MlpParams<T>& params, const MlpBinding<T>& binding) {
  MlpParams<T> g;
  g.hidden = params.hidden;
  for (std::size_t k = 0; k < params.layers.size(); ++k)
    g.layers.push_back({tape.grad(binding.weights[k]), tape.grad(binding.biases[k])});
  return g;
}

/// Tape-free forward pass for a single input row.
template <typename T>
std::vector<T> mlp_predict(const MlpParams<T>& params, std::span<const T> input) {
  if (input.size() != params.in_dim()) {
    throw ConfigError("mlp_predict: input width " + std::to_string(input.size()) +
                      " but network expects " + std::to_string(params.in_dim()));
  }
  std::vector<T> cur(input.begin(), input.end()), next;
  std::vector<std::size_t> scratch;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& l = params.layers[k];
    next.assign(l.out(), T{0});
    kernels::affine_row(l.weight.data(), l.bias.data(), cur.data(), next.data(), l.in(), l.out(), scratch);
    if (k + 1 < params.layers.size()) {
      for (T& v : next) v = params.hidden == Activation::Relu ? (v > T{0} ? v : T{0}) : std::tanh(v);
    }
    cur.swap(next);
  }
  return cur;
}

template <typename T>
std::vector<T> mlp_predict(const MlpParams<T>& params, const std::vector<T>& input) {
  return mlp_predict(params, std::span<const T>(input));
}

}  // namespace cee::nn
