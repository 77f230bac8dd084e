#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tgl/error.hpp"
#include "tgl/relation_graph.hpp"
#include "tgl/types.hpp"

namespace tgl {

enum class Activation { relu, tanh, identity };

inline std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "?";
}

inline std::optional<Activation> parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  return std::nullopt;
}

inline Matrix activate(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::tanh: return z.array().tanh().matrix();
    case Activation::identity: return z;
  }
  return z;
}

/// Elementwise derivative of `a` evaluated at the pre-activation `z`.
/// relu'(0) is taken as 0.
inline Matrix activation_derivative(Activation a, const Matrix& z) {
  switch (a) {
    case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::tanh: return (1.0 - z.array().tanh().square()).matrix();
    case Activation::identity: return Matrix::Ones(z.rows(), z.cols());
  }
  return Matrix::Ones(z.rows(), z.cols());
}

/// Graph convolution stack H <- act(R H W) applied once per weight matrix.
/// Hidden layers use `activation`, the last layer `final_activation`.
struct GcnStack {
  std::vector<Matrix> weights;
  Activation activation = Activation::relu;
  Activation final_activation = Activation::identity;

  std::size_t depth() const noexcept { return weights.size(); }
  Eigen::Index input_dim() const { return weights.front().rows(); }
  Eigen::Index output_dim() const { return weights.back().cols(); }

  Activation activation_at(std::size_t layer) const {
    return layer + 1 == weights.size() ? final_activation : activation;
  }

  void validate() const {
    if (weights.empty()) throw ShapeError("stack has no layers");
    for (std::size_t l = 1; l < weights.size(); ++l) {
      if (weights[l - 1].cols() != weights[l].rows()) {
        throw ShapeError("layer " + std::to_string(l - 1) + " output width " +
                         std::to_string(weights[l - 1].cols()) + " does not match layer " +
                         std::to_string(l) + " input width " + std::to_string(weights[l].rows()));
      }
    }
  }

  /// Single layer with W = I and identity activation: output equals R H.
  static GcnStack identity(std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    return GcnStack{{Matrix::Identity(d, d)}, Activation::identity, Activation::identity};
  }
};

/// Glorot-uniform weights, W(l) ~ U[-s, s] with s = sqrt(6 / (d_l + d_{l+1})).
inline GcnStack init_stack(std::span<const std::size_t> layer_dims, Activation activation,
                           std::uint64_t seed, Activation final_activation = Activation::identity) {
  if (layer_dims.size() < 2) throw InvalidArgument("a stack needs at least one layer (two dims)");
  for (auto d : layer_dims) {
    if (d == 0) throw InvalidArgument("layer dimensions must be positive");
  }
  auto rng = make_rng(seed);
  GcnStack stack{{}, activation, final_activation};
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const double s = std::sqrt(6.0 / static_cast<double>(layer_dims[l] + layer_dims[l + 1]));
    std::uniform_real_distribution<double> dist(-s, s);
    Matrix w(static_cast<Eigen::Index>(layer_dims[l]), static_cast<Eigen::Index>(layer_dims[l + 1]));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = dist(rng);
    }
    stack.weights.push_back(std::move(w));
  }
  return stack;
}

/// Intermediates of one forward pass, plus the adjacency it used.
struct ForwardTape {
  NormalizedAdjacency adjacency;
  std::vector<Matrix> inputs;       // H(l)
  std::vector<Matrix> propagated;   // R H(l)
  std::vector<Matrix> preactivations;  // R H(l) W(l)

  std::size_t depth() const noexcept { return preactivations.size(); }
};

struct GcnOutput {
  FactorMatrix refined;
  ForwardTape tape;
};

inline GcnOutput gcn_forward(const GcnStack& stack, const FactorMatrix& features,
                             const NormalizedAdjacency& adjacency) {
  stack.validate();
  if (static_cast<std::size_t>(features.rows()) != adjacency.node_count()) {
    throw ShapeError("features have " + std::to_string(features.rows()) + " rows, adjacency has " +
                     std::to_string(adjacency.node_count()) + " nodes");
  }
  if (features.cols() != stack.input_dim()) {
    throw ShapeError("features have " + std::to_string(features.cols()) +
                     " columns, first layer expects " + std::to_string(stack.input_dim()));
  }
  GcnOutput out{features, ForwardTape{adjacency, {}, {}, {}}};
  for (std::size_t l = 0; l < stack.depth(); ++l) {
    Matrix propagated = adjacency.matrix() * out.refined;
    Matrix z = propagated * stack.weights[l];
    out.tape.inputs.push_back(std::move(out.refined));
    out.refined = activate(stack.activation_at(l), z);
    out.tape.propagated.push_back(std::move(propagated));
    out.tape.preactivations.push_back(std::move(z));
  }
  return out;
}

struct GcnGradients {
  std::vector<Matrix> weights;
  Matrix input;
};

/// Reverse pass through a forward tape. The adjacency is a constant.
inline GcnGradients gcn_backward(const GcnStack& stack, const ForwardTape& tape,
                                 const Matrix& output_grad) {
  stack.validate();
  if (tape.depth() != stack.depth()) {
    throw ShapeError("tape depth " + std::to_string(tape.depth()) + " does not match stack depth " +
                     std::to_string(stack.depth()));
  }
  const Matrix& last = tape.preactivations.back();
  if (output_grad.rows() != last.rows() || output_grad.cols() != last.cols()) {
    throw ShapeError("output gradient shape does not match stack output");
  }
  for (std::size_t l = 0; l < stack.depth(); ++l) {
    if (tape.preactivations[l].cols() != stack.weights[l].cols() ||
        tape.inputs[l].cols() != stack.weights[l].rows()) {
      throw ShapeError("tape was recorded with a different stack");
    }
  }

  GcnGradients grads{std::vector<Matrix>(stack.depth()), {}};
  Matrix g = output_grad;
  for (std::size_t l = stack.depth(); l-- > 0;) {
    g = g.cwiseProduct(activation_derivative(stack.activation_at(l), tape.preactivations[l]));
    grads.weights[l] = tape.propagated[l].transpose() * g;
    // R is symmetric, so R^T G W^T = R (G W^T).
    Matrix back = g * stack.weights[l].transpose();
    g = tape.adjacency.matrix() * back;
  }
  grads.input = std::move(g);
  return grads;
}

}  // namespace tgl
