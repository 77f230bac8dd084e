#pragma once

#include <cmath>
#include <optional>
#include <string_view>

#include "tgl/error.hpp"
#include "tgl/types.hpp"

namespace tgl {

enum class OptimizerKind { adam, sgd };

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

inline std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  return std::nullopt;
}

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First and second moment estimates for one parameter tensor.
struct Moments {
  Matrix first;
  Matrix second;

  static Moments zeros_like(const Matrix& param) {
    return {Matrix::Zero(param.rows(), param.cols()), Matrix::Zero(param.rows(), param.cols())};
  }
};

namespace detail {
inline void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError(what);
}
}  // namespace detail

/// One bias-corrected Adam update. `step` is the global step count,
/// starting at 1.
inline void adam_step(Matrix& param, const Matrix& grad, Moments& moments, double learning_rate,
                      std::size_t step, const AdamSettings& s = {}) {
  detail::check_same_shape(param, grad, "gradient shape does not match parameter");
  detail::check_same_shape(param, moments.first, "first moment shape does not match parameter");
  detail::check_same_shape(param, moments.second, "second moment shape does not match parameter");
  if (step == 0) throw InvalidArgument("adam step count starts at 1");

  moments.first = s.beta1 * moments.first + (1 - s.beta1) * grad;
  moments.second = s.beta2 * moments.second + (1 - s.beta2) * grad.cwiseAbs2();
  const double c1 = 1 - std::pow(s.beta1, static_cast<double>(step));
  const double c2 = 1 - std::pow(s.beta2, static_cast<double>(step));
  param.array() -= learning_rate * (moments.first.array() / c1) /
                   ((moments.second.array() / c2).sqrt() + s.epsilon);
}

inline void sgd_step(Matrix& param, const Matrix& grad, double learning_rate) {
  detail::check_same_shape(param, grad, "gradient shape does not match parameter");
  param -= learning_rate * grad;
}

}  // namespace tgl
