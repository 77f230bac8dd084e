#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tgl/error.hpp"
#include "tgl/sparse_tensor.hpp"
#include "tgl/types.hpp"

namespace tgl {

/// Rank-R CP model: one I_n x R factor matrix per mode.
struct CpModel {
  std::size_t rank = 0;
  std::vector<FactorMatrix> factors;

  std::size_t modes() const noexcept { return factors.size(); }

  std::vector<std::size_t> shape() const {
    std::vector<std::size_t> s;
    for (const auto& f : factors) s.push_back(static_cast<std::size_t>(f.rows()));
    return s;
  }
};

inline constexpr double kDefaultInitScale = 0.1;

/// Factors drawn i.i.d. uniform on [-scale, scale]. Mode n uses RNG stream n,
/// so adding a mode does not change the earlier factors.
inline CpModel init_factors(std::span<const std::size_t> shape, std::size_t rank, std::uint64_t seed,
                            double scale = kDefaultInitScale) {
  if (rank == 0) throw InvalidArgument("rank must be positive");
  if (shape.empty()) throw InvalidArgument("shape is empty");
  if (!(scale > 0) || !std::isfinite(scale)) throw InvalidArgument("init scale must be positive");
  CpModel model{rank, {}};
  for (std::size_t n = 0; n < shape.size(); ++n) {
    if (shape[n] == 0) throw InvalidArgument("mode " + std::to_string(n) + " has size 0");
    auto rng = make_rng(seed, n);
    std::uniform_real_distribution<double> dist(-scale, scale);
    FactorMatrix f(static_cast<Eigen::Index>(shape[n]), static_cast<Eigen::Index>(rank));
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      for (Eigen::Index r = 0; r < f.cols(); ++r) f(i, r) = dist(rng);
    }
    model.factors.push_back(std::move(f));
  }
  return model;
}

namespace detail {

inline double predict_unchecked(std::span<const FactorMatrix> factors,
                                std::span<const std::size_t> index) {
  const Eigen::Index rank = factors.front().cols();
  double sum = 0;
  for (Eigen::Index r = 0; r < rank; ++r) {
    double prod = 1;
    for (std::size_t n = 0; n < factors.size(); ++n) {
      prod *= factors[n](static_cast<Eigen::Index>(index[n]), r);
    }
    sum += prod;
  }
  return sum;
}

inline void check_factors(std::span<const FactorMatrix> factors) {
  if (factors.empty()) throw ShapeError("no factor matrices");
  for (const auto& f : factors) {
    if (f.cols() != factors.front().cols()) throw ShapeError("factor ranks differ");
  }
}

inline void check_against(std::span<const FactorMatrix> factors, const SparseTensor& data) {
  check_factors(factors);
  if (factors.size() != data.modes()) {
    throw ShapeError("model has " + std::to_string(factors.size()) + " modes, data has " +
                     std::to_string(data.modes()));
  }
  for (std::size_t n = 0; n < factors.size(); ++n) {
    if (static_cast<std::size_t>(factors[n].rows()) != data.shape()[n]) {
      throw ShapeError("factor " + std::to_string(n) + " has " +
                       std::to_string(factors[n].rows()) + " rows, mode size is " +
                       std::to_string(data.shape()[n]));
    }
  }
}

}  // namespace detail

/// sum_r prod_n factors[n](index[n], r)
inline double predict_entry(std::span<const FactorMatrix> factors,
                            std::span<const std::size_t> index) {
  detail::check_factors(factors);
  if (index.size() != factors.size()) throw ShapeError("index arity does not match model");
  for (std::size_t n = 0; n < factors.size(); ++n) {
    if (index[n] >= static_cast<std::size_t>(factors[n].rows())) {
      throw InvalidArgument("index " + std::to_string(index[n]) + " out of range for mode " +
                            std::to_string(n));
    }
  }
  return detail::predict_unchecked(factors, index);
}

/// Sum of squared residuals over the observed entries (no 1/2, no averaging).
inline double loss_observed(std::span<const FactorMatrix> factors, const SparseTensor& data) {
  detail::check_against(factors, data);
  double loss = 0;
  for (std::size_t e = 0; e < data.nnz(); ++e) {
    const double res = data.value(e) - detail::predict_unchecked(factors, data.index(e));
    loss += res * res;
  }
  return loss;
}

/// Gradient of loss_observed with respect to every factor, accumulated
/// entry by entry in storage order. Rows never touched by an observed
/// entry stay zero.
inline std::vector<Matrix> grad_cpd(std::span<const FactorMatrix> factors, const SparseTensor& data) {
  detail::check_against(factors, data);
  const std::size_t modes = factors.size();
  const Eigen::Index rank = factors.front().cols();
  std::vector<Matrix> grads;
  for (const auto& f : factors) grads.push_back(Matrix::Zero(f.rows(), f.cols()));

  Eigen::VectorXd prod(rank);
  for (std::size_t e = 0; e < data.nnz(); ++e) {
    const auto idx = data.index(e);
    const double scale = 2.0 * (detail::predict_unchecked(factors, idx) - data.value(e));
    for (std::size_t n = 0; n < modes; ++n) {
      prod.setConstant(scale);
      for (std::size_t m = 0; m < modes; ++m) {
        if (m == n) continue;
        prod.array() *= factors[m].row(static_cast<Eigen::Index>(idx[m])).transpose().array();
      }
      grads[n].row(static_cast<Eigen::Index>(idx[n])) += prod.transpose();
    }
  }
  return grads;
}

}  // namespace tgl
