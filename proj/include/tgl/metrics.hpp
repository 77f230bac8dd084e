#pragma once

#include <cmath>
#include <concepts>
#include <span>

#include "tgl/cp_model.hpp"
#include "tgl/error.hpp"
#include "tgl/sparse_tensor.hpp"

namespace tgl {

struct EvalResult {
  double nre = 0;
  std::size_t entry_count = 0;
  double sum_sq_error = 0;
  double sum_sq_truth = 0;
};

namespace detail {
inline EvalResult finish_nre(std::size_t count, double sse, double sst) {
  if (count == 0) throw MetricError("NRE is undefined on an empty set");
  if (sst == 0) throw MetricError("NRE is undefined when every truth value is zero");
  return {std::sqrt(sse) / std::sqrt(sst), count, sse, sst};
}
}  // namespace detail

/// Normalized reconstruction error sqrt(sum (x - x_hat)^2) / sqrt(sum x^2)
/// over the observed entries of `truth`. `predict` maps an index tuple
/// (std::span<const std::size_t>) to a prediction.
template <typename Predict>
  requires std::invocable<Predict&, std::span<const std::size_t>>
EvalResult nre(Predict&& predict, const SparseTensor& truth) {
  double sse = 0;
  double sst = 0;
  for (std::size_t e = 0; e < truth.nnz(); ++e) {
    const double x = truth.value(e);
    const double res = x - predict(truth.index(e));
    sse += res * res;
    sst += x * x;
  }
  return detail::finish_nre(truth.nnz(), sse, sst);
}

/// Predictions of a CP model at every observed index of `data`, in entry order.
inline Eigen::VectorXd predict_all(std::span<const FactorMatrix> factors, const SparseTensor& data) {
  detail::check_against(factors, data);
  const std::size_t modes = factors.size();
  const Eigen::Index rank = factors.front().cols();
  Eigen::VectorXd out(static_cast<Eigen::Index>(data.nnz()));
  Eigen::RowVectorXd prod(rank);
  for (std::size_t e = 0; e < data.nnz(); ++e) {
    const auto idx = data.index(e);
    prod = factors[0].row(static_cast<Eigen::Index>(idx[0]));
    for (std::size_t n = 1; n < modes; ++n) {
      prod.array() *= factors[n].row(static_cast<Eigen::Index>(idx[n])).array();
    }
    out(static_cast<Eigen::Index>(e)) = prod.sum();
  }
  return out;
}

/// Batched NRE of a CP model.
inline EvalResult nre(std::span<const FactorMatrix> factors, const SparseTensor& truth) {
  const Eigen::VectorXd pred = predict_all(factors, truth);
  const Eigen::Map<const Eigen::VectorXd> x(truth.values().data(),
                                            static_cast<Eigen::Index>(truth.nnz()));
  return detail::finish_nre(truth.nnz(), (x - pred).squaredNorm(), x.squaredNorm());
}

}  // namespace tgl
