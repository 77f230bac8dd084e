#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tgl/cp_model.hpp"
#include "tgl/error.hpp"
#include "tgl/sparse_tensor.hpp"

namespace tgl {

struct SyntheticTensor {
  SparseTensor tensor;
  CpModel truth;
};

namespace detail {

inline std::size_t checked_volume(std::span<const std::size_t> shape) {
  if (shape.empty()) throw InvalidArgument("shape is empty");
  std::size_t volume = 1;
  for (auto s : shape) {
    if (s == 0) throw InvalidArgument("shape has a zero-size mode");
    if (volume > std::numeric_limits<std::size_t>::max() / s) {
      throw InvalidArgument("tensor volume overflows");
    }
    volume *= s;
  }
  return volume;
}

/// ceil(density * volume) distinct linear indices, ascending.
inline std::vector<std::size_t> sample_cells(std::size_t volume, double density, Rng& rng) {
  if (!(density > 0) || density > 1) throw InvalidArgument("density must lie in (0, 1]");
  // The tolerance keeps products like 0.3 * 1000 from rounding up to 301.
  const double expected = density * static_cast<double>(volume);
  if (expected < 1 - 1e-9) throw InvalidArgument("density * volume must be at least 1");
  const double want = std::ceil(expected - 1e-9);
  if (want > static_cast<double>(volume)) {
    throw InvalidArgument("requested entry count exceeds tensor volume");
  }
  const auto count = static_cast<std::size_t>(want);

  std::vector<std::size_t> cells;
  if (count * 2 > volume) {
    cells.resize(volume);
    for (std::size_t c = 0; c < volume; ++c) cells[c] = c;
    std::shuffle(cells.begin(), cells.end(), rng);
    cells.resize(count);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, volume - 1);
    std::unordered_set<std::size_t> seen;
    seen.reserve(count * 2);
    cells.reserve(count);
    while (cells.size() < count) {
      const auto c = pick(rng);
      if (seen.insert(c).second) cells.push_back(c);
    }
  }
  std::sort(cells.begin(), cells.end());
  return cells;
}

/// Observes `truth` at a random subset of cells, adding Gaussian noise.
inline SparseTensor observe(const CpModel& truth, std::span<const std::size_t> shape, double density,
                            double noise_std, Rng& rng) {
  if (!(noise_std >= 0) || !std::isfinite(noise_std)) {
    throw InvalidArgument("noise std must be finite and >= 0");
  }
  const auto cells = sample_cells(checked_volume(shape), density, rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  const std::size_t modes = shape.size();
  std::vector<std::size_t> indices(cells.size() * modes);
  std::vector<double> values(cells.size());
  for (std::size_t e = 0; e < cells.size(); ++e) {
    std::size_t rest = cells[e];
    for (std::size_t n = modes; n-- > 0;) {
      indices[e * modes + n] = rest % shape[n];
      rest /= shape[n];
    }
    double v = predict_unchecked(truth.factors,
                                 std::span<const std::size_t>(indices).subspan(e * modes, modes));
    if (noise_std > 0) v += noise_std * noise(rng);
    values[e] = v;
  }
  return SparseTensor(std::vector<std::size_t>(shape.begin(), shape.end()), std::move(indices),
                      std::move(values));
}

}  // namespace detail

/// Low-rank tensor with standard-normal ground-truth factors, observed at
/// ceil(density * volume) uniformly chosen cells.
inline SyntheticTensor generate_synthetic(std::span<const std::size_t> shape, std::size_t rank,
                                          double density, double noise_std, std::uint64_t seed) {
  if (rank == 0) throw InvalidArgument("rank must be positive");
  detail::checked_volume(shape);
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  CpModel truth{rank, {}};
  for (auto s : shape) {
    FactorMatrix f(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(rank));
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      for (Eigen::Index r = 0; r < f.cols(); ++r) f(i, r) = normal(rng);
    }
    truth.factors.push_back(std::move(f));
  }
  auto tensor = detail::observe(truth, shape, density, noise_std, rng);
  return {std::move(tensor), std::move(truth)};
}

struct ClusterSpec {
  std::size_t clusters = 4;
  /// Std of each row around its centroid.
  double spread = 0.1;
};

/// Like generate_synthetic, but every factor row is one of `clusters`
/// standard-normal centroids plus N(0, spread^2) noise, so each mode has
/// groups of near-identical dimensions.
inline SyntheticTensor generate_clustered(std::span<const std::size_t> shape, std::size_t rank,
                                          ClusterSpec clusters, double density, double noise_std,
                                          std::uint64_t seed) {
  if (rank == 0) throw InvalidArgument("rank must be positive");
  if (clusters.clusters == 0) throw InvalidArgument("cluster count must be positive");
  if (!(clusters.spread >= 0)) throw InvalidArgument("cluster spread must be >= 0");
  detail::checked_volume(shape);
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  CpModel truth{rank, {}};
  for (auto s : shape) {
    Matrix centroids(static_cast<Eigen::Index>(clusters.clusters), static_cast<Eigen::Index>(rank));
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      for (Eigen::Index r = 0; r < centroids.cols(); ++r) centroids(c, r) = normal(rng);
    }
    std::uniform_int_distribution<Eigen::Index> assign(0, centroids.rows() - 1);
    FactorMatrix f(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(rank));
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      const auto c = assign(rng);
      for (Eigen::Index r = 0; r < f.cols(); ++r) {
        f(i, r) = centroids(c, r) + clusters.spread * normal(rng);
      }
    }
    truth.factors.push_back(std::move(f));
  }
  auto tensor = detail::observe(truth, shape, density, noise_std, rng);
  return {std::move(tensor), std::move(truth)};
}

}  // namespace tgl
