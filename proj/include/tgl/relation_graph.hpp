#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "tgl/error.hpp"
#include "tgl/types.hpp"

namespace tgl {

inline constexpr std::size_t kDefaultKnnK = 10;

/// Pairwise cosine similarity of the rows of `features`.
///
/// A zero row is dissimilar (0) to every other row and similar (1) to
/// itself. The result is exactly symmetric with a unit diagonal.
inline Eigen::MatrixXd cosine_similarity(const FactorMatrix& features) {
  const Eigen::Index n = features.rows();
  Eigen::VectorXd norms = features.rowwise().norm();
  Eigen::MatrixXd sim = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (norms(i) == 0) continue;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (norms(j) == 0) continue;
      double s = features.row(i).dot(features.row(j)) / (norms(i) * norms(j));
      s = std::clamp(s, -1.0, 1.0);
      sim(i, j) = s;
      sim(j, i) = s;
    }
  }
  return sim;
}

struct Edge {
  std::size_t u;  // u < v
  std::size_t v;
  double weight;

  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Undirected similarity graph without self-edges. Edges are sorted by (u, v).
struct KnnGraph {
  std::size_t node_count = 0;
  std::size_t k = 0;
  std::vector<Edge> edges;

  std::vector<std::size_t> degrees() const {
    std::vector<std::size_t> deg(node_count, 0);
    for (const auto& e : edges) {
      ++deg[e.u];
      ++deg[e.v];
    }
    return deg;
  }

  friend bool operator==(const KnnGraph&, const KnnGraph&) = default;
};

namespace detail {

inline void check_similarity(const Eigen::MatrixXd& sim) {
  if (sim.rows() != sim.cols()) throw ShapeError("similarity matrix is not square");
  if (sim.rows() == 0) throw ShapeError("similarity matrix is empty");
  for (Eigen::Index i = 0; i < sim.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < sim.cols(); ++j) {
      if (!std::isfinite(sim(i, j)) || std::abs(sim(i, j) - sim(j, i)) > 1e-12) {
        throw InvalidArgument("similarity matrix is not symmetric and finite at (" +
                              std::to_string(i) + ", " + std::to_string(j) + ")");
      }
    }
  }
}

}  // namespace detail

/// For every node, the k most similar other nodes, best first. Ties go to
/// the lower node index. k is clamped to node_count - 1.
inline std::vector<std::vector<std::size_t>> top_k_neighbors(const Eigen::MatrixXd& sim,
                                                             std::size_t k) {
  detail::check_similarity(sim);
  if (k == 0) throw InvalidArgument("k must be positive");
  const auto n = static_cast<std::size_t>(sim.rows());
  k = std::min(k, n - 1);
  std::vector<std::vector<std::size_t>> out(n);
  std::vector<std::size_t> cand;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) cand.push_back(j);
    }
    auto better = [&](std::size_t a, std::size_t b) {
      const double sa = sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a));
      const double sb = sim(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
      return sa > sb || (sa == sb && a < b);
    };
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(), better);
    out[i].assign(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

/// KNN graph with OR-symmetrization: {i, j} is an edge when either node
/// selected the other. Weights are 1, or max(similarity, 0) when `weighted`.
inline KnnGraph build_knn_graph(const Eigen::MatrixXd& sim, std::size_t k, bool weighted = false) {
  const auto selections = top_k_neighbors(sim, k);
  const auto n = selections.size();
  KnnGraph g{n, std::min(k, n - 1), {}};
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : selections[i]) {
      const auto u = std::min(i, j);
      const auto v = std::max(i, j);
      const double w =
          weighted ? std::max(sim(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)), 0.0)
                   : 1.0;
      g.edges.push_back({u, v, w});
    }
  }
  std::sort(g.edges.begin(), g.edges.end(),
            [](const Edge& a, const Edge& b) { return a.u != b.u ? a.u < b.u : a.v < b.v; });
  g.edges.erase(std::unique(g.edges.begin(), g.edges.end(),
                            [](const Edge& a, const Edge& b) { return a.u == b.u && a.v == b.v; }),
                g.edges.end());
  return g;
}

/// D^{-1/2} (R + I) D^{-1/2}, the propagation matrix of a graph
/// convolution. Stored sparse; symmetric, non-negative, positive diagonal.
class NormalizedAdjacency {
 public:
  NormalizedAdjacency() = default;
  explicit NormalizedAdjacency(SparseMatrix matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows() != matrix_.cols()) throw ShapeError("adjacency is not square");
    matrix_.makeCompressed();
  }

  static NormalizedAdjacency identity(std::size_t n) {
    SparseMatrix eye(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    eye.setIdentity();
    return NormalizedAdjacency(std::move(eye));
  }

  std::size_t node_count() const noexcept { return static_cast<std::size_t>(matrix_.rows()); }
  const SparseMatrix& matrix() const noexcept { return matrix_; }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(matrix_); }

  bool operator==(const NormalizedAdjacency& other) const {
    if (matrix_.rows() != other.matrix_.rows() || matrix_.nonZeros() != other.matrix_.nonZeros()) {
      return false;
    }
    return dense() == other.dense();
  }

 private:
  SparseMatrix matrix_;
};

inline NormalizedAdjacency normalize_adjacency(const KnnGraph& graph) {
  if (graph.node_count == 0) throw InvalidArgument("graph has no nodes");
  std::vector<double> degree(graph.node_count, 1.0);
  for (const auto& e : graph.edges) {
    if (e.u >= e.v || e.v >= graph.node_count) throw InvalidArgument("malformed edge");
    if (!(e.weight >= 0) || !std::isfinite(e.weight)) {
      throw InvalidArgument("edge weight must be finite and >= 0");
    }
    degree[e.u] += e.weight;
    degree[e.v] += e.weight;
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(graph.node_count + 2 * graph.edges.size());
  for (std::size_t i = 0; i < graph.node_count; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    trips.emplace_back(ii, ii, 1.0 / degree[i]);
  }
  for (const auto& e : graph.edges) {
    const double w = e.weight / std::sqrt(degree[e.u] * degree[e.v]);
    trips.emplace_back(static_cast<Eigen::Index>(e.u), static_cast<Eigen::Index>(e.v), w);
    trips.emplace_back(static_cast<Eigen::Index>(e.v), static_cast<Eigen::Index>(e.u), w);
  }
  const auto n = static_cast<Eigen::Index>(graph.node_count);
  SparseMatrix m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  return NormalizedAdjacency(std::move(m));
}

}  // namespace tgl
