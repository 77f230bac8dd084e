#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace tgl {

/// Dense row-major matrix. Factor rows are read far more often than columns.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// I_n x R latent representation of one tensor mode.
using FactorMatrix = Matrix;

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream). Streams keep the draws of
/// unrelated components from shifting when one of them changes size.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace tgl
