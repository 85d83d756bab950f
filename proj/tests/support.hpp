#pragma once

#include "rarelab/finite_operator.hpp"

#include <cstdint>
#include <random>

namespace testing {

using rarelab::DenseMatrix;
using rarelab::FiniteOperator;
using rarelab::RowSums;
using rarelab::Vector;

/// Positive weights summing to one.
inline Vector random_weights(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.5, 1.5);
    Vector w(n);
    for (int i = 0; i < n; ++i) w[i] = u(rng);
    return w / w.sum();
}

inline Vector uniform_weights(int n) { return Vector::Constant(n, 1.0 / n); }

/// Dense nonnegative matrix with strictly positive entries and the given row sums.
inline DenseMatrix random_rows(int n, std::mt19937_64& rng, double rowLo, double rowHi) {
    std::uniform_real_distribution<double> u(0.0, 1.0), r(rowLo, rowHi);
    DenseMatrix m(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) m(i, j) = 0.05 + u(rng);
        m.row(i) *= r(rng) / m.row(i).sum();
    }
    return m;
}

inline FiniteOperator random_stochastic(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    DenseMatrix m = random_rows(n, rng, 1.0, 1.0);
    return FiniteOperator::from_dense(m, random_weights(n, rng), RowSums::stochastic);
}

inline FiniteOperator random_substochastic(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    DenseMatrix m = random_rows(n, rng, 0.6, 1.0);
    return FiniteOperator::from_dense(m, random_weights(n, rng), RowSums::substochastic);
}

/// Density-picture matrix: (P f) = A f with A = W^{-1} M^T W.
inline DenseMatrix density_matrix(const FiniteOperator& op) {
    const Vector& w = op.weights();
    return w.cwiseInverse().asDiagonal() * op.dense().transpose() * w.asDiagonal();
}

}  // namespace testing
