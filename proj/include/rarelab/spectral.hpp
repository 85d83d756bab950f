#pragma once

#include "rarelab/finite_operator.hpp"

#include <complex>
#include <vector>

namespace rarelab {

/// Leading eigen-data of an operator. phi is a density, nu a functional; nu(phi) = 1.
struct SpectralTriple {
    double lambda = 0.0;
    Vector phi;
    Vector nu;
    /// max of the weighted 1-norm residual of phi and the sup-norm residual of nu.
    double residual = 0.0;
    long iterations = 0;
};

struct EigenOptions {
    double tol = 1e-12;
    long maxIter = 1'000'000;
    /// Iterate with P + shift*Id; a positive shift separates a Perron root from
    /// other eigenvalues of equal modulus (periodic operators).
    double shift = 0.0;
};

/**
 * Power iteration for the dominant eigenvalue of a nonnegative operator.
 * phi is scaled so that sum_i phi_i w_i = 1 and nu so that nu(phi) = 1.
 * An operator that annihilates its iterates (nilpotent) yields lambda = 0.
 */
SpectralTriple leading_eigentriple(const FiniteOperator& op, const EigenOptions& opts = {});
SpectralTriple leading_eigentriple(const FiniteOperator& op, double tol, long maxIter);

/// Density phi scaled so that reference(phi) = 1, with nu rescaled to keep nu(phi) = 1.
void normalize_against(const FiniteOperator& op, SpectralTriple& triple, const Vector& reference);

struct SubleadingResult {
    double lambda = 0.0;
    /// Eigen-density on the zero-integral subspace, scaled to unit weighted 1-norm.
    Vector phi;
    /// Largest modulus among the remaining Ritz values.
    double nextModulus = 0.0;
    double residual = 0.0;
    long iterations = 0;
};

struct SubleadingOptions {
    double tol = 1e-12;
    long maxIter = 200'000;
    int blockSize = 4;
    unsigned seed = 12345;
};

/**
 * Dominant eigenvalue of a stochastic operator restricted to {f : sum f_i w_i = 0}.
 * Block power iteration with re-projection f -> f - (sum f_i w_i) phi each step
 * and Rayleigh-Ritz on the block.
 */
SubleadingResult subleading_eigenpair(const FiniteOperator& op, const SpectralTriple& deflateAgainst,
                                      const SubleadingOptions& opts = {});
double subleading_eigenvalue(const FiniteOperator& op, const SpectralTriple& deflateAgainst,
                             double tol = 1e-12);

inline constexpr Eigen::Index kDenseOracleMaxDim = 512;

/// Full spectrum via dense decomposition, sorted by modulus, then real part, then imaginary part.
std::vector<std::complex<double>> dense_spectrum_oracle(const FiniteOperator& op);

}  // namespace rarelab
