#pragma once

#include "rarelab/escape.hpp"
#include "rarelab/interval_maps.hpp"
#include "rarelab/spectral.hpp"
#include "rarelab/ulam.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace rarelab {

/// Continuous map with invariant components [0, z] and [z, 1] sharing the fixed point z.
struct TwoComponentMap {
    PiecewiseMap map;
    double z = 0.5;
    /// T'(z), equal from both sides.
    double slope = 3.0;
    double Lambda = 1.0 / 3.0;
    double m1 = 0.5;
    double m2 = 0.5;
};

/// Validates invariance, continuity at z and the fixed-point slope on sample points.
TwoComponentMap make_two_component(PiecewiseMap map, double z);

/// Each component is a three-branch zigzag of slope 3 onto itself, increasing at z.
TwoComponentMap two_component_zigzag(double z = 0.5);

/// Uniform partition with z inserted as a node.
Partition1D exchange_partition(const TwoComponentMap& tc, std::size_t cells);

struct ExchangePoint {
    double eps = 0.0;
    double lambda = 1.0;
    /// (1 - lambda) / eps
    double ratio = 0.0;
    double nextModulus = 0.0;
    /// |(1 - lambda) - chi((P - P_eps) phi_eps)| with chi(phi_eps) = 1, chi = 1 on I_1 and -1 on I_2.
    double basicIdentityResidual = 0.0;
    double solverResidual = 0.0;
};

/// Subleading eigenvalue of the noisy operator together with its diagnostics.
ExchangePoint exchange_point(const TwoComponentMap& tc, const FiniteOperator& closed, const Partition1D& part,
                             const NoiseKernelSpec& noise, const SubleadingOptions& opts = {});

/// Second eigenvalue of P after the noise step (1 when noise.scale = 0).
double exchange_eigenvalue(const TwoComponentMap& tc, const NoiseKernelSpec& noise, std::size_t cells);

struct MonteCarloEstimate {
    double value = 0.0;
    double standardError = 0.0;
    /// Deterministic bound on the error from truncating the series after `terms` terms.
    double tailBound = 0.0;
    std::size_t samples = 0;
    int terms = 0;
    double error() const noexcept { return standardError + tailBound; }
};

/// Smallest K with Lambda^K / (1 - Lambda) < bound.
int truncation_terms(double Lambda, double bound = 1e-6);

inline constexpr int kMonteCarloShards = 16;

/// E|sum_{k<=K} Lambda^{k-1} Z_k| for Z with values in [-zBound, zBound].
MonteCarloEstimate expected_abs_W(double Lambda, const std::function<double(std::mt19937_64&)>& sampler,
                                  double zBound, std::size_t samples, std::uint64_t seed);
MonteCarloEstimate expected_abs_W(double Lambda, const NoiseKernelSpec& kernel, std::size_t samples,
                                  std::uint64_t seed);

/// E|W_terms| from the characteristic function, E|X| = (2/pi) int_0^inf (1 - Re phi_X(t)) / t^2 dt.
double expected_abs_W_quadrature(double Lambda, const NoiseKernelSpec& kernel, int terms = 8);

struct ExchangePrediction {
    double alpha = 0.0;
    double beta = 0.0;
    double Lambda = 0.0;
    double EabsW = 0.0;
    double EabsWError = 0.0;
    double EZ = 0.0;
    /// (beta + alpha)(1 - Lambda) E|W| - (beta - alpha) E[Z], the value the limit derivation arrives at.
    double slope = 0.0;
    /// ((beta + alpha)/2)(1 - Lambda) E|W| + ((beta - alpha)/2) E[Z], the compact statement of the same limit.
    double introFormSlope = 0.0;
    double slopeError = 0.0;
    double introFormSlopeError = 0.0;
};

ExchangePrediction predicted_exchange_slope(const TwoComponentMap& tc, const NoiseKernelSpec& kernel,
                                            const MonteCarloEstimate& EabsW);

struct ThetaProfile {
    std::vector<double> zeta;
    std::vector<double> theta;
    /// Trapezoidal integral of 1 - sign(zeta) theta_inf(zeta) over the grid.
    double integral = 0.0;
    /// 2 E|W| from the same samples, and its Monte Carlo error.
    double twoEabsW = 0.0;
    double twoEabsWError = 0.0;
};

/// 1 - 2 P(W < -zeta) on the grid; samples are symmetrized (W and -W) for symmetric kernels.
ThetaProfile theta_infinity_profile(double Lambda, const NoiseKernelSpec& kernel, std::span<const double> zetaGrid,
                                    std::size_t samples, std::uint64_t seed);
/// Uniform grid of `points` values over [-(1 - Lambda)^{-1}, (1 - Lambda)^{-1}].
std::vector<double> theta_grid(double Lambda, std::size_t points);

struct ExchangeReport {
    explicit ExchangeReport(TwoComponentMap map) : tc(std::move(map)) {}
    TwoComponentMap tc;
    KernelShape kernel = KernelShape::bump;
    std::size_t cells = 0;
    std::vector<ExchangePoint> points;
    SlopeEstimate measured;
    MonteCarloEstimate EabsW;
    double EabsWQuadrature = 0.0;
    ExchangePrediction prediction;
    /// measured / prediction.slope - 1 and measured / prediction.introFormSlope - 1
    double relErrorDerivation = 0.0;
    double relErrorIntroForm = 0.0;
    double maxBasicIdentityResidual = 0.0;
    double scaleZeroLambda = 1.0;
    /// (1 - lambda(eps)) / (1 - lambda(2 eps)) at the two smallest points.
    double halvingRatio = 0.0;
};

ExchangeReport exchange_experiment(const TwoComponentMap& tc, KernelShape kernel, std::span<const double> epsLadder,
                                   std::size_t cells, std::size_t samples, std::uint64_t seed);

}  // namespace rarelab
