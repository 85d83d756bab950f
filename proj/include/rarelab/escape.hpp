#pragma once

#include "rarelab/interval_maps.hpp"
#include "rarelab/perturbation.hpp"
#include "rarelab/spectral.hpp"
#include "rarelab/ulam.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace rarelab {

/// start, start*ratio, ..., start*ratio^(count-1)
std::vector<double> geometric_ladder(double start, double ratio, int count);

struct EscapeExperiment {
    PiecewiseMap map;
    /// Nested family: eps <= eps' implies holeFamily(eps) inside holeFamily(eps').
    std::function<HoleSpec(double)> holeFamily;
    std::vector<double> epsLadder;
    std::size_t gridSize = 4096;
    std::optional<double> prediction;
    /// Spread the mass lost to dropped branches uniformly (see complete_truncation).
    bool completeTruncation = true;
    /// Truncation of the q-series evaluated at the two smallest ladder points.
    int qkMax = 10;
    EigenOptions eigen{};
    /// Replaces build_ulam_1d for the closed operator (e.g. to read it from a cache).
    std::function<FiniteOperator(const PiecewiseMap&, const Partition1D&)> builder;
};

struct EscapePoint {
    double eps = 0.0;
    double holeMeasure = 0.0;
    /// nu0((P0 - P_eps) phi0)
    double delta = 0.0;
    double lambda = 0.0;
    /// (lambda0 - lambda) / holeMeasure
    double ratio = 0.0;
    /// (lambda0 - lambda) / delta
    double ratioDelta = 0.0;
    double phiMin = 0.0;
    double phiMax = 0.0;
    double basicIdentityResidual = 0.0;
    double solverResidual = 0.0;
    long iterations = 0;
};

struct QRoute {
    int kMax = 0;
    std::vector<double> qk;
    double series = 0.0;
    double lastTerm = 0.0;
    /// series * delta / holeMeasure at the smallest ladder point
    double slope = 0.0;
    double uncertainty = 0.0;
};

struct EscapeCurve {
    double lambda0 = 1.0;
    std::size_t cells = 0;
    double maxCellWidth = 0.0;
    /// Truncation defect of the map before completion.
    double defect = 0.0;
    bool completed = false;
    /// Ladder order (decreasing eps).
    std::vector<EscapePoint> points;
    bool nested = true;
    bool monotone = true;
    double maxBasicIdentityResidual = 0.0;
    std::optional<QRoute> qRoute;
};

/// Builds the refined partition, the closed operator, and the masked eigenvalues on the ladder.
EscapeCurve escape_curve(const EscapeExperiment& exp);

enum class SlopeMethod { richardson, regression };
const char* to_string(SlopeMethod m);

struct SlopeEstimate {
    double value = 0.0;
    SlopeMethod method = SlopeMethod::richardson;
    double richardson = 0.0;
    /// Intercept of the straight-line fit of ratio against eps over the four smallest points.
    double regression = 0.0;
    double regressionSE = 0.0;
    double uncertainty = 0.0;
    std::vector<double> residuals;
    bool consistent = true;
};

/// Richardson on the two smallest points with a regression cross-check.
/// Throws Inconsistent (when strict) if the two differ by more than 5 standard errors.
SlopeEstimate slope_at_zero(std::span<const double> eps, std::span<const double> ratios, bool strict = true);
SlopeEstimate slope_at_zero(const EscapeCurve& curve, bool againstDelta = false, bool strict = true);

/// phi0(z) (1 - 1/multiplier) at a periodic point, phi0(z) otherwise.
double predicted_slope(const std::optional<PeriodicPoint>& periodic, double phiAtZ);
double predicted_slope(const PiecewiseMap& map, double z, const std::function<double(double)>& density);

struct GoldenBlockPoint {
    int k = 0;
    GoldenInterval interval;
    double lambda = 0.0;
    double ratio = 0.0;
    bool gridLimited = false;
};

struct GoldenBlockReport {
    double lambda0 = 0.0;
    double limit = 0.0;
    std::size_t cells = 0;
    std::vector<GoldenBlockPoint> points;
    bool monotoneApproach = true;
};

/// z^3 (1 + z^2)^2 / ln 2 with z the golden mean.
double golden_block_limit();

GoldenBlockReport golden_block_experiment(int kMin, int kMax, std::size_t gridSize, int gaussBranches,
                                          const EigenOptions& eigen = {});

struct CuspReport {
    double gamma = 1.0;
    std::vector<double> eps;
    std::vector<double> oneMinusLambda;
    double exponent = 0.0;
    double exponentSE = 0.0;
    /// Log-log slope through the two smallest ladder points.
    double localExponent = 0.0;
    double expectedExponent = 1.0;
    /// Extrapolated (1 - lambda)/eps^(1/gamma).
    double prefactor = 0.0;
    /// phi0(1/2) from the closed operator (average of the two cells at 1/2).
    double phiHalf = 0.0;
    /// |phi0 left cell - phi0 right cell| at 1/2, a crude error bar for phiHalf.
    double phiHalfSpread = 0.0;
    double maxBasicIdentityResidual = 0.0;
    bool monotone = true;
};

CuspReport cusp_exponent(double gamma, std::span<const double> epsLadder, std::size_t gridSize,
                         const EigenOptions& eigen = {});

struct StaircasePoint {
    double eps = 0.0;
    double mass = 0.0;
    double lambda = 0.0;
};

struct StaircaseReport {
    double lambda0 = 0.0;
    std::vector<StaircasePoint> points;
    bool massMonotone = true;
    /// First n >= 1 with T^n(a) inside the open base hole, if any.
    std::optional<int> trappedAfter;
    /// Largest eps for which [a - eps, a] provably falls into the base hole (0 if not trapped).
    double trappedRadius = 0.0;
    /// max |lambda_eps - lambda0| over ladder points with eps below trappedRadius.
    double trappedDeviation = 0.0;
};

/// Holes [a - eps, a + len] grown from the base hole [a, a + len].
StaircaseReport staircase_diagnostic(const PiecewiseMap& map, Interval base, std::span<const double> epsLadder,
                                     std::size_t gridSize, const EigenOptions& eigen = {});

struct CoupledPoint {
    double eps = 0.0;
    double stripArea = 0.0;
    double lambda = 0.0;
    /// (1 - lambda) / (2 eps)
    double ratio = 0.0;
    double basicIdentityResidual = 0.0;
};

struct CoupledReport {
    double delta = 0.0;
    int n = 0;
    double lambda0 = 1.0;
    std::vector<CoupledPoint> points;
    SlopeEstimate slope;
    double prediction = 0.0;
    /// Integral of the regularized diagonal density.
    double diagonalMass = 0.0;
    bool monotone = true;
    double maxBasicIdentityResidual = 0.0;
    double stochasticDefect = 0.0;
};

CoupledReport coupled_sync_experiment(const PiecewiseMap& map1d, double delta, std::span<const double> epsLadder,
                                      int n, const EigenOptions& eigen = {});

}  // namespace rarelab
