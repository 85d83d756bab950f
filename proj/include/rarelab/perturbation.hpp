#pragma once

#include "rarelab/finite_operator.hpp"
#include "rarelab/spectral.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rarelab {

/// A one-parameter family eps -> P_eps sharing the partition of P_0.
struct PerturbationFamily {
    FiniteOperator p0;
    std::function<FiniteOperator(double)> pAt;
    /// Strictly decreasing positive values.
    std::vector<double> epsGrid;
    SpectralTriple triple0;
};

/// Builds a family and computes the unperturbed triple by power iteration.
PerturbationFamily make_family(FiniteOperator p0, std::function<FiniteOperator(double)> pAt,
                               std::vector<double> epsGrid, const EigenOptions& opts = {});

double delta_eps(const PerturbationFamily& fam, double eps);
double delta_eps(const PerturbationFamily& fam, const FiniteOperator& pEps);

/// Functional coefficients of nu0 (P0 - P_eps).
Vector perturbation_functional(const PerturbationFamily& fam, const FiniteOperator& pEps);

/**
 * Dual norm of nu0 (P0 - P_eps) when densities carry the sup norm:
 * sup_{|f| <= 1} |sum_i l_i f_i w_i| = sum_i |l_i| w_i.
 */
double eta_eps(const PerturbationFamily& fam, double eps);
double eta_eps(const PerturbationFamily& fam, const FiniteOperator& pEps);

inline constexpr double kZeroDeltaThreshold = 1e-14;

std::vector<double> q_sequence(const PerturbationFamily& fam, double eps, int kMax);
std::vector<double> q_sequence(const PerturbationFamily& fam, const FiniteOperator& pEps, int kMax);

struct SeriesValue {
    double value = 1.0;
    /// |lambda0^{-(kMax+1)} q_kMax|
    double lastTerm = 0.0;
};

SeriesValue kl_series(double lambda0, const std::vector<double>& qk);

/// First-order Richardson eliminant through (eps1, r1), (eps2, r2) with eps1 < eps2.
double richardson(double eps1, double r1, double eps2, double r2);

enum class EigenRoute { power, dense };

struct ResponseOptions {
    int kMax = 40;
    double tolerance = 1e-4;
    EigenRoute route = EigenRoute::power;
    EigenOptions eigen{};
};

struct ResponsePoint {
    double eps = 0.0;
    double lambda = 0.0;
    double delta = 0.0;
    double eta = 0.0;
    double ratio = 0.0;
    /// | (lambda0 - lambda_eps) - nu0((P0 - P_eps) phi_eps) | with nu0(phi_eps) = 1
    double basicIdentityResidual = 0.0;
    double phiSup = 0.0;
    bool lipschitzHolds = true;
};

struct ResponseReport {
    double lambda0 = 0.0;
    std::vector<ResponsePoint> perEps;
    int kMax = 0;
    std::vector<double> qk;
    double seriesValue = 0.0;
    double truncationTerm = 0.0;
    double extrapolatedRatio = 0.0;
    double tolerance = 0.0;
    double discrepancy = 0.0;
    bool zeroDeltaBranch = false;
    /// max |lambda_eps - lambda0| when the zero-delta branch is taken
    double zeroDeltaDeviation = 0.0;
    double lipschitzConstant = 0.0;
    bool lipschitzHolds = true;
    bool pass = false;
};

/// Largest real eigenvalue as returned by the selected route.
double leading_eigenvalue(const FiniteOperator& op, EigenRoute route, const EigenOptions& opts);

ResponseReport verify_response(const PerturbationFamily& fam, const ResponseOptions& opts = {});

/**
 * Random test families on a dense substochastic P0 with transitions M0:
 *   first_order     M_eps = M0 - eps D,           |D| <= M0 entrywise
 *   second_order    M_eps = M0 - eps D - eps^2 M0, with u0^T D nu0 = 0 so Delta_eps = eps^2 lambda0
 *   nu_orthogonal   M_eps = M0 - eps D,           D nu0 = 0 (nu0 stays a left eigenvector)
 *   phi_orthogonal  M_eps = M0 - eps D,           u0^T D = 0 (phi0 stays a right eigenvector)
 * where u0 = phi0 * w is the mass vector of phi0.
 */
enum class RandomFamilyKind { first_order, second_order, nu_orthogonal, phi_orthogonal };

const char* to_string(RandomFamilyKind k);
RandomFamilyKind random_family_kind_from_string(const std::string& s);

struct RandomFamily {
    PerturbationFamily family;
    RandomFamilyKind kind = RandomFamilyKind::first_order;
    int dim = 0;
    std::uint64_t seed = 0;
    /// 1 - |lambda_2| / lambda_0 of P0 from the dense oracle.
    double gap = 0.0;
    /// Number of draws of P0 needed to reach the requested gap.
    int draws = 0;
};

inline constexpr double kRandomFamilyMinGap = 0.2;

/// Ladder on which the kind's expansion is resolved in double precision.
std::vector<double> random_family_ladder(RandomFamilyKind kind);

RandomFamily random_family(std::uint64_t seed, int dim, RandomFamilyKind kind,
                           double minGap = kRandomFamilyMinGap);

}  // namespace rarelab
