#include "rarelab/perturbation.hpp"

#include "rarelab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace rarelab {

namespace {

void check_same_partition(const PerturbationFamily& fam, const FiniteOperator& pEps) {
    if (pEps.dim() != fam.p0.dim()) throw DimensionMismatch("P_eps and P_0 differ in dimension");
    if (fam.triple0.phi.size() != fam.p0.dim() || fam.triple0.nu.size() != fam.p0.dim())
        throw DimensionMismatch("unperturbed triple does not match P_0");
}

}  // namespace

PerturbationFamily make_family(FiniteOperator p0, std::function<FiniteOperator(double)> pAt,
                               std::vector<double> epsGrid, const EigenOptions& opts) {
    SpectralTriple t = leading_eigentriple(p0, opts);
    return PerturbationFamily{std::move(p0), std::move(pAt), std::move(epsGrid), std::move(t)};
}

double delta_eps(const PerturbationFamily& fam, double eps) {
    if (eps == 0.0) return 0.0;
    return delta_eps(fam, fam.pAt(eps));
}

double delta_eps(const PerturbationFamily& fam, const FiniteOperator& pEps) {
    check_same_partition(fam, pEps);
    const Vector g = fam.p0.apply(fam.triple0.phi) - pEps.apply(fam.triple0.phi);
    return fam.p0.pair(fam.triple0.nu, g);
}

Vector perturbation_functional(const PerturbationFamily& fam, const FiniteOperator& pEps) {
    check_same_partition(fam, pEps);
    return fam.p0.apply_dual(fam.triple0.nu) - pEps.apply_dual(fam.triple0.nu);
}

double eta_eps(const PerturbationFamily& fam, double eps) {
    if (eps == 0.0) return 0.0;
    return eta_eps(fam, fam.pAt(eps));
}

double eta_eps(const PerturbationFamily& fam, const FiniteOperator& pEps) {
    const Vector l = perturbation_functional(fam, pEps);
    return (l.array().abs() * fam.p0.weights().array()).sum();
}

std::vector<double> q_sequence(const PerturbationFamily& fam, double eps, int kMax) {
    return q_sequence(fam, fam.pAt(eps), kMax);
}

std::vector<double> q_sequence(const PerturbationFamily& fam, const FiniteOperator& pEps, int kMax) {
    if (kMax < 0) throw BadParam("kMax must be nonnegative");
    check_same_partition(fam, pEps);
    const double delta = delta_eps(fam, pEps);
    if (std::abs(delta) < kZeroDeltaThreshold)
        throw ZeroDelta("|Delta_eps| = " + std::to_string(std::abs(delta)));
    const Vector l = perturbation_functional(fam, pEps);
    Vector g = fam.p0.apply(fam.triple0.phi) - pEps.apply(fam.triple0.phi);
    std::vector<double> q;
    q.reserve(static_cast<std::size_t>(kMax) + 1);
    for (int k = 0; k <= kMax; ++k) {
        q.push_back(fam.p0.pair(l, g) / delta);
        if (k < kMax) g = pEps.apply(g);
    }
    return q;
}

SeriesValue kl_series(double lambda0, const std::vector<double>& qk) {
    SeriesValue s;
    double sum = 0.0;
    double pow = 1.0 / lambda0;
    for (double q : qk) {
        s.lastTerm = std::abs(pow * q);
        sum += pow * q;
        pow /= lambda0;
    }
    s.value = 1.0 - sum;
    return s;
}

double richardson(double eps1, double r1, double eps2, double r2) {
    const double rho = eps2 / eps1;
    return (rho * r1 - r2) / (rho - 1.0);
}

double leading_eigenvalue(const FiniteOperator& op, EigenRoute route, const EigenOptions& opts) {
    if (route == EigenRoute::power) return leading_eigentriple(op, opts).lambda;
    const auto spec = dense_spectrum_oracle(op);
    // Perron root: largest real eigenvalue among those of maximal modulus.
    double best = -1.0;
    for (const auto& z : spec)
        if (std::abs(z.imag()) <= 1e-12 * std::max(1.0, std::abs(z))) best = std::max(best, z.real());
    if (best < 0.0) throw NonConvergence("dense spectrum has no real eigenvalue");
    return best;
}

ResponseReport verify_response(const PerturbationFamily& fam, const ResponseOptions& opts) {
    const auto& grid = fam.epsGrid;
    if (grid.size() < 4) throw BadParam("epsilon ladder needs at least 4 points");
    for (std::size_t k = 1; k < grid.size(); ++k)
        if (!(grid[k] > 0.0) || grid[k] / grid[k - 1] > 0.5 + 1e-12)
            throw BadParam("epsilon ladder must be decreasing with ratio <= 1/2");

    ResponseReport rep;
    rep.kMax = opts.kMax;
    rep.tolerance = opts.tolerance;
    rep.lambda0 = opts.route == EigenRoute::dense
                      ? leading_eigenvalue(fam.p0, EigenRoute::dense, opts.eigen)
                      : fam.triple0.lambda;
    const double idTol = 10.0 * opts.eigen.tol;

    std::size_t zeroCount = 0;
    bool identityOk = true;
    std::vector<double> powerLambda;
    for (double eps : grid) {
        const FiniteOperator pe = fam.pAt(eps);
        ResponsePoint pt;
        pt.eps = eps;
        SpectralTriple te = leading_eigentriple(pe, opts.eigen);
        powerLambda.push_back(te.lambda);
        pt.lambda = opts.route == EigenRoute::dense ? leading_eigenvalue(pe, EigenRoute::dense, opts.eigen)
                                                    : te.lambda;
        pt.delta = delta_eps(fam, pe);
        pt.eta = eta_eps(fam, pe);

        // Basic identity with phi_eps normalized against nu0.
        normalize_against(pe, te, fam.triple0.nu);
        const Vector l = perturbation_functional(fam, pe);
        pt.basicIdentityResidual =
            std::abs((fam.triple0.lambda - te.lambda) - fam.p0.pair(l, te.phi));
        identityOk = identityOk && pt.basicIdentityResidual <= idTol;
        pt.phiSup = te.phi.cwiseAbs().maxCoeff();

        if (std::abs(pt.delta) < kZeroDeltaThreshold) {
            ++zeroCount;
            pt.ratio = std::nan("");
        } else {
            pt.ratio = (rep.lambda0 - pt.lambda) / pt.delta;
        }
        rep.perEps.push_back(pt);
    }

    for (const auto& pt : rep.perEps) rep.lipschitzConstant = std::max(rep.lipschitzConstant, pt.phiSup);
    for (std::size_t k = 0; k < rep.perEps.size(); ++k) {
        auto& pt = rep.perEps[k];
        pt.lipschitzHolds = std::abs(fam.triple0.lambda - powerLambda[k]) <=
                            rep.lipschitzConstant * pt.eta + idTol;
        rep.lipschitzHolds = rep.lipschitzHolds && pt.lipschitzHolds;
    }

    if (zeroCount == grid.size()) {
        rep.zeroDeltaBranch = true;
        for (const auto& pt : rep.perEps)
            rep.zeroDeltaDeviation = std::max(rep.zeroDeltaDeviation, std::abs(pt.lambda - rep.lambda0));
        rep.extrapolatedRatio = std::nan("");
        rep.seriesValue = std::nan("");
        rep.pass = rep.zeroDeltaDeviation <= idTol && identityOk && rep.lipschitzHolds;
        return rep;
    }
    if (zeroCount != 0)
        throw ZeroDelta("Delta_eps vanishes on part of the ladder only (" + std::to_string(zeroCount) +
                        " of " + std::to_string(grid.size()) + " points)");

    const auto& a = rep.perEps[grid.size() - 1];
    const auto& b = rep.perEps[grid.size() - 2];
    rep.extrapolatedRatio = richardson(a.eps, a.ratio, b.eps, b.ratio);

    rep.qk = q_sequence(fam, a.eps, opts.kMax);
    const SeriesValue sv = kl_series(fam.triple0.lambda, rep.qk);
    rep.seriesValue = sv.value;
    rep.truncationTerm = sv.lastTerm;
    rep.discrepancy = std::abs(rep.extrapolatedRatio - rep.seriesValue);
    rep.pass = rep.discrepancy <= opts.tolerance && identityOk && rep.lipschitzHolds;
    return rep;
}

const char* to_string(RandomFamilyKind k) {
    switch (k) {
        case RandomFamilyKind::first_order: return "first_order";
        case RandomFamilyKind::second_order: return "second_order";
        case RandomFamilyKind::nu_orthogonal: return "nu_orthogonal";
        case RandomFamilyKind::phi_orthogonal: return "phi_orthogonal";
    }
    return "?";
}

RandomFamilyKind random_family_kind_from_string(const std::string& s) {
    for (auto k : {RandomFamilyKind::first_order, RandomFamilyKind::second_order, RandomFamilyKind::nu_orthogonal,
                   RandomFamilyKind::phi_orthogonal})
        if (s == to_string(k)) return k;
    throw BadParam("unknown family kind '" + s + "'");
}

std::vector<double> random_family_ladder(RandomFamilyKind kind) {
    switch (kind) {
        // Delta ~ eps: tiny eps keeps the truncated q-series tail below 1e-5.
        case RandomFamilyKind::first_order: return {4e-7, 2e-7, 1e-7, 5e-8};
        // Row sums stay below 0.99 (1 + 2 eps) <= 1.
        default: return {4e-3, 2e-3, 1e-3, 5e-4};
    }
}

RandomFamily random_family(std::uint64_t seed, int dim, RandomFamilyKind kind, double minGap) {
    if (dim < 2 || dim > kDenseOracleMaxDim) throw BadParam("family dimension must lie in [2, 512]");
    const auto n = static_cast<Eigen::Index>(dim);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0), sym(-1.0, 1.0);

    DenseMatrix m0;
    Vector w;
    double gap = 0.0;
    int draws = 0;
    for (;;) {
        if (++draws > 100) throw BadParam("no draw reached spectral gap " + std::to_string(minGap));
        m0 = DenseMatrix::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j)
                if (unit(rng) < 0.5) m0(i, j) = unit(rng);
            m0(i, (i + 1) % n) += 0.5;  // a cycle keeps M0 irreducible
            m0.row(i) *= (0.7 + 0.29 * unit(rng)) / m0.row(i).sum();
        }
        w = Vector::NullaryExpr(n, [&](Eigen::Index) { return 0.5 + unit(rng); });
        w /= w.sum();
        const auto spec = dense_spectrum_oracle(FiniteOperator::from_dense(m0, w, RowSums::substochastic));
        gap = 1.0 - std::abs(spec[1]) / std::abs(spec[0]);
        if (gap >= minGap) break;
    }

    FiniteOperator p0 = FiniteOperator::from_dense(m0, w, RowSums::substochastic);
    const SpectralTriple t0 = leading_eigentriple(p0, EigenOptions{1e-14, 1'000'000, 0.0});
    const Vector u0 = t0.phi.cwiseProduct(w);
    const Vector& nu0 = t0.nu;

    DenseMatrix d = m0.unaryExpr([&](double x) { return x * sym(rng); });
    switch (kind) {
        case RandomFamilyKind::first_order: {
            // Random signs can nearly cancel in nu0 D phi0; with Delta near 1e-12 the measured ratio
            // drowns in eigenvalue roundoff. Keep the first-order coefficient at 5% of its maximum.
            const double full = u0.dot(m0 * nu0), c = u0.dot(d * nu0) / full;
            if (std::abs(c) < 0.05) d += ((c < 0.0 ? -0.05 : 0.05) - c) * m0;
            break;
        }
        case RandomFamilyKind::second_order: {
            const double c = u0.dot(d * nu0) / u0.dot(m0 * nu0);
            d -= c * m0;
            break;
        }
        case RandomFamilyKind::nu_orthogonal:
            for (Eigen::Index i = 0; i < n; ++i) {
                const double c = d.row(i).dot(nu0) / m0.row(i).dot(nu0);
                d.row(i) -= c * m0.row(i);
            }
            break;
        case RandomFamilyKind::phi_orthogonal:
            for (Eigen::Index j = 0; j < n; ++j) {
                const double c = u0.dot(d.col(j)) / u0.dot(m0.col(j));
                d.col(j) -= c * m0.col(j);
            }
            break;
    }

    const bool quadratic = kind == RandomFamilyKind::second_order;
    auto pAt = [m0, d, w, quadratic](double eps) {
        DenseMatrix m = m0 - eps * d;
        if (quadratic) m -= eps * eps * m0;
        return FiniteOperator::from_dense(m, w, RowSums::substochastic);
    };
    RandomFamily out{PerturbationFamily{std::move(p0), pAt, random_family_ladder(kind), t0}, kind, dim, seed, gap,
                     draws};
    return out;
}

}  // namespace rarelab
