#include "rarelab/escape.hpp"

#include "rarelab/errors.hpp"
#include "rarelab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace rarelab {

namespace {

struct LineFit {
    double intercept = 0.0;
    double slope = 0.0;
    double interceptSE = 0.0;
    double slopeSE = 0.0;
    std::vector<double> residuals;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 3 || y.size() != n) throw BadParam("line fit needs at least 3 matching points");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        f.residuals.push_back(r);
        sse += r * r;
    }
    const double s2 = sse / static_cast<double>(n - 2);
    f.slopeSE = std::sqrt(s2 / sxx);
    f.interceptSE = std::sqrt(s2 * (1.0 / static_cast<double>(n) + mx * mx / sxx));
    return f;
}

void check_ladder(std::span<const double> ladder, std::size_t minPoints) {
    if (ladder.size() < minPoints)
        throw BadParam("ladder needs at least " + std::to_string(minPoints) + " points");
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (!(ladder[i] > 0.0)) throw BadParam("ladder values must be positive");
        if (i > 0 && !(ladder[i] < ladder[i - 1])) throw BadParam("ladder must be strictly decreasing");
    }
}

/// |(lambda0 - lambda_eps) - nu0((P0 - P_eps) phi_eps)| with nu0(phi_eps) = 1.
double basic_identity_residual(const FiniteOperator& p0, const SpectralTriple& t0, const FiniteOperator& pEps,
                               const SpectralTriple& tEps) {
    const double norm = p0.pair(t0.nu, tEps.phi);
    if (norm == 0.0) return std::abs(t0.lambda - tEps.lambda);
    const Vector phi = tEps.phi / norm;
    const Vector l = p0.apply_dual(t0.nu) - pEps.apply_dual(t0.nu);
    return std::abs((t0.lambda - tEps.lambda) - p0.pair(l, phi));
}

FiniteOperator closed_operator(const PiecewiseMap& map, const Partition1D& part, bool complete) {
    FiniteOperator p = build_ulam_1d(map, part);
    return complete && map.truncation_defect() > 0.0 ? complete_truncation(p) : p;
}

}  // namespace

std::vector<double> geometric_ladder(double start, double ratio, int count) {
    if (!(start > 0.0) || !(ratio > 0.0 && ratio < 1.0) || count < 1)
        throw BadParam("ladder needs start > 0, ratio in (0, 1), count >= 1");
    std::vector<double> out;
    double v = start;
    for (int i = 0; i < count; ++i, v *= ratio) out.push_back(v);
    return out;
}

EscapeCurve escape_curve(const EscapeExperiment& exp) {
    check_ladder(exp.epsLadder, 1);
    if (!exp.holeFamily) throw BadParam("escape experiment needs a hole family");
    std::vector<HoleSpec> holes;
    for (double e : exp.epsLadder) holes.push_back(exp.holeFamily(e));

    EscapeCurve curve;
    for (std::size_t i = 1; i < holes.size(); ++i)
        if (!holes[i - 1].contains(holes[i])) curve.nested = false;
    if (!curve.nested) throw BadParam("hole family is not nested along the ladder");

    const Partition1D part = refine_for_holes(Partition1D::uniform(exp.gridSize), holes);
    FiniteOperator truncated = exp.builder ? exp.builder(exp.map, part) : build_ulam_1d(exp.map, part);
    curve.defect = exp.map.truncation_defect();
    curve.completed = exp.completeTruncation && curve.defect > 0.0;
    FiniteOperator p0 = curve.completed ? complete_truncation(truncated) : truncated;

    const SpectralTriple t0 = leading_eigentriple(p0, exp.eigen);
    curve.lambda0 = t0.lambda;
    curve.cells = part.cells();
    curve.maxCellWidth = part.max_width();

    PerturbationFamily fam{p0, [&](double e) { return mask_hole(p0, part, exp.holeFamily(e)); }, exp.epsLadder, t0};

    const std::size_t n = holes.size();
    curve.points.resize(n);
    std::vector<FiniteOperator> masked;
    masked.reserve(n);
    for (const auto& h : holes) masked.push_back(mask_hole(p0, part, h));

    parallel_for(n, [&](std::size_t i) {
        const SpectralTriple t = leading_eigentriple(masked[i], exp.eigen);
        EscapePoint& pt = curve.points[i];
        pt.eps = exp.epsLadder[i];
        pt.holeMeasure = holes[i].measure();
        pt.delta = delta_eps(fam, masked[i]);
        pt.lambda = t.lambda;
        pt.ratio = (t0.lambda - t.lambda) / pt.holeMeasure;
        pt.ratioDelta = pt.delta != 0.0 ? (t0.lambda - t.lambda) / pt.delta : 0.0;
        pt.phiMin = t.phi.minCoeff();
        pt.phiMax = t.phi.maxCoeff();
        pt.basicIdentityResidual = basic_identity_residual(p0, t0, masked[i], t);
        pt.solverResidual = t.residual;
        pt.iterations = t.iterations;
    });

    for (std::size_t i = 0; i < n; ++i) {
        curve.maxBasicIdentityResidual = std::max(curve.maxBasicIdentityResidual, curve.points[i].basicIdentityResidual);
        if (i > 0 && curve.points[i - 1].lambda > curve.points[i].lambda + 1e-10) curve.monotone = false;
    }

    if (n >= 2 && exp.qkMax >= 0) {
        auto slopeAt = [&](std::size_t i, QRoute& q) {
            const auto qk = q_sequence(fam, masked[i], exp.qkMax);
            const SeriesValue s = kl_series(t0.lambda, qk);
            if (i == n - 1) {
                q.qk = qk;
                q.series = s.value;
                q.lastTerm = s.lastTerm;
            }
            return s.value * curve.points[i].delta / curve.points[i].holeMeasure;
        };
        try {
            QRoute q;
            q.kMax = exp.qkMax;
            const double sMin = slopeAt(n - 1, q);
            const double sNext = slopeAt(n - 2, q);
            q.slope = richardson(exp.epsLadder[n - 1], sMin, exp.epsLadder[n - 2], sNext);
            q.uncertainty = std::abs(q.slope - sMin) + q.lastTerm;
            curve.qRoute = std::move(q);
        } catch (const ZeroDelta&) {
            curve.qRoute.reset();
        }
    }
    return curve;
}

const char* to_string(SlopeMethod m) { return m == SlopeMethod::richardson ? "richardson" : "regression"; }

SlopeEstimate slope_at_zero(std::span<const double> eps, std::span<const double> ratios, bool strict) {
    if (eps.size() != ratios.size()) throw DimensionMismatch("eps and ratio lists differ in length");
    if (eps.size() < 4) throw BadParam("slope extraction needs at least 4 ladder points");
    std::vector<std::size_t> order(eps.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eps[a] < eps[b]; });
    for (double e : eps)
        if (!(e > 0.0)) throw BadParam("slope extraction needs eps > 0 points");

    SlopeEstimate s;
    s.richardson = richardson(eps[order[0]], ratios[order[0]], eps[order[1]], ratios[order[1]]);
    std::vector<double> x, y;
    for (std::size_t k = 0; k < 4; ++k) {
        x.push_back(eps[order[k]]);
        y.push_back(ratios[order[k]]);
    }
    const LineFit fit = fit_line(x, y);
    s.regression = fit.intercept;
    s.regressionSE = fit.interceptSE;
    s.residuals = fit.residuals;
    s.value = s.richardson;
    s.method = SlopeMethod::richardson;
    const double gap = std::abs(s.richardson - s.regression);
    s.uncertainty = gap + s.regressionSE;
    const double floor = 1e-10 * std::max(1.0, std::abs(s.richardson));
    s.consistent = gap <= 5.0 * s.regressionSE + floor;
    if (strict && !s.consistent)
        throw Inconsistent("Richardson " + std::to_string(s.richardson) + " vs regression " +
                           std::to_string(s.regression) + " (SE " + std::to_string(s.regressionSE) + ")");
    return s;
}

SlopeEstimate slope_at_zero(const EscapeCurve& curve, bool againstDelta, bool strict) {
    std::vector<double> e, r;
    for (const auto& p : curve.points) {
        e.push_back(p.eps);
        r.push_back(againstDelta ? p.ratioDelta : p.ratio);
    }
    return slope_at_zero(e, r, strict);
}

double predicted_slope(const std::optional<PeriodicPoint>& periodic, double phiAtZ) {
    if (!periodic) return phiAtZ;
    return phiAtZ * (1.0 - 1.0 / periodic->multiplier);
}

double predicted_slope(const PiecewiseMap& map, double z, const std::function<double(double)>& density) {
    return predicted_slope(detect_periodic(map, z), density(z));
}

double golden_block_limit() {
    const double z = kGolden;
    return z * z * z * (1.0 + z * z) * (1.0 + z * z) / std::log(2.0);
}

GoldenBlockReport golden_block_experiment(int kMin, int kMax, std::size_t gridSize, int gaussBranches,
                                          const EigenOptions& eigen) {
    if (kMin < 1 || kMax < kMin) throw BadParam("golden blocks need 1 <= kMin <= kMax");
    std::vector<GoldenInterval> ivs;
    std::vector<HoleSpec> holes;
    for (int k = kMin; k <= kMax; ++k) {
        ivs.push_back(golden_epsilon_k(k));
        holes.push_back(HoleSpec::interval(ivs.back().left, ivs.back().right));
    }
    const Partition1D part = refine_for_holes(Partition1D::uniform(gridSize), holes);
    const FiniteOperator p0 = closed_operator(gauss(gaussBranches), part, true);
    const SpectralTriple t0 = leading_eigentriple(p0, eigen);

    GoldenBlockReport rep;
    rep.lambda0 = t0.lambda;
    rep.limit = golden_block_limit();
    rep.cells = part.cells();
    rep.points.resize(ivs.size());
    parallel_for(ivs.size(), [&](std::size_t i) {
        const SpectralTriple t = leading_eigentriple(mask_hole(p0, part, holes[i]), eigen);
        GoldenBlockPoint& pt = rep.points[i];
        pt.k = ivs[i].k;
        pt.interval = ivs[i];
        pt.lambda = t.lambda;
        pt.ratio = (t0.lambda - t.lambda) / std::pow(kGolden, 2.0 * pt.k);
        pt.gridLimited = ivs[i].length < 4.0 * part.max_width();
    });
    for (std::size_t i = 1; i < rep.points.size(); ++i)
        if (!(std::abs(rep.points[i].ratio - rep.limit) < std::abs(rep.points[i - 1].ratio - rep.limit)))
            rep.monotoneApproach = false;
    return rep;
}

CuspReport cusp_exponent(double gamma, std::span<const double> epsLadder, std::size_t gridSize,
                         const EigenOptions& eigen) {
    if (!(gamma > 0.6 && gamma <= 1.0)) throw BadParam("cusp experiment needs gamma in (0.6, 1]");
    check_ladder(epsLadder, 3);
    std::vector<HoleSpec> holes;
    for (double e : epsLadder) holes.push_back(HoleSpec::interval(1.0 - e, 1.0));
    const Partition1D part = refine_for_holes(Partition1D::uniform(gridSize), holes);
    const FiniteOperator p0 = build_ulam_1d(cusp(gamma), part);
    const SpectralTriple t0 = leading_eigentriple(p0, eigen);

    CuspReport rep;
    rep.gamma = gamma;
    rep.expectedExponent = 1.0 / gamma;
    rep.eps.assign(epsLadder.begin(), epsLadder.end());
    rep.oneMinusLambda.resize(holes.size());
    std::vector<double> resid(holes.size());
    parallel_for(holes.size(), [&](std::size_t i) {
        const FiniteOperator pe = mask_hole(p0, part, holes[i]);
        const SpectralTriple t = leading_eigentriple(pe, eigen);
        rep.oneMinusLambda[i] = t0.lambda - t.lambda;
        resid[i] = basic_identity_residual(p0, t0, pe, t);
    });
    rep.maxBasicIdentityResidual = *std::max_element(resid.begin(), resid.end());
    for (std::size_t i = 1; i < holes.size(); ++i)
        if (rep.oneMinusLambda[i] > rep.oneMinusLambda[i - 1] + 1e-10) rep.monotone = false;

    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < holes.size(); ++i) {
        lx.push_back(std::log(rep.eps[i]));
        ly.push_back(std::log(rep.oneMinusLambda[i]));
    }
    const LineFit fit = fit_line(lx, ly);
    rep.exponent = fit.slope;
    rep.exponentSE = fit.slopeSE;

    const std::size_t n = holes.size();
    rep.localExponent = (ly[n - 1] - ly[n - 2]) / (lx[n - 1] - lx[n - 2]);
    auto scaled = [&](std::size_t i) { return rep.oneMinusLambda[i] / std::pow(rep.eps[i], rep.expectedExponent); };
    rep.prefactor = richardson(rep.eps[n - 1], scaled(n - 1), rep.eps[n - 2], scaled(n - 2));

    const std::size_t right = part.cell_of(0.5);
    const std::size_t left = right == 0 ? 0 : right - 1;
    rep.phiHalf = 0.5 * (t0.phi[static_cast<Eigen::Index>(left)] + t0.phi[static_cast<Eigen::Index>(right)]);
    rep.phiHalfSpread = std::abs(t0.phi[static_cast<Eigen::Index>(left)] - t0.phi[static_cast<Eigen::Index>(right)]);
    return rep;
}

StaircaseReport staircase_diagnostic(const PiecewiseMap& map, Interval base, std::span<const double> epsLadder,
                                     std::size_t gridSize, const EigenOptions& eigen) {
    if (!(base.hi > base.lo)) throw BadParam("staircase base hole must be a nontrivial interval");
    check_ladder(epsLadder, 1);
    const double a = base.lo;
    if (epsLadder.front() > a) throw BadParam("ladder exceeds the room left of the base hole");
    std::vector<HoleSpec> holes{HoleSpec::interval(base.lo, base.hi)};
    for (double e : epsLadder) holes.push_back(HoleSpec::interval(a - e, base.hi));
    const Partition1D part = refine_for_holes(Partition1D::uniform(gridSize), holes);
    const FiniteOperator closed = closed_operator(map, part, true);
    const FiniteOperator p0 = mask_hole(closed, part, holes.front());
    const SpectralTriple t0 = leading_eigentriple(p0, eigen);

    StaircaseReport rep;
    rep.lambda0 = t0.lambda;

    // Forward orbit of a: first entry into the open base hole and a radius that provably follows it.
    {
        double x = a, deriv = 1.0;
        for (int step = 1; step <= 64; ++step) {
            const Branch& br = map.branch_at(x);
            deriv *= br.derivAbs(x);
            x = map(x);
            const double d = std::min(x - base.lo, base.hi - x);
            if (d > 0.0) {
                double r = 0.5 * d / deriv;
                double y = a - r;
                for (int k = 0; k < step; ++k) y = map(y);
                if (y > base.lo && y < base.hi) {
                    rep.trappedAfter = step;
                    rep.trappedRadius = r;
                }
                break;
            }
        }
    }

    rep.points.resize(epsLadder.size());
    parallel_for(epsLadder.size(), [&](std::size_t i) {
        const HoleSpec& h = holes[i + 1];
        const SpectralTriple t = leading_eigentriple(mask_hole(closed, part, h), eigen);
        double mass = 0.0;
        for (std::size_t c = 0; c < part.cells(); ++c) {
            const double extra = HoleSpec::interval(a - epsLadder[i], a).overlap(part.left(c), part.right(c));
            if (extra > 0.0) {
                const auto ci = static_cast<Eigen::Index>(c);
                mass += t0.phi[ci] * t0.nu[ci] * extra;
            }
        }
        rep.points[i] = {epsLadder[i], mass, t.lambda};
    });
    for (std::size_t i = 1; i < rep.points.size(); ++i)
        if (rep.points[i].mass > rep.points[i - 1].mass + 1e-15) rep.massMonotone = false;
    for (const auto& p : rep.points)
        if (p.eps <= rep.trappedRadius) rep.trappedDeviation = std::max(rep.trappedDeviation, std::abs(p.lambda - rep.lambda0));
    return rep;
}

CoupledReport coupled_sync_experiment(const PiecewiseMap& map1d, double delta, std::span<const double> epsLadder,
                                      int n, const EigenOptions& eigen) {
    check_ladder(epsLadder, 4);
    const FiniteOperator p0 = build_ulam_2d(map1d, delta, n);
    const SpectralTriple t0 = leading_eigentriple(p0, eigen);

    CoupledReport rep;
    rep.delta = delta;
    rep.n = n;
    rep.lambda0 = t0.lambda;
    rep.stochasticDefect = (p0.row_sums().array() - 1.0).abs().maxCoeff();

    // Diagonal density: average of the two cells adjacent to the diagonal on either side.
    const auto N = static_cast<Eigen::Index>(n);
    double integral = 0.0, diag = 0.0;
    for (Eigen::Index i = 0; i + 1 < N; ++i) {
        const double h = 0.5 * (t0.phi[i * N + i + 1] + t0.phi[(i + 1) * N + i]);
        const double x = static_cast<double>(i + 1) / n;
        const double s = map1d.branch_at(x).derivAbs(x);
        diag += h;
        integral += h * (1.0 - 1.0 / ((1.0 - 2.0 * delta) * s));
    }
    rep.diagonalMass = diag / static_cast<double>(n - 1);
    rep.prediction = integral / static_cast<double>(n - 1);

    rep.points.resize(epsLadder.size());
    for (std::size_t i = 0; i < epsLadder.size(); ++i) {
        const double e = epsLadder[i];
        const FiniteOperator pe = p0.with_row_scale(strip_keep_fractions(n, e), RowSums::substochastic);
        const SpectralTriple t = leading_eigentriple(pe, eigen);
        CoupledPoint& pt = rep.points[i];
        pt.eps = e;
        pt.stripArea = 2.0 * e - e * e;
        pt.lambda = t.lambda;
        pt.ratio = (t0.lambda - t.lambda) / (2.0 * e);
        pt.basicIdentityResidual = basic_identity_residual(p0, t0, pe, t);
        rep.maxBasicIdentityResidual = std::max(rep.maxBasicIdentityResidual, pt.basicIdentityResidual);
        if (i > 0 && rep.points[i - 1].lambda > pt.lambda + 1e-10) rep.monotone = false;
    }
    std::vector<double> e, r;
    for (const auto& p : rep.points) {
        e.push_back(p.eps);
        r.push_back(p.ratio);
    }
    rep.slope = slope_at_zero(e, r, false);
    return rep;
}

}  // namespace rarelab
