#include "rarelab/metastab.hpp"

#include "rarelab/errors.hpp"
#include "rarelab/parallel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace rarelab {

namespace {

std::mt19937_64 shard_engine(std::uint64_t seed, int shard) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(shard)};
    return std::mt19937_64(seq);
}

std::size_t shard_size(std::size_t samples, int shard) {
    const auto s = static_cast<std::size_t>(shard);
    const std::size_t base = samples / kMonteCarloShards;
    return base + (s < samples % kMonteCarloShards ? 1 : 0);
}

/// Draws `samples` truncated sums W_K across the fixed shards.
std::vector<std::vector<double>> draw_W(double Lambda, const std::function<double(std::mt19937_64&)>& sampler,
                                        int terms, std::size_t samples, std::uint64_t seed) {
    std::vector<std::vector<double>> shards(kMonteCarloShards);
    parallel_for(kMonteCarloShards, [&](std::size_t s) {
        const int shard = static_cast<int>(s);
        auto rng = shard_engine(seed, shard);
        auto& out = shards[s];
        out.resize(shard_size(samples, shard));
        for (double& w : out) {
            double sum = 0.0, factor = 1.0;
            for (int k = 0; k < terms; ++k, factor *= Lambda) sum += factor * sampler(rng);
            w = sum;
        }
    });
    return shards;
}

void check_lambda(double Lambda) {
    if (!(Lambda > 0.0 && Lambda < 1.0)) throw BadParam("Lambda must lie in (0, 1)");
}

}  // namespace

TwoComponentMap make_two_component(PiecewiseMap map, double z) {
    if (!(z > 0.0 && z < 1.0)) throw BadParam("component boundary z must lie in (0, 1)");
    const double tz = map(z);
    if (std::abs(tz - z) > 1e-12) throw BadParam("z is not a fixed point of the map");
    for (int i = 1; i < 200; ++i) {
        const double x1 = z * i / 200.0;
        const double x2 = z + (1.0 - z) * i / 200.0;
        if (map(x1) > z + 1e-12) throw BadParam("[0, z] is not invariant");
        if (map(x2) < z - 1e-12) throw BadParam("[z, 1] is not invariant");
    }
    // One-sided slopes at z from the branches adjacent to z.
    const Branch* left = nullptr;
    const Branch* right = nullptr;
    for (const auto& b : map.branches()) {
        if (b.domainRight == z) left = &b;
        if (b.domainLeft == z) right = &b;
    }
    if (!left || !right) throw BadParam("z must be a branch endpoint");
    if (!left->increasing() || !right->increasing() || left->imageAtRight != z || right->imageAtLeft != z)
        throw BadParam("map must be continuous and increasing at z");
    const double h = 1e-7 * std::min(z, 1.0 - z);
    const double sl = left->derivAbs(z - h), sr = right->derivAbs(z + h);
    if (std::abs(sl - sr) > 1e-6 * sl) throw BadParam("one-sided slopes at z differ");
    if (!(sl > 1.0)) throw BadParam("slope at z must exceed 1");

    TwoComponentMap tc{std::move(map), z, sl, 1.0 / sl, z, 1.0 - z};
    return tc;
}

TwoComponentMap two_component_zigzag(double z) {
    if (!(z > 0.0 && z < 1.0)) throw BadParam("component boundary z must lie in (0, 1)");
    const double a = z / 3.0, b = (1.0 - z) / 3.0;
    std::vector<AffineBranchSpec> specs{
        {0.0, a, 0.0, z},           {a, 2.0 * a, z, 0.0},         {2.0 * a, z, 0.0, z},
        {z, z + b, z, 1.0},         {z + b, z + 2.0 * b, 1.0, z}, {z + 2.0 * b, 1.0, z, 1.0},
    };
    PiecewiseMap m = piecewise_linear("zigzag2", specs);
    m.set_descriptor("zigzag2:" + std::to_string(z));
    return make_two_component(std::move(m), z);
}

Partition1D exchange_partition(const TwoComponentMap& tc, std::size_t cells) {
    return refine_for_hole(Partition1D::uniform(cells), HoleSpec::interval(tc.z, tc.z));
}

ExchangePoint exchange_point(const TwoComponentMap& tc, const FiniteOperator& closed, const Partition1D& part,
                             const NoiseKernelSpec& noise, const SubleadingOptions& opts) {
    if (part.node_index(tc.z) == Partition1D::npos) throw BadParam("z must be a partition node");
    const FiniteOperator pe = compose_noise(closed, part, noise);
    const SpectralTriple t = leading_eigentriple(pe);
    const SubleadingResult sub = subleading_eigenpair(pe, t, opts);

    ExchangePoint pt;
    pt.eps = noise.scale;
    pt.lambda = sub.lambda;
    pt.ratio = noise.scale > 0.0 ? (1.0 - sub.lambda) / noise.scale : 0.0;
    pt.nextModulus = sub.nextModulus;
    pt.solverResidual = sub.residual;

    Vector chi(closed.dim());
    for (std::size_t i = 0; i < part.cells(); ++i) chi[static_cast<Eigen::Index>(i)] = part.right(i) <= tc.z ? 1.0 : -1.0;
    const double norm = closed.pair(chi, sub.phi);
    if (norm != 0.0) {
        const Vector phi = sub.phi / norm;
        const Vector l = closed.apply_dual(chi) - pe.apply_dual(chi);
        pt.basicIdentityResidual = std::abs((1.0 - sub.lambda) - closed.pair(l, phi));
    }
    return pt;
}

double exchange_eigenvalue(const TwoComponentMap& tc, const NoiseKernelSpec& noise, std::size_t cells) {
    const Partition1D part = exchange_partition(tc, cells);
    const FiniteOperator closed = build_ulam_1d(tc.map, part);
    return exchange_point(tc, closed, part, noise).lambda;
}

int truncation_terms(double Lambda, double bound) {
    check_lambda(Lambda);
    int k = 1;
    while (std::pow(Lambda, k) / (1.0 - Lambda) >= bound) ++k;
    return k;
}

MonteCarloEstimate expected_abs_W(double Lambda, const std::function<double(std::mt19937_64&)>& sampler,
                                  double zBound, std::size_t samples, std::uint64_t seed) {
    check_lambda(Lambda);
    if (samples < 2) throw BadParam("need at least 2 samples");
    MonteCarloEstimate est;
    est.terms = truncation_terms(Lambda);
    est.tailBound = zBound * std::pow(Lambda, est.terms) / (1.0 - Lambda);
    est.samples = samples;
    const auto shards = draw_W(Lambda, sampler, est.terms, samples, seed);
    double sum = 0.0, sumSq = 0.0;
    for (const auto& shard : shards) {
        double s = 0.0, s2 = 0.0;
        for (double w : shard) {
            s += std::abs(w);
            s2 += w * w;
        }
        sum += s;
        sumSq += s2;
    }
    const double n = static_cast<double>(samples);
    est.value = sum / n;
    const double var = std::max(0.0, (sumSq - n * est.value * est.value) / (n - 1.0));
    est.standardError = std::sqrt(var / n);
    return est;
}

MonteCarloEstimate expected_abs_W(double Lambda, const NoiseKernelSpec& kernel, std::size_t samples,
                                  std::uint64_t seed) {
    return expected_abs_W(
        Lambda, [&kernel](std::mt19937_64& rng) { return kernel.sample(rng); }, 1.0, samples, seed);
}

double expected_abs_W_quadrature(double Lambda, const NoiseKernelSpec& kernel, int terms) {
    check_lambda(Lambda);
    if (terms < 1) throw BadParam("quadrature needs at least one term");
    auto phiW = [&](double t) {
        double p = 1.0, s = t;
        for (int k = 0; k < terms; ++k, s *= Lambda) p *= kernel.characteristic(s);
        return p;
    };
    auto integrand = [&](double t) { return (1.0 - phiW(t)) / (t * t); };
    constexpr double cutoff = 2000.0;
    constexpr double panel = 0.5 * std::numbers::pi;
    double total = 0.0;
    for (double a = 0.0; a < cutoff; a += panel)
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, a, std::min(a + panel, cutoff), 5, 1e-13);
    // Beyond the cutoff phi_W is negligible and the integrand is 1/t^2.
    total += 1.0 / cutoff;
    return 2.0 / std::numbers::pi * total;
}

ExchangePrediction predicted_exchange_slope(const TwoComponentMap& tc, const NoiseKernelSpec& kernel,
                                            const MonteCarloEstimate& EabsW) {
    ExchangePrediction p;
    p.alpha = 1.0 / (2.0 * tc.m1);
    p.beta = 1.0 / (2.0 * tc.m2);
    p.Lambda = tc.Lambda;
    p.EabsW = EabsW.value;
    p.EabsWError = EabsW.error();
    p.EZ = kernel.mean();
    const double ab = p.alpha + p.beta;
    p.slope = ab * (1.0 - p.Lambda) * p.EabsW - (p.beta - p.alpha) * p.EZ;
    p.introFormSlope = 0.5 * ab * (1.0 - p.Lambda) * p.EabsW + 0.5 * (p.beta - p.alpha) * p.EZ;
    p.slopeError = ab * (1.0 - p.Lambda) * p.EabsWError;
    p.introFormSlopeError = 0.5 * p.slopeError;
    return p;
}

std::vector<double> theta_grid(double Lambda, std::size_t points) {
    check_lambda(Lambda);
    if (points < 3) throw BadParam("theta grid needs at least 3 points");
    const double c = 1.0 / (1.0 - Lambda);
    std::vector<double> g(points);
    for (std::size_t i = 0; i < points; ++i) g[i] = -c + 2.0 * c * static_cast<double>(i) / static_cast<double>(points - 1);
    if (points % 2 == 1) g[points / 2] = 0.0;
    return g;
}

ThetaProfile theta_infinity_profile(double Lambda, const NoiseKernelSpec& kernel, std::span<const double> zetaGrid,
                                    std::size_t samples, std::uint64_t seed) {
    check_lambda(Lambda);
    if (zetaGrid.size() < 2) throw BadParam("theta profile needs at least 2 grid points");
    const int terms = truncation_terms(Lambda);
    auto shards = draw_W(Lambda, [&kernel](std::mt19937_64& rng) { return kernel.sample(rng); }, terms, samples, seed);
    std::vector<double> w;
    w.reserve(2 * samples);
    for (auto& s : shards) {
        for (double x : s) {
            w.push_back(x);
            w.push_back(-x);  // both built-in kernels are symmetric
        }
        s = {};
    }
    std::sort(w.begin(), w.end());

    ThetaProfile prof;
    prof.zeta.assign(zetaGrid.begin(), zetaGrid.end());
    const double n = static_cast<double>(w.size());
    for (double zeta : prof.zeta) {
        const auto below = static_cast<double>(std::lower_bound(w.begin(), w.end(), -zeta) - w.begin());
        prof.theta.push_back(1.0 - 2.0 * below / n);
    }
    auto integrand = [&](std::size_t i) {
        const double z = prof.zeta[i];
        const double sgn = z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
        return 1.0 - sgn * prof.theta[i];
    };
    for (std::size_t i = 1; i < prof.zeta.size(); ++i)
        prof.integral += 0.5 * (prof.zeta[i] - prof.zeta[i - 1]) * (integrand(i) + integrand(i - 1));

    // Each pair (W, -W) shares |W|, so the independent sample count is `samples`.
    const double m = static_cast<double>(samples);
    double sum = 0.0, sumSq = 0.0;
    for (double x : w) {
        sum += std::abs(x);
        sumSq += x * x;
    }
    const double mean = sum / n;
    const double var = std::max(0.0, sumSq / n - mean * mean) * m / (m - 1.0);
    prof.twoEabsW = 2.0 * mean;
    prof.twoEabsWError = 2.0 * (std::sqrt(var / m) + std::pow(Lambda, terms) / (1.0 - Lambda));
    return prof;
}

ExchangeReport exchange_experiment(const TwoComponentMap& tc, KernelShape kernel, std::span<const double> epsLadder,
                                   std::size_t cells, std::size_t samples, std::uint64_t seed) {
    if (epsLadder.size() < 4) throw BadParam("exchange experiment needs at least 4 ladder points");
    ExchangeReport rep(tc);
    rep.kernel = kernel;
    const Partition1D part = exchange_partition(tc, cells);
    rep.cells = part.cells();
    const FiniteOperator closed = build_ulam_1d(tc.map, part);

    rep.scaleZeroLambda = exchange_point(tc, closed, part, NoiseKernelSpec{kernel, 0.0}).lambda;
    rep.points.resize(epsLadder.size());
    for (std::size_t i = 0; i < epsLadder.size(); ++i) {
        rep.points[i] = exchange_point(tc, closed, part, NoiseKernelSpec{kernel, epsLadder[i]});
        rep.maxBasicIdentityResidual = std::max(rep.maxBasicIdentityResidual, rep.points[i].basicIdentityResidual);
    }
    std::vector<double> e, r;
    for (const auto& p : rep.points) {
        e.push_back(p.eps);
        r.push_back(p.ratio);
    }
    rep.measured = slope_at_zero(e, r, false);
    const std::size_t n = rep.points.size();
    rep.halvingRatio = (1.0 - rep.points[n - 1].lambda) / (1.0 - rep.points[n - 2].lambda);

    const NoiseKernelSpec k{kernel, 1.0};
    rep.EabsW = expected_abs_W(tc.Lambda, k, samples, seed);
    rep.EabsWQuadrature = expected_abs_W_quadrature(tc.Lambda, k, 8);
    rep.prediction = predicted_exchange_slope(tc, k, rep.EabsW);
    rep.relErrorDerivation = rep.measured.value / rep.prediction.slope - 1.0;
    rep.relErrorIntroForm = rep.measured.value / rep.prediction.introFormSlope - 1.0;
    return rep;
}

}  // namespace rarelab
