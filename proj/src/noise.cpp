#include "rarelab/errors.hpp"
#include "rarelab/ulam.hpp"

#include <algorithm>
#include <cmath>

namespace rarelab {

const char* to_string(KernelShape k) { return k == KernelShape::uniform ? "uniform" : "bump"; }

KernelShape kernel_shape_from_string(const std::string& s) {
    if (s == "uniform") return KernelShape::uniform;
    if (s == "bump") return KernelShape::bump;
    throw BadParam("unknown kernel '" + s + "' (expected uniform or bump)");
}

double NoiseKernelSpec::density(double u) const {
    if (u < -1.0 || u > 1.0) return 0.0;
    if (shape == KernelShape::uniform) return 0.5;
    const double v = 1.0 - u * u;
    return 15.0 / 16.0 * v * v;
}

double NoiseKernelSpec::cdf(double u) const {
    if (u <= -1.0) return 0.0;
    if (u >= 1.0) return 1.0;
    if (shape == KernelShape::uniform) return 0.5 * (u + 1.0);
    const double u2 = u * u;
    return 15.0 / 16.0 * u * (1.0 - 2.0 * u2 / 3.0 + u2 * u2 / 5.0) + 0.5;
}

double NoiseKernelSpec::cdf_integral(double u) const {
    if (u <= -1.0) return 0.0;
    if (u >= 1.0) return u;  // symmetric kernel: the integral of the cdf over [-1, 1] is 1
    if (shape == KernelShape::uniform) return 0.25 * (u + 1.0) * (u + 1.0);
    const double u2 = u * u;
    return 15.0 / 16.0 * u2 * (0.5 - u2 / 6.0 + u2 * u2 / 30.0) + 0.5 * u + 5.0 / 32.0;
}

double NoiseKernelSpec::mean_abs() const { return shape == KernelShape::uniform ? 0.5 : 5.0 / 16.0; }

double NoiseKernelSpec::sample(std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    if (shape == KernelShape::uniform) return unit(rng);
    std::uniform_real_distribution<double> accept(0.0, 1.0);
    for (;;) {
        const double u = unit(rng);
        const double v = 1.0 - u * u;
        if (accept(rng) < v * v) return u;
    }
}

double NoiseKernelSpec::characteristic(double t) const {
    const double at = std::abs(t);
    if (at < 0.5) {
        // Even moments: uniform 1/(2k+1); bump (15/8)(1/(2k+1) - 2/(2k+3) + 1/(2k+5)).
        double sum = 0.0, term = 1.0;
        for (int k = 0; k <= 10; ++k) {
            const double m = shape == KernelShape::uniform
                                 ? 1.0 / (2 * k + 1)
                                 : 15.0 / 8.0 * (1.0 / (2 * k + 1) - 2.0 / (2 * k + 3) + 1.0 / (2 * k + 5));
            sum += term * m;
            term *= -t * t / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
        }
        return sum;
    }
    if (shape == KernelShape::uniform) return std::sin(t) / t;
    const double t2 = t * t;
    return 15.0 * ((3.0 - t2) * std::sin(t) - 3.0 * t * std::cos(t)) / (t2 * t2 * t);
}

SparseMatrix noise_matrix(const Partition1D& part, const NoiseKernelSpec& noise) {
    const double eps = noise.scale;
    if (!(eps > 0.0 && eps < 1.0)) throw BadParam("noise scale must lie in (0, 1)");
    const auto nodes = part.nodes();
    const std::size_t n = part.cells();
    SparseMatrix k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    std::vector<double> row(n, 0.0);
    std::size_t jMin = n, jMax = 0;

    for (std::size_t i = 0; i < n; ++i) {
        const double a = part.left(i), b = part.right(i);
        const double scale = eps / (b - a);
        // Probability that x + eps Z <= t for x uniform on [a, b].
        auto landing = [&](double t) {
            if (t <= a - eps) return 0.0;
            if (t >= b + eps) return 1.0;
            return scale * (noise.cdf_integral((t - a) / eps) - noise.cdf_integral((t - b) / eps));
        };
        auto mass_between = [&](double lo, double hi) { return landing(hi) - landing(lo); };
        auto cover = [&](double lo, double hi, auto&& massOf) {
            lo = std::max(lo, 0.0);
            hi = std::min(hi, 1.0);
            if (hi <= lo) return;
            for (std::size_t j = part.cell_of(lo); j < n && nodes[j] < hi; ++j) {
                const double v = massOf(nodes[j], nodes[j + 1]);
                row[j] += v;
                jMin = std::min(jMin, j);
                jMax = std::max(jMax, j);
            }
        };
        cover(a - eps, b + eps, mass_between);
        if (a - eps < 0.0)  // reflection y -> -y
            cover(0.0, eps - a, [&](double c, double d) { return mass_between(-d, -c); });
        if (b + eps > 1.0)  // reflection y -> 2 - y
            cover(2.0 - b - eps, 1.0, [&](double c, double d) { return mass_between(2.0 - d, 2.0 - c); });

        k.startVec(static_cast<Eigen::Index>(i));
        for (std::size_t j = jMin; j <= jMax && jMin < n; ++j) {
            if (row[j] > 0.0) k.insertBack(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
            row[j] = 0.0;
        }
        jMin = n;
        jMax = 0;
    }
    k.finalize();
    k.makeCompressed();
    return k;
}

FiniteOperator compose_noise(const FiniteOperator& op, const Partition1D& part, const NoiseKernelSpec& noise) {
    if (noise.scale == 0.0) return op;
    if (noise.scale < 0.0) throw BadParam("noise scale must be nonnegative");
    if (static_cast<Eigen::Index>(part.cells()) != op.dim()) throw DimensionMismatch("partition vs operator");
    if (noise.scale < 2.0 * part.max_width())
        throw ScaleTooCoarse("noise scale " + std::to_string(noise.scale) + " is below two cell widths (" +
                             std::to_string(2.0 * part.max_width()) + ")");
    FiniteOperator pi(noise_matrix(part, noise), part.weights(), RowSums::stochastic);
    return op.after(pi, op.promise());
}

}  // namespace rarelab
