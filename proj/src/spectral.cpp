#include "rarelab/spectral.hpp"

#include "rarelab/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <tuple>

namespace rarelab {

namespace {

double weighted_l1(const Vector& f, const Vector& w) { return (f.array().abs() * w.array()).sum(); }

/// Right power iteration in mass coordinates u = phi .* w, normalized so sum(u) = 1.
struct RightResult {
    double lambda = 0.0;
    Vector u;
    double residual = 0.0;
    long iterations = 0;
};

RightResult right_iteration(const FiniteOperator& op, const EigenOptions& opts) {
    RightResult r;
    r.u = op.weights();
    for (long it = 1; it <= opts.maxIter; ++it) {
        Vector v = op.push_mass(r.u);
        const double lambda = v.sum();
        r.iterations = it;
        if (lambda == 0.0 || v.cwiseAbs().maxCoeff() == 0.0) {
            // Everything leaves in one step: the last nonzero iterate is in the kernel.
            r.lambda = 0.0;
            r.residual = 0.0;
            return r;
        }
        r.lambda = lambda;
        r.residual = (v - lambda * r.u).lpNorm<1>();
        if (r.residual <= opts.tol) return r;
        r.u = (v + opts.shift * r.u) / (lambda + opts.shift);
    }
    throw NonConvergence("right power iteration residual " + std::to_string(r.residual) +
                         " after " + std::to_string(opts.maxIter) + " iterations");
}

}  // namespace

void normalize_against(const FiniteOperator& op, SpectralTriple& triple, const Vector& reference) {
    const double s = op.pair(reference, triple.phi);
    if (s == 0.0) throw DimensionMismatch("reference functional annihilates phi");
    triple.phi /= s;
    triple.nu *= s;
}

SpectralTriple leading_eigentriple(const FiniteOperator& op, double tol, long maxIter) {
    EigenOptions o;
    o.tol = tol;
    o.maxIter = maxIter;
    return leading_eigentriple(op, o);
}

SpectralTriple leading_eigentriple(const FiniteOperator& op, const EigenOptions& opts) {
    if (!(opts.tol > 0.0)) throw BadParam("tolerance must be positive");
    const Vector& w = op.weights();
    const RightResult right = right_iteration(op, opts);

    SpectralTriple t;
    t.lambda = right.lambda;
    t.phi = right.u.cwiseQuotient(w);
    t.iterations = right.iterations;

    const double maxPhi = t.phi.cwiseAbs().maxCoeff();
    if (t.phi.minCoeff() < -1e-10 * maxPhi) throw SignError("dominant eigenvector changes sign");

    Vector nu = Vector::Ones(op.dim());
    double leftResidual = 0.0;
    if (t.lambda == 0.0) {
        for (Eigen::Index k = 0; k <= op.dim(); ++k) {
            Vector next = op.pull(nu);
            const double m = next.cwiseAbs().maxCoeff();
            if (m == 0.0) break;
            nu = next / m;
        }
        const double s = op.pair(nu, t.phi);
        if (s != 0.0) nu /= s;
        leftResidual = op.pull(nu).cwiseAbs().maxCoeff();
    } else {
        long it = 0;
        for (;;) {
            Vector mv = op.pull(nu);
            const double pairing = op.pair(nu, t.phi);
            const double scale = 1.0 / pairing;
            // Rayleigh-type estimate from the converged right vector; compared against lambda below.
            const double lambdaLeft = op.pair(mv, t.phi) / pairing;
            leftResidual = std::abs(scale) * (mv - lambdaLeft * nu).cwiseAbs().maxCoeff();
            if (leftResidual <= opts.tol) {
                leftResidual = std::max(leftResidual, std::abs(scale) * (mv - t.lambda * nu).cwiseAbs().maxCoeff());
                nu *= scale;
                break;
            }
            if (++it > opts.maxIter)
                throw NonConvergence("left power iteration residual " + std::to_string(leftResidual));
            mv += opts.shift * nu;
            nu = mv / mv.cwiseAbs().maxCoeff();
        }
        t.iterations = std::max(t.iterations, it);
        const double maxNu = nu.cwiseAbs().maxCoeff();
        if (nu.minCoeff() < -1e-10 * maxNu) throw SignError("dominant left eigenvector changes sign");
    }
    t.nu = std::move(nu);
    t.residual = std::max(right.residual, leftResidual);
    return t;
}

namespace {

double wdot(const Vector& a, const Vector& b, const Vector& w) {
    return (a.array() * b.array() * w.array()).sum();
}

/// Modified Gram-Schmidt (two passes) in the w-weighted inner product.
void orthonormalize(DenseMatrix& q, const Vector& w, std::mt19937_64& rng,
                    const std::function<void(Vector&)>& project) {
    std::normal_distribution<double> gauss;
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
        for (int attempt = 0; attempt < 4; ++attempt) {
            Vector col = q.col(c);
            const double before = std::sqrt(std::max(wdot(col, col, w), 0.0));
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index p = 0; p < c; ++p) col -= wdot(col, q.col(p), w) * q.col(p);
            const double nrm = std::sqrt(std::max(wdot(col, col, w), 0.0));
            if (nrm > 1e-13 * std::max(before, 1e-300)) {
                q.col(c) = col / nrm;
                break;
            }
            for (Eigen::Index i = 0; i < col.size(); ++i) col[i] = gauss(rng);
            project(col);
            q.col(c) = col;
        }
    }
}

}  // namespace

SubleadingResult subleading_eigenpair(const FiniteOperator& op, const SpectralTriple& deflateAgainst,
                                      const SubleadingOptions& opts) {
    const Eigen::Index n = op.dim();
    if (n < 2) throw BadParam("zero-integral subspace is trivial for dimension 1");
    if (deflateAgainst.phi.size() != n) throw DimensionMismatch("deflation triple dimension");
    const Vector& w = op.weights();
    const double phiMass = wdot(deflateAgainst.phi, Vector::Ones(n), w);
    if (phiMass == 0.0) throw DimensionMismatch("deflation vector has zero integral");
    const Vector phi = deflateAgainst.phi / phiMass;

    auto project = [&](Vector& f) { f -= wdot(f, Vector::Ones(n), w) * phi; };

    const Eigen::Index k = std::min<Eigen::Index>(std::max(opts.blockSize, 1), n - 1);
    std::mt19937_64 rng(opts.seed);
    std::normal_distribution<double> gauss;
    DenseMatrix q(n, k);
    for (Eigen::Index c = 0; c < k; ++c) {
        Vector col(n);
        for (Eigen::Index i = 0; i < n; ++i) col[i] = gauss(rng);
        project(col);
        q.col(c) = col;
    }
    orthonormalize(q, w, rng, project);

    SubleadingResult res;
    double lastComplexModulus = -1.0;
    int complexStable = 0;
    DenseMatrix z(n, k);
    for (long it = 1; it <= opts.maxIter; ++it) {
        for (Eigen::Index c = 0; c < k; ++c) {
            Vector col = op.apply(q.col(c));
            project(col);
            z.col(c) = col;
        }
        DenseMatrix h = q.transpose() * w.asDiagonal() * z;
        Eigen::EigenSolver<DenseMatrix> es(h, true);
        const auto vals = es.eigenvalues();
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < vals.size(); ++i)
            if (std::abs(vals[i]) > std::abs(vals[best])) best = i;
        const std::complex<double> theta = vals[best];
        double next = 0.0;
        for (Eigen::Index i = 0; i < vals.size(); ++i) {
            if (i == best) continue;
            next = std::max(next, std::abs(vals[i]));
        }
        res.iterations = it;

        if (std::abs(theta.imag()) > 1e-12 * std::max(1.0, std::abs(theta))) {
            const double mod = std::abs(theta);
            complexStable = std::abs(mod - lastComplexModulus) <= opts.tol ? complexStable + 1 : 0;
            lastComplexModulus = mod;
            if (complexStable >= 50)
                throw DegenerateGap("dominant eigenvalue on the zero-integral subspace is a complex pair"
                                    " of modulus " + std::to_string(mod));
        } else {
            complexStable = 0;
            const Vector y = es.eigenvectors().col(best).real();
            Vector v = q * y;
            const double vn = weighted_l1(v, w);
            v /= vn;
            const Vector pv = z * y / vn;
            const double lambda = theta.real();
            res.lambda = lambda;
            res.nextModulus = next;
            res.residual = weighted_l1(pv - lambda * v, w);
            if (res.residual <= opts.tol) {
                if (std::abs(std::abs(lambda) - next) <= opts.tol)
                    throw DegenerateGap("|lambda_2| = " + std::to_string(std::abs(lambda)) +
                                        " is within tolerance of the next eigenvalue estimate");
                res.phi = std::move(v);
                return res;
            }
        }
        q = z;
        orthonormalize(q, w, rng, project);
    }
    throw NonConvergence("subleading block iteration residual " + std::to_string(res.residual));
}

double subleading_eigenvalue(const FiniteOperator& op, const SpectralTriple& deflateAgainst,
                             double tol) {
    SubleadingOptions o;
    o.tol = tol;
    return subleading_eigenpair(op, deflateAgainst, o).lambda;
}

std::vector<std::complex<double>> dense_spectrum_oracle(const FiniteOperator& op) {
    if (op.dim() > kDenseOracleMaxDim)
        throw DimTooLarge("dense oracle limited to dimension " + std::to_string(kDenseOracleMaxDim) +
                          ", got " + std::to_string(op.dim()));
    Eigen::EigenSolver<DenseMatrix> es(op.dense(), false);
    std::vector<std::complex<double>> out(es.eigenvalues().begin(), es.eigenvalues().end());
    auto key = [](const std::complex<double>& z) {
        return std::make_tuple(std::round(std::abs(z) * 1e10), z.real(), z.imag());
    };
    std::sort(out.begin(), out.end(), [&](const auto& a, const auto& b) { return key(a) > key(b); });
    return out;
}

}  // namespace rarelab
