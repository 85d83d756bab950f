#include "rarelab/finite_operator.hpp"

#include "rarelab/errors.hpp"

#include <cmath>
#include <string>

namespace rarelab {

namespace {

constexpr double kWeightTol = 1e-12;
constexpr double kRowSumTol = 1e-12;

SparseMatrix diagonal(const Vector& d) {
    SparseMatrix m(d.size(), d.size());
    m.reserve(d.size());
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        m.startVec(i);
        m.insertBack(i, i) = d[i];
    }
    m.finalize();
    return m;
}

}  // namespace

const char* to_string(RowSums r) {
    switch (r) {
        case RowSums::general: return "general";
        case RowSums::substochastic: return "substochastic";
        case RowSums::stochastic: return "stochastic";
    }
    return "general";
}

FiniteOperator::FiniteOperator(SparseMatrix transitions, Vector cellWeights, RowSums promise,
                               double defect)
    : FiniteOperator(std::vector<SparseMatrix>{std::move(transitions)}, std::move(cellWeights),
                     promise, defect) {}

FiniteOperator::FiniteOperator(std::vector<SparseMatrix> factors, Vector cellWeights,
                               RowSums promise, double defect)
    : FiniteOperator(std::make_shared<const std::vector<SparseMatrix>>(std::move(factors)),
                     Vector{}, std::move(cellWeights), promise, defect) {}

FiniteOperator::FiniteOperator(std::shared_ptr<const std::vector<SparseMatrix>> factors,
                               Vector rowScale, Vector cellWeights, RowSums promise, double defect)
    : factors_(std::move(factors)),
      rowScale_(std::move(rowScale)),
      weights_(std::move(cellWeights)),
      promise_(promise),
      defect_(defect) {
    validate();
}

FiniteOperator FiniteOperator::from_dense(const DenseMatrix& transitions, Vector cellWeights,
                                          RowSums promise) {
    SparseMatrix m = transitions.sparseView(0.0, 0.0);
    m.makeCompressed();
    return FiniteOperator(std::move(m), std::move(cellWeights), promise);
}

void FiniteOperator::validate() const {
    const Eigen::Index n = weights_.size();
    if (n <= 0) throw InvalidOperator("dimension must be positive");
    if (factors_->empty()) throw InvalidOperator("at least one factor is required");
    for (const auto& f : *factors_) {
        if (f.rows() != n || f.cols() != n)
            throw DimensionMismatch("factor is " + std::to_string(f.rows()) + "x" +
                                    std::to_string(f.cols()) + ", expected " + std::to_string(n));
        for (Eigen::Index k = 0; k < f.nonZeros(); ++k) {
            const double v = f.valuePtr()[k];
            if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidOperator("negative or non-finite entry");
        }
    }
    if (rowScale_.size() != 0) {
        if (rowScale_.size() != n) throw DimensionMismatch("row scale length");
        if ((rowScale_.array() < 0.0).any()) throw InvalidOperator("negative row scale");
    }
    if ((weights_.array() <= 0.0).any()) throw InvalidOperator("cell weights must be positive");
    if (std::abs(weights_.sum() - 1.0) > kWeightTol)
        throw InvalidOperator("cell weights sum to " + std::to_string(weights_.sum()));
    if (promise_ == RowSums::general) return;
    const Vector rs = row_sums();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (rs[i] > 1.0 + kRowSumTol)
            throw InvalidOperator("row " + std::to_string(i) + " sums to more than 1");
        if (promise_ == RowSums::stochastic && rs[i] < 1.0 - kRowSumTol)
            throw InvalidOperator("row " + std::to_string(i) + " of a stochastic operator sums to " +
                                  std::to_string(rs[i]));
    }
}

Vector FiniteOperator::push_mass(const Vector& u) const {
    if (u.size() != dim()) throw DimensionMismatch("push_mass argument");
    Vector x = rowScale_.size() ? Vector(rowScale_.cwiseProduct(u)) : u;
    for (const auto& f : *factors_) x = f.transpose() * x;
    return x;
}

Vector FiniteOperator::pull(const Vector& v) const {
    if (v.size() != dim()) throw DimensionMismatch("pull argument");
    Vector x = v;
    for (auto it = factors_->rbegin(); it != factors_->rend(); ++it) x = (*it) * x;
    if (rowScale_.size()) x = x.cwiseProduct(rowScale_);
    return x;
}

Vector FiniteOperator::apply(const Vector& density) const {
    return push_mass(density.cwiseProduct(weights_)).cwiseQuotient(weights_);
}

Vector FiniteOperator::apply_dual(const Vector& functional) const { return pull(functional); }

double FiniteOperator::pair(const Vector& functional, const Vector& density) const {
    if (functional.size() != dim() || density.size() != dim())
        throw DimensionMismatch("pairing arguments");
    return (functional.array() * density.array() * weights_.array()).sum();
}

Vector FiniteOperator::row_sums() const { return pull(Vector::Ones(dim())); }

std::size_t FiniteOperator::nonzeros() const {
    std::size_t total = 0;
    for (const auto& f : *factors_) total += static_cast<std::size_t>(f.nonZeros());
    return total;
}

SparseMatrix FiniteOperator::materialize() const {
    SparseMatrix m = factors_->front();
    for (std::size_t k = 1; k < factors_->size(); ++k) m = SparseMatrix(m * (*factors_)[k]);
    if (rowScale_.size()) m = diagonal(rowScale_) * m;
    m.makeCompressed();
    return m;
}

DenseMatrix FiniteOperator::dense() const { return DenseMatrix(materialize()); }

FiniteOperator FiniteOperator::with_row_scale(const Vector& keep, RowSums promise) const {
    if (keep.size() != dim()) throw DimensionMismatch("row scale length");
    Vector scale = rowScale_.size() ? Vector(rowScale_.cwiseProduct(keep)) : keep;
    return FiniteOperator(factors_, std::move(scale), weights_, promise, defect_);
}

FiniteOperator FiniteOperator::after(const FiniteOperator& first, RowSums promise) const {
    if (first.dim() != dim()) throw DimensionMismatch("composition of operators");
    if ((first.weights() - weights_).cwiseAbs().maxCoeff() > kWeightTol)
        throw DimensionMismatch("composition of operators on different partitions");
    std::vector<SparseMatrix> chain = first.factors();
    if (rowScale_.size()) chain.push_back(diagonal(rowScale_));
    chain.insert(chain.end(), factors_->begin(), factors_->end());
    return FiniteOperator(std::make_shared<const std::vector<SparseMatrix>>(std::move(chain)),
                          first.row_scale(), weights_, promise, defect_ + first.defect());
}

}  // namespace rarelab
