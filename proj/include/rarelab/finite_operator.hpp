#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <memory>
#include <vector>

namespace rarelab {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Row-sum promise attached to an operator and checked on construction.
enum class RowSums { general, substochastic, stochastic };

const char* to_string(RowSums r);

/**
 * \brief Finite nonnegative transfer operator on a partition of cells.
 *
 * The transition matrix is stored as diag(rowScale) * F_0 * F_1 * ... * F_{k-1}
 * with sparse nonnegative factors F_i. Entry (i, j) is the fraction of the
 * mass of cell i that is sent to cell j, so a density f (values per cell)
 * is transported by  (P f)_j = sum_i f_i w_i M_ij / w_j.
 * A functional nu acts on densities through the pairing sum_i nu_i f_i w_i,
 * which makes (nu P) = M nu.
 *
 * Factors are shared between copies: masking a hole only swaps the row scale.
 */
class FiniteOperator {
public:
    FiniteOperator(SparseMatrix transitions, Vector cellWeights, RowSums promise = RowSums::general,
                   double defect = 0.0);
    FiniteOperator(std::vector<SparseMatrix> factors, Vector cellWeights,
                   RowSums promise = RowSums::general, double defect = 0.0);

    static FiniteOperator from_dense(const DenseMatrix& transitions, Vector cellWeights,
                                     RowSums promise = RowSums::general);

    Eigen::Index dim() const noexcept { return weights_.size(); }
    const Vector& weights() const noexcept { return weights_; }
    RowSums promise() const noexcept { return promise_; }
    /// Mass lost by construction (e.g. dropped branches), not by holes.
    double defect() const noexcept { return defect_; }
    const std::vector<SparseMatrix>& factors() const noexcept { return *factors_; }
    /// Empty when no row scaling is applied.
    const Vector& row_scale() const noexcept { return rowScale_; }

    /// u -> M^T u  (mass vectors).
    Vector push_mass(const Vector& u) const;
    /// v -> M v  (functional coefficients).
    Vector pull(const Vector& v) const;
    /// Density transport P f.
    Vector apply(const Vector& density) const;
    /// Dual action nu P on functional coefficients.
    Vector apply_dual(const Vector& functional) const;
    /// sum_i nu_i f_i w_i
    double pair(const Vector& functional, const Vector& density) const;

    Vector row_sums() const;
    std::size_t nonzeros() const;
    SparseMatrix materialize() const;
    DenseMatrix dense() const;

    /// Multiplies every row i by keep_i in [0, 1]; composes with an existing scale.
    FiniteOperator with_row_scale(const Vector& keep, RowSums promise) const;
    /// Operator that first applies `first` and then this one (density picture).
    FiniteOperator after(const FiniteOperator& first, RowSums promise) const;

private:
    FiniteOperator(std::shared_ptr<const std::vector<SparseMatrix>> factors, Vector rowScale,
                   Vector cellWeights, RowSums promise, double defect);
    void validate() const;

    std::shared_ptr<const std::vector<SparseMatrix>> factors_;
    Vector rowScale_;
    Vector weights_;
    RowSums promise_;
    double defect_;
};

}  // namespace rarelab
