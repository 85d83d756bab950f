#include "rarelab/errors.hpp"
#include "rarelab/ulam.hpp"

#include <algorithm>
#include <cmath>

namespace rarelab {

namespace {

/// Dense scratch row with a list of touched columns, emitted in sorted order.
class RowAccumulator {
public:
    explicit RowAccumulator(std::size_t n) : values_(n, 0.0), touched_(n, 0) {}

    void add(std::size_t j, double v) {
        if (!touched_[j]) {
            touched_[j] = 1;
            cols_.push_back(j);
        }
        values_[j] += v;
    }

    template <class Emit>
    void flush(Emit&& emit) {
        std::sort(cols_.begin(), cols_.end());
        for (std::size_t j : cols_) {
            if (values_[j] > 0.0) emit(j, values_[j]);
            values_[j] = 0.0;
            touched_[j] = 0;
        }
        cols_.clear();
    }

private:
    std::vector<double> values_;
    std::vector<char> touched_;
    std::vector<std::size_t> cols_;
};

/// Largest node index k with nodes[k] <= y (clamped to a valid cell).
std::size_t cell_from_left(std::span<const double> nodes, double y) {
    auto it = std::upper_bound(nodes.begin(), nodes.end(), y);
    std::size_t k = static_cast<std::size_t>(it - nodes.begin());
    k = k == 0 ? 0 : k - 1;
    return std::min(k, nodes.size() - 2);
}

/// Largest node index k with nodes[k] < y (the cell that contains y as a right limit).
std::size_t cell_from_right(std::span<const double> nodes, double y) {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), y);
    std::size_t k = static_cast<std::size_t>(it - nodes.begin());
    k = k == 0 ? 0 : k - 1;
    return std::min(k, nodes.size() - 2);
}

/// Image endpoints within roundoff of a node are moved onto it, so exact Markov images do not
/// leak slivers of size 1e-16 into neighbouring cells.
double snap_to_node(std::span<const double> nodes, double y) {
    constexpr double kSnap = 1e-14;
    auto it = std::lower_bound(nodes.begin(), nodes.end(), y);
    if (it != nodes.end() && *it - y <= kSnap) return *it;
    if (it != nodes.begin() && y - *(it - 1) <= kSnap) return *(it - 1);
    return y;
}

double image_at(const Branch& b, double x) {
    if (x == b.domainLeft) return b.imageAtLeft;
    if (x == b.domainRight) return b.imageAtRight;
    return std::clamp(b.forward(x), b.imageLow(), b.imageHigh());
}

/// Distributes the mass of [lo, hi] (inside branch b) over the target cells.
void add_piece(const Branch& b, double lo, double hi, double invWidth, std::span<const double> nodes,
               RowAccumulator& acc) {
    const double yLo0 = image_at(b, lo);
    const double yHi0 = image_at(b, hi);
    const bool inc = b.increasing();
    const double y0 = snap_to_node(nodes, std::min(yLo0, yHi0));
    const double y1 = snap_to_node(nodes, std::max(yLo0, yHi0));
    if (y1 <= y0) return;
    const std::size_t j0 = cell_from_left(nodes, y0);
    const std::size_t j1 = cell_from_right(nodes, y1);
    // x-coordinate of the preimage of the lower image end of target j.
    double xPrev = inc ? lo : hi;
    for (std::size_t j = j0; j <= j1; ++j) {
        double xNext;
        if (j == j1) {
            xNext = inc ? hi : lo;
        } else {
            xNext = std::clamp(b.inverse(nodes[j + 1]), lo, hi);
        }
        const double len = inc ? xNext - xPrev : xPrev - xNext;
        if (len > 0.0) acc.add(j, len * invWidth);
        xPrev = xNext;
    }
}

}  // namespace

FiniteOperator build_ulam_1d(const PiecewiseMap& map, const Partition1D& part) {
    const auto nodes = part.nodes();
    const std::size_t n = part.cells();
    const auto& branches = map.branches();
    SparseMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    m.reserve(static_cast<Eigen::Index>(4 * n));
    RowAccumulator acc(n);
    std::size_t firstBranch = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = part.left(i);
        const double b = part.right(i);
        const double invW = 1.0 / (b - a);
        while (firstBranch < branches.size() && branches[firstBranch].domainRight <= a) ++firstBranch;
        for (std::size_t k = firstBranch; k < branches.size() && branches[k].domainLeft < b; ++k) {
            const Branch& br = branches[k];
            const double lo = std::max(a, br.domainLeft);
            const double hi = std::min(b, br.domainRight);
            if (hi > lo) add_piece(br, lo, hi, invW, nodes, acc);
        }
        m.startVec(static_cast<Eigen::Index>(i));
        acc.flush([&](std::size_t j, double v) {
            m.insertBack(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
        });
    }
    m.finalize();
    m.makeCompressed();
    const double defect = map.truncation_defect();
    return FiniteOperator(std::move(m), part.weights(),
                          defect > 0.0 ? RowSums::substochastic : RowSums::stochastic, defect);
}

}  // namespace rarelab

namespace rarelab {

std::vector<std::size_t> truncated_cells(const FiniteOperator& op, double tol) {
    const Vector rs = op.row_sums();
    std::vector<std::size_t> cells;
    for (Eigen::Index i = 0; i < rs.size(); ++i)
        if (rs[i] < 1.0 - tol) cells.push_back(static_cast<std::size_t>(i));
    return cells;
}

FiniteOperator complete_truncation(const FiniteOperator& op) {
    const auto cells = truncated_cells(op);
    if (cells.empty()) return op;
    const SparseMatrix m = op.materialize();
    const Vector rs = m * Vector::Ones(m.cols());
    const Vector& w = op.weights();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(m.nonZeros()) + cells.size() * static_cast<std::size_t>(m.cols()));
    std::vector<char> fill(static_cast<std::size_t>(m.rows()), 0);
    for (std::size_t i : cells) fill[i] = 1;
    for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(m, i); it; ++it) trips.emplace_back(i, it.col(), it.value());
        if (fill[static_cast<std::size_t>(i)]) {
            const double missing = std::max(0.0, 1.0 - rs[i]);
            for (Eigen::Index j = 0; j < m.cols(); ++j) trips.emplace_back(i, j, missing * w[j]);
        }
    }
    SparseMatrix full(m.rows(), m.cols());
    full.setFromTriplets(trips.begin(), trips.end());
    return FiniteOperator(std::move(full), w, RowSums::stochastic);
}

}  // namespace rarelab
