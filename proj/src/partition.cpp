#include "rarelab/errors.hpp"
#include "rarelab/ulam.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rarelab {

Partition1D::Partition1D(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2) throw BadParam("a partition needs at least two nodes");
    if (nodes_.front() != 0.0 || nodes_.back() != 1.0) throw BadParam("partition must span [0,1]");
    for (std::size_t i = 1; i < nodes_.size(); ++i)
        if (!(nodes_[i] > nodes_[i - 1]))
            throw BadParam("partition nodes must increase strictly (index " + std::to_string(i) + ")");
}

Partition1D Partition1D::uniform(std::size_t cells) {
    if (cells == 0) throw BadParam("partition needs at least one cell");
    std::vector<double> nodes(cells + 1);
    for (std::size_t i = 0; i <= cells; ++i) nodes[i] = static_cast<double>(i) / static_cast<double>(cells);
    return Partition1D(std::move(nodes));
}

Vector Partition1D::weights() const {
    Vector w(static_cast<Eigen::Index>(cells()));
    for (std::size_t i = 0; i < cells(); ++i) w[static_cast<Eigen::Index>(i)] = width(i);
    return w;
}

double Partition1D::max_width() const {
    double m = 0.0;
    for (std::size_t i = 0; i < cells(); ++i) m = std::max(m, width(i));
    return m;
}

std::size_t Partition1D::cell_of(double x) const {
    if (x <= 0.0) return 0;
    if (x >= 1.0) return cells() - 1;
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    return static_cast<std::size_t>(it - nodes_.begin()) - 1;
}

std::size_t Partition1D::node_index(double x) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), x);
    if (it != nodes_.end() && *it == x) return static_cast<std::size_t>(it - nodes_.begin());
    return npos;
}

Vector Partition1D::midpoints() const {
    Vector m(static_cast<Eigen::Index>(cells()));
    for (std::size_t i = 0; i < cells(); ++i) m[static_cast<Eigen::Index>(i)] = 0.5 * (left(i) + right(i));
    return m;
}

HoleSpec::HoleSpec(std::vector<Interval> intervals) : intervals_(std::move(intervals)) {
    std::sort(intervals_.begin(), intervals_.end(),
              [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
    for (std::size_t i = 0; i < intervals_.size(); ++i) {
        const auto& iv = intervals_[i];
        if (!(iv.lo >= 0.0 && iv.hi <= 1.0 && iv.lo <= iv.hi))
            throw BadParam("hole interval must lie inside [0,1]");
        if (i > 0 && intervals_[i - 1].hi > iv.lo) throw BadParam("hole intervals overlap");
    }
}

HoleSpec HoleSpec::interval(double lo, double hi) { return HoleSpec({Interval{lo, hi}}); }

HoleSpec HoleSpec::centred(double z, double eps) {
    return interval(std::max(0.0, z - 0.5 * eps), std::min(1.0, z + 0.5 * eps));
}

double HoleSpec::measure() const {
    double m = 0.0;
    for (const auto& iv : intervals_) m += iv.length();
    return m;
}

bool HoleSpec::contains(const HoleSpec& inner, double tol) const {
    for (const auto& in : inner.intervals()) {
        if (in.length() == 0.0) continue;
        const bool covered = std::any_of(intervals_.begin(), intervals_.end(), [&](const Interval& out) {
            return out.lo <= in.lo + tol && in.hi <= out.hi + tol;
        });
        if (!covered) return false;
    }
    return true;
}

double HoleSpec::overlap(double a, double b) const {
    double m = 0.0;
    for (const auto& iv : intervals_) m += std::max(0.0, std::min(b, iv.hi) - std::max(a, iv.lo));
    return m;
}

FiniteOperator mask_hole(const FiniteOperator& op, const Partition1D& part, const HoleSpec& hole) {
    if (static_cast<Eigen::Index>(part.cells()) != op.dim())
        throw DimensionMismatch("partition has " + std::to_string(part.cells()) + " cells, operator " +
                                std::to_string(op.dim()));
    Vector keep = Vector::Ones(op.dim());
    for (const auto& iv : hole.intervals()) {
        if (iv.length() == 0.0) continue;
        for (std::size_t i = part.cell_of(iv.lo); i < part.cells() && part.left(i) < iv.hi; ++i) {
            const double w = part.width(i);
            const double inside = std::max(0.0, std::min(part.right(i), iv.hi) - std::max(part.left(i), iv.lo));
            auto& k = keep[static_cast<Eigen::Index>(i)];
            k = std::max(0.0, k - inside / w);
            if (k < 1e-15) k = 0.0;
        }
    }
    const RowSums promise = op.promise() == RowSums::general ? RowSums::general : RowSums::substochastic;
    return op.with_row_scale(keep, promise);
}

Partition1D refine_for_holes(const Partition1D& part, std::span<const HoleSpec> holes, double snapTol) {
    std::vector<double> nodes(part.nodes().begin(), part.nodes().end());
    std::vector<double> extra;
    for (const auto& h : holes)
        for (const auto& iv : h.intervals())
            for (double x : {iv.lo, iv.hi}) extra.push_back(x);
    std::sort(extra.begin(), extra.end());
    for (double x : extra) {
        auto it = std::lower_bound(nodes.begin(), nodes.end(), x);
        const bool nearRight = it != nodes.end() && std::abs(*it - x) <= snapTol;
        const bool nearLeft = it != nodes.begin() && std::abs(*(it - 1) - x) <= snapTol;
        if (nearRight || nearLeft) continue;
        nodes.insert(it, x);
    }
    return Partition1D(std::move(nodes));
}

Partition1D refine_for_hole(const Partition1D& part, const HoleSpec& hole, double snapTol) {
    return refine_for_holes(part, std::span<const HoleSpec>(&hole, 1), snapTol);
}

}  // namespace rarelab
