#pragma once

#include "rarelab/finite_operator.hpp"
#include "rarelab/interval_maps.hpp"

#include <random>
#include <span>
#include <string>
#include <vector>

namespace rarelab {

class Partition1D {
public:
    explicit Partition1D(std::vector<double> nodes);
    static Partition1D uniform(std::size_t cells);

    std::size_t cells() const noexcept { return nodes_.size() - 1; }
    std::span<const double> nodes() const noexcept { return nodes_; }
    double left(std::size_t i) const { return nodes_[i]; }
    double right(std::size_t i) const { return nodes_[i + 1]; }
    double width(std::size_t i) const { return nodes_[i + 1] - nodes_[i]; }
    Vector weights() const;
    double max_width() const;
    /// Cell containing x; points on a node belong to the cell on their right (last cell for x = 1).
    std::size_t cell_of(double x) const;
    /// Index of the node equal to x, or npos.
    std::size_t node_index(double x) const;
    Vector midpoints() const;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::vector<double> nodes_;
};

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    double length() const noexcept { return hi - lo; }
};

/// Union of disjoint closed intervals inside [0,1].
class HoleSpec {
public:
    HoleSpec() = default;
    explicit HoleSpec(std::vector<Interval> intervals);
    static HoleSpec interval(double lo, double hi);
    /// Interval of length eps centred at z, clipped to [0,1].
    static HoleSpec centred(double z, double eps);

    const std::vector<Interval>& intervals() const noexcept { return intervals_; }
    double measure() const;
    bool empty() const noexcept { return intervals_.empty(); }
    bool contains(const HoleSpec& inner, double tol = 1e-15) const;
    /// Lebesgue measure of [a, b] inside the hole.
    double overlap(double a, double b) const;

private:
    std::vector<Interval> intervals_;
};

/// Row i of op scaled by the fraction of cell i outside the hole.
FiniteOperator mask_hole(const FiniteOperator& op, const Partition1D& part, const HoleSpec& hole);

/// Inserts hole endpoints as nodes; endpoints within snapTol of an existing node snap to it.
Partition1D refine_for_hole(const Partition1D& part, const HoleSpec& hole, double snapTol = 1e-13);
Partition1D refine_for_holes(const Partition1D& part, std::span<const HoleSpec> holes,
                             double snapTol = 1e-13);

/// Ulam matrix m(A_i cap T^{-1} A_j) / m(A_i) from exact preimages under the inverse branches.
FiniteOperator build_ulam_1d(const PiecewiseMap& map, const Partition1D& part);

inline constexpr double kTruncationWarning = 0.02;

/// Stochastic completion of a truncated operator: the mass missing from row i is spread
/// over all cells in proportion to their weights.
FiniteOperator complete_truncation(const FiniteOperator& op);
/// Cells whose rows lose mass to truncation.
std::vector<std::size_t> truncated_cells(const FiniteOperator& op, double tol = 1e-12);

enum class KernelShape { uniform, bump };
enum class BoundaryMode { reflect };

const char* to_string(KernelShape k);
KernelShape kernel_shape_from_string(const std::string& s);

/// Noise kernel K on [-1, 1] scaled to eps: y = x + eps Z with Z ~ K.
struct NoiseKernelSpec {
    KernelShape shape = KernelShape::bump;
    double scale = 0.0;
    BoundaryMode boundary = BoundaryMode::reflect;

    double density(double u) const;
    double cdf(double u) const;
    /// Antiderivative of cdf vanishing at -1.
    double cdf_integral(double u) const;
    double mean() const { return 0.0; }
    double mean_abs() const;
    double sample(std::mt19937_64& rng) const;
    /// Characteristic function E[cos(t Z)] (kernels are symmetric).
    double characteristic(double t) const;
};

/// Row-stochastic matrix of the noise step on the partition, reflecting at 0 and 1.
SparseMatrix noise_matrix(const Partition1D& part, const NoiseKernelSpec& noise);

/// P composed after the noise step; scale 0 returns op unchanged.
FiniteOperator compose_noise(const FiniteOperator& op, const Partition1D& part, const NoiseKernelSpec& noise);

/// Product-grid operator of the coupled map (x, y) -> ((1-d)T x + d T y, (1-d)T y + d T x).
/// Cell (i, j) covers [i/n, (i+1)/n] x [j/n, (j+1)/n] and has index i * n + j.
FiniteOperator build_ulam_2d(const PiecewiseMap& map1d, double delta, int n);
/// Keep-fractions of the cells of the n x n grid outside the strip |x - y| <= eps.
Vector strip_keep_fractions(int n, double eps);
FiniteOperator build_ulam_2d(const PiecewiseMap& map1d, double delta, int n, double stripEps);
/// Area of the square cell [x0,x1] x [y0,y1] inside |x - y| <= eps.
double cell_strip_area(double x0, double x1, double y0, double y1, double eps);

/// Triplet export with a JSON header line (partition nodes, row-sum promise, defect).
void write_operator(const std::string& path, const FiniteOperator& op, std::span<const double> nodes);
struct LoadedOperator {
    FiniteOperator op;
    std::vector<double> nodes;
};
LoadedOperator read_operator(const std::string& path);

}  // namespace rarelab
