#include "rarelab/errors.hpp"
#include "rarelab/parallel.hpp"
#include "rarelab/ulam.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace rarelab {

namespace {

struct Pt {
    double x, y;
};

/// Convex polygon with a small fixed capacity (clipping a quadrilateral by four lines adds at most four vertices).
struct Poly {
    std::array<Pt, 16> v{};
    int n = 0;
    void push(Pt p) { v[static_cast<std::size_t>(n++)] = p; }
};

/// Keeps the part of `in` where a*x + b*y <= c.
Poly clip(const Poly& in, double a, double b, double c) {
    Poly out;
    if (in.n == 0) return out;
    for (int k = 0; k < in.n; ++k) {
        const Pt& p = in.v[static_cast<std::size_t>(k)];
        const Pt& q = in.v[static_cast<std::size_t>((k + 1) % in.n)];
        const double fp = a * p.x + b * p.y - c;
        const double fq = a * q.x + b * q.y - c;
        if (fp <= 0.0) out.push(p);
        if ((fp < 0.0 && fq > 0.0) || (fp > 0.0 && fq < 0.0)) {
            const double t = fp / (fp - fq);
            out.push({p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
        }
    }
    return out;
}

/// Shoelace formula relative to the first vertex, which keeps the rounding error proportional to the area.
double area(const Poly& p) {
    if (p.n < 3) return 0.0;
    const Pt o = p.v[0];
    double s = 0.0;
    for (int k = 1; k + 1 < p.n; ++k) {
        const Pt& a = p.v[static_cast<std::size_t>(k)];
        const Pt& b = p.v[static_cast<std::size_t>(k + 1)];
        s += (a.x - o.x) * (b.y - o.y) - (b.x - o.x) * (a.y - o.y);
    }
    return 0.5 * std::abs(s);
}

Poly box(double x0, double x1, double y0, double y1) {
    Poly p;
    p.push({x0, y0});
    p.push({x1, y0});
    p.push({x1, y1});
    p.push({x0, y1});
    return p;
}

struct Piece {
    const Branch* branch;
    double lo, hi;
};

}  // namespace

double cell_strip_area(double x0, double x1, double y0, double y1, double eps) {
    Poly p = box(x0, x1, y0, y1);
    p = clip(p, 1.0, -1.0, eps);   // x - y <= eps
    p = clip(p, -1.0, 1.0, eps);   // y - x <= eps
    return area(p);
}

Vector strip_keep_fractions(int n, double eps) {
    if (!(eps >= 0.0 && eps < 1.0)) throw BadParam("strip width must lie in [0, 1)");
    const std::size_t nn = static_cast<std::size_t>(n);
    Vector keep = Vector::Ones(static_cast<Eigen::Index>(nn * nn));
    if (eps == 0.0) return keep;
    const long reach = static_cast<long>(std::ceil(eps * n)) + 1;
    for (long i = 0; i < n; ++i) {
        for (long j = std::max(0L, i - reach); j <= std::min<long>(n - 1, i + reach); ++j) {
            const double x0 = static_cast<double>(i) / n, x1 = static_cast<double>(i + 1) / n;
            const double y0 = static_cast<double>(j) / n, y1 = static_cast<double>(j + 1) / n;
            const double inside = cell_strip_area(x0, x1, y0, y1, eps) / ((x1 - x0) * (y1 - y0));
            double k = 1.0 - inside;
            if (k < 1e-15) k = 0.0;
            keep[i * n + j] = k;
        }
    }
    return keep;
}

FiniteOperator build_ulam_2d(const PiecewiseMap& map1d, double delta, int n) {
    if (!map1d.is_piecewise_linear()) throw BadParam("coupled builder needs a piecewise-linear base map");
    if (n < 1 || n > 1024) throw BadParam("grid size per axis must lie in [1, 1024]");
    if (!(delta >= 0.0 && delta < 0.5)) throw BadParam("coupling must lie in [0, 1/2)");
    double sMin = INFINITY;
    for (const auto& b : map1d.branches()) sMin = std::min(sMin, std::abs(b.affine->slope));
    if (!((1.0 - 2.0 * delta) * sMin > 4.0))
        throw ExpansionTooWeak("(1 - 2 delta) s = " + std::to_string((1.0 - 2.0 * delta) * sMin) + " <= 4");

    const std::size_t nn = static_cast<std::size_t>(n);
    auto node = [n](long k) { return static_cast<double>(k) / n; };

    // Branch pieces of each axis cell.
    std::vector<std::vector<Piece>> pieces(nn);
    for (std::size_t i = 0; i < nn; ++i) {
        const double a = node(static_cast<long>(i)), b = node(static_cast<long>(i) + 1);
        for (const auto& br : map1d.branches()) {
            const double lo = std::max(a, br.domainLeft), hi = std::min(b, br.domainRight);
            if (hi > lo) pieces[i].push_back({&br, lo, hi});
        }
    }

    // Rows are assembled in independent blocks, then stitched in order.
    const std::size_t rows = nn * nn;
    const std::size_t blockRows = std::max<std::size_t>(nn, 4096);
    const std::size_t blocks = (rows + blockRows - 1) / blockRows;
    struct Block {
        std::vector<int> counts;
        std::vector<int> cols;
        std::vector<double> vals;
    };
    std::vector<Block> out(blocks);

    parallel_for(blocks, [&](std::size_t blk) {
        Block& B = out[blk];
        std::vector<std::pair<int, double>> row;
        const std::size_t r0 = blk * blockRows, r1 = std::min(rows, r0 + blockRows);
        for (std::size_t r = r0; r < r1; ++r) {
            const std::size_t i = r / nn, j = r % nn;
            const double cellArea = (node(static_cast<long>(i) + 1) - node(static_cast<long>(i))) *
                                    (node(static_cast<long>(j) + 1) - node(static_cast<long>(j)));
            row.clear();
            for (const Piece& px : pieces[i]) {
                for (const Piece& py : pieces[j]) {
                    const double s1 = px.branch->affine->slope, c1 = px.branch->affine->offset;
                    const double s2 = py.branch->affine->slope, c2 = py.branch->affine->offset;
                    auto img = [&](double x, double y) {
                        const double tx = s1 * x + c1, ty = s2 * y + c2;
                        return Pt{(1.0 - delta) * tx + delta * ty, (1.0 - delta) * ty + delta * tx};
                    };
                    Poly par;
                    par.push(img(px.lo, py.lo));
                    par.push(img(px.hi, py.lo));
                    par.push(img(px.hi, py.hi));
                    par.push(img(px.lo, py.hi));
                    const double jac = std::abs(s1 * s2 * (1.0 - 2.0 * delta));
                    const double scale = 1.0 / (jac * cellArea);
                    double xmin = 1.0, xmax = 0.0, ymin = 1.0, ymax = 0.0;
                    for (int k = 0; k < 4; ++k) {
                        xmin = std::min(xmin, par.v[k].x);
                        xmax = std::max(xmax, par.v[k].x);
                        ymin = std::min(ymin, par.v[k].y);
                        ymax = std::max(ymax, par.v[k].y);
                    }
                    const long kx0 = std::clamp(static_cast<long>(std::floor(xmin * n)), 0L, static_cast<long>(n) - 1);
                    const long kx1 = std::clamp(static_cast<long>(std::ceil(xmax * n)) - 1, kx0, static_cast<long>(n) - 1);
                    for (long kx = kx0; kx <= kx1; ++kx) {
                        Poly col = clip(par, -1.0, 0.0, -node(kx));        // x >= kx / n
                        col = clip(col, 1.0, 0.0, node(kx + 1));           // x <= (kx + 1) / n
                        if (col.n < 3) continue;
                        double cy0 = 1.0, cy1 = 0.0;
                        for (int k = 0; k < col.n; ++k) {
                            cy0 = std::min(cy0, col.v[static_cast<std::size_t>(k)].y);
                            cy1 = std::max(cy1, col.v[static_cast<std::size_t>(k)].y);
                        }
                        const long ky0 = std::clamp(static_cast<long>(std::floor(cy0 * n)), 0L, static_cast<long>(n) - 1);
                        const long ky1 = std::clamp(static_cast<long>(std::ceil(cy1 * n)) - 1, ky0, static_cast<long>(n) - 1);
                        for (long ky = ky0; ky <= ky1; ++ky) {
                            Poly cell = clip(col, 0.0, -1.0, -node(ky));
                            cell = clip(cell, 0.0, 1.0, node(ky + 1));
                            if (cell.n < 3) continue;
                            const double a = area(cell);
                            if (a > 0.0) row.emplace_back(static_cast<int>(kx * n + ky), a * scale);
                        }
                    }
                }
            }
            std::sort(row.begin(), row.end());
            int count = 0;
            for (std::size_t k = 0; k < row.size();) {
                int c = row[k].first;
                double v = 0.0;
                while (k < row.size() && row[k].first == c) v += row[k++].second;
                B.cols.push_back(c);
                B.vals.push_back(v);
                ++count;
            }
            B.counts.push_back(count);
        }
    });

    std::size_t nnz = 0;
    for (const auto& B : out) nnz += B.vals.size();
    SparseMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
    m.reserve(static_cast<Eigen::Index>(nnz));
    std::size_t r = 0;
    for (auto& B : out) {
        std::size_t pos = 0;
        for (int cnt : B.counts) {
            m.startVec(static_cast<Eigen::Index>(r));
            for (int k = 0; k < cnt; ++k, ++pos) m.insertBack(static_cast<Eigen::Index>(r), B.cols[pos]) = B.vals[pos];
            ++r;
        }
        B = Block{};
    }
    m.finalize();
    m.makeCompressed();
    Vector w = Vector::Constant(static_cast<Eigen::Index>(rows), 1.0 / static_cast<double>(rows));
    return FiniteOperator(std::move(m), std::move(w), RowSums::stochastic);
}

FiniteOperator build_ulam_2d(const PiecewiseMap& map1d, double delta, int n, double stripEps) {
    FiniteOperator closed = build_ulam_2d(map1d, delta, n);
    if (stripEps == 0.0) return closed;
    return closed.with_row_scale(strip_keep_fractions(n, stripEps), RowSums::substochastic);
}

}  // namespace rarelab
