#include "rarelab/capacity.hpp"

#include "rarelab/errors.hpp"
#include "rarelab/interval_maps.hpp"
#include "rarelab/parallel.hpp"
#include "rarelab/spectral.hpp"
#include "rarelab/ulam.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <Eigen/Eigenvalues>

namespace rarelab {

namespace {

bool is_binary(const std::string& w) {
    return !w.empty() && std::all_of(w.begin(), w.end(), [](char c) { return c == '0' || c == '1'; });
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Follower graph: state s is an (m-1)-suffix, edge (s, b) leads to ((s << 1) | b) & mask
/// and exists unless the m-word (s << 1) | b is forbidden.
struct FollowerGraph {
    int m = 1;
    std::size_t states = 1;
    std::uint64_t mask = 0;
    std::vector<char> allowed;  // indexed by the m-word

    explicit FollowerGraph(const ForbiddenList& fl) : m(fl.m()) {
        if (m > kCapacityMaxM) throw BadParam("block length " + std::to_string(m) + " exceeds " +
                                              std::to_string(kCapacityMaxM));
        states = std::size_t{1} << (m - 1);
        mask = states - 1;
        allowed.assign(states * 2, 1);
        for (auto c : fl.codes()) allowed[c] = 0;
    }
    bool edge(std::size_t s, int b) const { return allowed[(s << 1) | static_cast<std::size_t>(b)] != 0; }
    std::size_t target(std::size_t s, int b) const { return ((s << 1) | static_cast<std::size_t>(b)) & mask; }
};

/// Iterative Tarjan; returns the component id of every state.
std::vector<int> strongly_connected(const FollowerGraph& g, int& count) {
    const std::size_t n = g.states;
    constexpr int unset = -1;
    std::vector<int> index(n, unset), low(n, 0), comp(n, unset);
    std::vector<std::size_t> stack;
    std::vector<char> onStack(n, 0);
    struct Frame {
        std::size_t v;
        int next;
    };
    std::vector<Frame> call;
    int counter = 0;
    count = 0;
    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != unset) continue;
        call.push_back({root, 0});
        index[root] = low[root] = counter++;
        stack.push_back(root);
        onStack[root] = 1;
        while (!call.empty()) {
            Frame& f = call.back();
            if (f.next < 2) {
                const int b = f.next++;
                if (!g.edge(f.v, b)) continue;
                const std::size_t w = g.target(f.v, b);
                if (index[w] == unset) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    onStack[w] = 1;
                    call.push_back({w, 0});
                } else if (onStack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
                continue;
            }
            const std::size_t v = f.v;
            call.pop_back();
            if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
            if (low[v] == index[v]) {
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    onStack[w] = 0;
                    comp[w] = count;
                } while (w != v);
                ++count;
            }
        }
    }
    return comp;
}

struct ComponentRoot {
    double rho = 0.0;
    double bracket = 0.0;
    long iterations = 0;
};

/// Perron root of one strongly connected component by shifted power iteration,
/// stopped on the Collatz-Wielandt bracket.
ComponentRoot component_root(const FollowerGraph& g, const std::vector<int>& comp, int c,
                             const std::vector<std::size_t>& nodes, double tol) {
    std::vector<std::size_t> local(g.states, 0);
    for (std::size_t k = 0; k < nodes.size(); ++k) local[nodes[k]] = k;
    std::vector<std::array<long, 2>> out(nodes.size(), {-1, -1});
    std::size_t edges = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        for (int b = 0; b < 2; ++b) {
            if (!g.edge(nodes[k], b)) continue;
            const std::size_t t = g.target(nodes[k], b);
            if (comp[t] != c) continue;
            out[k][static_cast<std::size_t>(b)] = static_cast<long>(local[t]);
            ++edges;
        }
    }
    if (edges == 0) return {};
    // A component in which every state has one internal edge is a single cycle.
    if (edges == nodes.size()) return {1.0, 0.0, 0};

    std::vector<double> x(nodes.size(), 1.0), y(nodes.size());
    ComponentRoot r;
    constexpr long maxIter = 2'000'000;
    for (long it = 1; it <= maxIter; ++it) {
        double lo = INFINITY, hi = 0.0, top = 0.0;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            double ax = 0.0;
            for (long t : out[k])
                if (t >= 0) ax += x[static_cast<std::size_t>(t)];
            lo = std::min(lo, ax / x[k]);
            hi = std::max(hi, ax / x[k]);
            y[k] = x[k] + ax;
            top = std::max(top, y[k]);
        }
        r.iterations = it;
        r.rho = 0.5 * (lo + hi);
        r.bracket = hi - lo;
        if (hi - lo <= tol * hi) return r;
        for (std::size_t k = 0; k < nodes.size(); ++k) x[k] = y[k] / top;
    }
    throw NonConvergence("Perron root bracket " + std::to_string(r.bracket) + " after " +
                         std::to_string(maxIter) + " iterations");
}

double dense_root(const FollowerGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.states);
    DenseMatrix a = DenseMatrix::Zero(n, n);
    for (std::size_t s = 0; s < g.states; ++s)
        for (int b = 0; b < 2; ++b)
            if (g.edge(s, b)) a(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(g.target(s, b))) += 1.0;
    Eigen::EigenSolver<DenseMatrix> es(a, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

ForbiddenList::ForbiddenList(std::vector<std::string> blocks, int m) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) {
        if (m < 1) throw BadParam("an empty forbidden list needs an explicit block length");
        m_ = m;
        return;
    }
    const std::size_t len = blocks_.front().size();
    std::set<std::string> seen;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const auto& w = blocks_[i];
        if (!is_binary(w)) throw BadParam("block " + std::to_string(i) + " '" + w + "' is not a binary word");
        if (w.size() != len) throw BadParam("block " + std::to_string(i) + " has length " +
                                            std::to_string(w.size()) + ", expected " + std::to_string(len));
        if (!seen.insert(w).second) throw BadParam("block '" + w + "' is listed twice");
    }
    if (m != 0 && static_cast<std::size_t>(m) != len)
        throw BadParam("declared block length " + std::to_string(m) + " differs from " + std::to_string(len));
    if (len > static_cast<std::size_t>(kWordCountMaxN)) throw BadParam("blocks longer than 62 symbols");
    m_ = static_cast<int>(len);
}

std::vector<std::uint64_t> ForbiddenList::codes() const {
    std::vector<std::uint64_t> out;
    out.reserve(blocks_.size());
    for (const auto& w : blocks_) {
        std::uint64_t c = 0;
        for (char ch : w) c = (c << 1) | static_cast<std::uint64_t>(ch == '1');
        out.push_back(c);
    }
    return out;
}

ForbiddenList ForbiddenList::with(const std::string& block) const {
    auto b = blocks_;
    b.push_back(block);
    return ForbiddenList(std::move(b), m_);
}

ForbiddenList read_forbidden_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open forbidden list '" + path + "'");
    std::vector<std::string> blocks;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        const std::string w = trim(line);
        if (w.empty() || w.front() == '#') continue;
        if (!is_binary(w)) throw IoError(path + ":" + std::to_string(lineNo) + ": '" + w + "' is not a binary word");
        blocks.push_back(w);
    }
    if (blocks.empty()) throw IoError("forbidden list '" + path + "' has no blocks");
    return ForbiddenList(std::move(blocks));
}

ForbiddenList ones_block(int m) {
    if (m < 1) throw BadParam("block length must be positive");
    return ForbiddenList({std::string(static_cast<std::size_t>(m), '1')});
}

ForbiddenList all_blocks(int m) {
    if (m < 1 || m > kCrossCheckMaxM) throw BadParam("block length must lie in [1, 12]");
    std::vector<std::string> blocks;
    for (std::uint64_t c = 0; c < (std::uint64_t{1} << m); ++c) {
        std::string w(static_cast<std::size_t>(m), '0');
        for (int k = 0; k < m; ++k)
            if ((c >> (m - 1 - k)) & 1U) w[static_cast<std::size_t>(k)] = '1';
        blocks.push_back(std::move(w));
    }
    return ForbiddenList(std::move(blocks));
}

const char* to_string(CapacityMethod m) {
    return m == CapacityMethod::transfer_matrix ? "transfer_matrix" : "dp_oracle";
}

CapacityResult perron_root(const ForbiddenList& fl, double tol) {
    const FollowerGraph g(fl);
    int count = 0;
    const auto comp = strongly_connected(g, count);
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(count));
    for (std::size_t s = 0; s < g.states; ++s) members[static_cast<std::size_t>(comp[s])].push_back(s);

    CapacityResult res;
    res.m = fl.m();
    res.p = fl.p();
    res.states = g.states;
    for (int c = 0; c < count; ++c) {
        const auto r = component_root(g, comp, c, members[static_cast<std::size_t>(c)], tol);
        res.iterations += r.iterations;
        if (r.rho > res.perronRoot) {
            res.perronRoot = r.rho;
            res.bracket = r.bracket;
        }
    }
    if (fl.m() <= kCapacityDenseMaxM) {
        const double d = dense_root(g);
        res.denseOracleRoot = d;
        if (std::abs(d - res.perronRoot) > 1e-9)
            throw Inconsistent("power iteration root " + std::to_string(res.perronRoot) +
                               " disagrees with the dense oracle " + std::to_string(d));
    }
    res.entropy = res.perronRoot > 0.0 ? std::log(res.perronRoot) : -INFINITY;
    res.bits = res.entropy / std::log(2.0);
    return res;
}

CapacityResult capacity_exact(const ForbiddenList& fl, double tol) {
    CapacityResult res = perron_root(fl, tol);
    if (res.perronRoot < 1.0)
        throw EmptyLanguage("spectral radius " + std::to_string(res.perronRoot) +
                            " < 1: only finitely many admissible words");
    return res;
}

std::uint64_t word_count_oracle(const ForbiddenList& fl, int n) {
    if (n < 0 || n > kWordCountMaxN) throw BadParam("word length must lie in [0, 62]");
    const int m = fl.m();
    if (n < m) return std::uint64_t{1} << n;
    const FollowerGraph g(fl);
    std::vector<std::uint64_t> cnt(g.states, 1), next(g.states);
    for (int len = m - 1; len < n; ++len) {
        std::fill(next.begin(), next.end(), 0);
        for (std::size_t s = 0; s < g.states; ++s) {
            if (cnt[s] == 0) continue;
            for (int b = 0; b < 2; ++b)
                if (g.edge(s, b)) next[g.target(s, b)] += cnt[s];
        }
        cnt.swap(next);
    }
    return std::accumulate(cnt.begin(), cnt.end(), std::uint64_t{0});
}

CapacityResult capacity_from_word_counts(const ForbiddenList& fl, int n) {
    const std::uint64_t a = word_count_oracle(fl, n), b = word_count_oracle(fl, n + 1);
    if (a == 0 || b == 0) throw EmptyLanguage("no admissible words of length " + std::to_string(n + 1));
    CapacityResult res;
    res.method = CapacityMethod::dp_oracle;
    res.m = fl.m();
    res.p = fl.p();
    res.states = std::size_t{1} << (fl.m() - 1);
    res.perronRoot = static_cast<double>(b) / static_cast<double>(a);
    res.entropy = std::log(res.perronRoot);
    res.bits = res.entropy / std::log(2.0);
    return res;
}

EventuallyPeriodicWord EventuallyPeriodicWord::parse(const std::string& text) {
    const std::string t = trim(text);
    const auto open = t.find('(');
    if (open == std::string::npos || t.back() != ')' || t.find('(', open + 1) != std::string::npos)
        throw Undecidable("'" + t + "' is not of the form pre(period)");
    EventuallyPeriodicWord w{t.substr(0, open), t.substr(open + 1, t.size() - open - 2)};
    if (!w.preperiod.empty() && !is_binary(w.preperiod))
        throw Undecidable("preperiod of '" + t + "' is not a binary word");
    if (!is_binary(w.period)) throw Undecidable("period of '" + t + "' is not a nonempty binary word");
    return w;
}

EventuallyPeriodicWord EventuallyPeriodicWord::canonical() const {
    if (!is_binary(period)) throw Undecidable("empty period");
    std::string per = period;
    for (std::size_t d = 1; d < per.size(); ++d) {
        if (per.size() % d != 0) continue;
        bool rep = true;
        for (std::size_t k = d; k < per.size() && rep; ++k) rep = per[k] == per[k - d];
        if (rep) {
            per.resize(d);
            break;
        }
    }
    std::string pre = preperiod;
    while (!pre.empty() && pre.back() == per.back()) {
        pre.pop_back();
        std::rotate(per.rbegin(), per.rbegin() + 1, per.rend());
    }
    return {pre, per};
}

EventuallyPeriodicWord EventuallyPeriodicWord::shifted(std::size_t j) const {
    if (j <= preperiod.size()) return {preperiod.substr(j), period};
    std::string per = period;
    const std::size_t r = (j - preperiod.size()) % per.size();
    std::rotate(per.begin(), per.begin() + static_cast<std::ptrdiff_t>(r), per.end());
    return {{}, per};
}

std::string EventuallyPeriodicWord::prefix(int n) const {
    std::string out;
    out.reserve(static_cast<std::size_t>(std::max(n, 0)));
    for (int k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(k);
        out.push_back(i < preperiod.size() ? preperiod[i] : period[(i - preperiod.size()) % period.size()]);
    }
    return out;
}

std::string EventuallyPeriodicWord::to_string() const { return preperiod + "(" + period + ")"; }

bool EventuallyPeriodicWord::operator==(const EventuallyPeriodicWord& other) const {
    const auto a = canonical(), b = other.canonical();
    return a.preperiod == b.preperiod && a.period == b.period;
}

std::vector<std::optional<int>> return_times(std::span<const EventuallyPeriodicWord> words) {
    std::vector<EventuallyPeriodicWord> canon;
    for (const auto& w : words) canon.push_back(w.canonical());
    for (std::size_t i = 0; i < canon.size(); ++i)
        for (std::size_t j = i + 1; j < canon.size(); ++j)
            if (canon[i] == canon[j]) throw BadParam("limit words " + std::to_string(i) + " and " +
                                                     std::to_string(j) + " coincide");
    std::vector<std::optional<int>> out;
    for (const auto& z : canon) {
        std::optional<int> ell;
        // Shifts beyond preperiod + period repeat earlier ones.
        const std::size_t horizon = z.preperiod.size() + z.period.size();
        for (std::size_t j = 1; j <= horizon && !ell; ++j) {
            const auto s = z.shifted(j).canonical();
            for (const auto& c : canon)
                if (s.preperiod == c.preperiod && s.period == c.period) ell = static_cast<int>(j);
        }
        out.push_back(ell);
    }
    return out;
}

double asymptotic_prediction(std::span<const EventuallyPeriodicWord> words) {
    double sum = 0.0;
    for (const auto& ell : return_times(words)) sum += ell ? 1.0 - std::ldexp(1.0, -*ell) : 1.0;
    return sum;
}

std::function<ForbiddenList(int)> prefix_family(std::vector<EventuallyPeriodicWord> words) {
    return [words = std::move(words)](int m) {
        std::vector<std::string> blocks;
        for (const auto& z : words) blocks.push_back(z.prefix(m));
        return ForbiddenList(std::move(blocks));
    };
}

AsymptoticCurve capacity_asymptotic_check(const std::function<ForbiddenList(int)>& family,
                                          std::span<const EventuallyPeriodicWord> limitWords,
                                          std::span<const int> mRange, std::optional<double> tolerance) {
    if (mRange.empty()) throw BadParam("empty range of block lengths");
    AsymptoticCurve curve;
    curve.prediction = asymptotic_prediction(limitWords);
    curve.tolerance = tolerance;

    std::vector<int> ms(mRange.begin(), mRange.end());
    std::sort(ms.begin(), ms.end());
    std::vector<ForbiddenList> lists;
    for (int m : ms) {
        lists.push_back(family(m));
        const auto& fl = lists.back();
        if (fl.m() != m) throw BadParam("family returned blocks of length " + std::to_string(fl.m()) +
                                        " for m = " + std::to_string(m));
        if (fl.p() != limitWords.size()) throw BadParam("family size differs from the number of limit words");
        for (std::size_t i = 0; i < fl.p(); ++i)
            if (fl.blocks()[i] != limitWords[i].prefix(m)) curve.prefixConsistent = false;
    }
    curve.points.resize(ms.size());
    parallel_for(ms.size(), [&](std::size_t k) {
        const auto r = capacity_exact(lists[k]);
        auto& pt = curve.points[k];
        pt.m = ms[k];
        pt.entropy = r.entropy;
        pt.perronRoot = r.perronRoot;
        // log 2 - log rho = -log1p(rho/2 - 1) keeps the small difference accurate.
        pt.ratio = -std::log1p(0.5 * r.perronRoot - 1.0) * std::ldexp(1.0, ms[k]);
    });

    const double last = curve.points.back().ratio;
    curve.finalRelativeGap = std::abs(last - curve.prediction) / curve.prediction;
    if (tolerance) curve.withinTolerance = curve.finalRelativeGap <= *tolerance;
    for (std::size_t k = curve.points.size() / 2 + 1; k < curve.points.size(); ++k) {
        const double prev = std::abs(curve.points[k - 1].ratio - curve.prediction);
        const double cur = std::abs(curve.points[k].ratio - curve.prediction);
        if (cur > prev + 1e-12) curve.eventuallyMonotone = false;
    }
    return curve;
}

DoublingCrossCheck doubling_cross_check(const ForbiddenList& fl) {
    const int m = fl.m();
    if (m > kCrossCheckMaxM) throw BadParam("cross-check needs m <= 12");
    const std::size_t cells = std::size_t{1} << m;
    const FiniteOperator closed = build_ulam_1d(doubling(), Partition1D::uniform(cells));
    Vector keep = Vector::Ones(static_cast<Eigen::Index>(cells));
    for (auto c : fl.codes()) keep[static_cast<Eigen::Index>(c)] = 0.0;
    const FiniteOperator open = closed.with_row_scale(keep, RowSums::substochastic);

    EigenOptions opts;
    opts.tol = 1e-14;
    opts.shift = 0.5;  // removes ties with eigenvalues on the circle of radius lambda
    const auto triple = leading_eigentriple(open, opts);

    DoublingCrossCheck out;
    out.m = m;
    out.cells = cells;
    out.lambdaEscape = triple.lambda;
    out.iterations = triple.iterations;
    out.halfPerronRoot = 0.5 * perron_root(fl).perronRoot;
    out.gap = std::abs(out.lambdaEscape - out.halfPerronRoot);
    return out;
}

}  // namespace rarelab
