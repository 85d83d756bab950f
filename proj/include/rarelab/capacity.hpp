#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rarelab {

/// Distinct binary words of a common length m. An empty list (the full shift) needs m explicitly.
class ForbiddenList {
public:
    explicit ForbiddenList(std::vector<std::string> blocks, int m = 0);

    const std::vector<std::string>& blocks() const noexcept { return blocks_; }
    int m() const noexcept { return m_; }
    std::size_t p() const noexcept { return blocks_.size(); }
    /// Block read as an m-bit integer, first symbol most significant.
    std::vector<std::uint64_t> codes() const;
    /// Same list with one more block.
    ForbiddenList with(const std::string& block) const;

private:
    std::vector<std::string> blocks_;
    int m_ = 1;
};

/// One binary word per line; blank lines and lines starting with '#' are skipped.
ForbiddenList read_forbidden_list(const std::string& path);

/// {1^m}
ForbiddenList ones_block(int m);
/// All 2^m words of length m.
ForbiddenList all_blocks(int m);

enum class CapacityMethod { transfer_matrix, dp_oracle };
const char* to_string(CapacityMethod m);

struct CapacityResult {
    /// Natural-log entropy and the same value in bits.
    double entropy = 0.0;
    double bits = 0.0;
    double perronRoot = 0.0;
    CapacityMethod method = CapacityMethod::transfer_matrix;
    int m = 0;
    std::size_t p = 0;
    std::size_t states = 0;
    long iterations = 0;
    /// Width of the final Collatz-Wielandt bracket around the Perron root.
    double bracket = 0.0;
    /// Dense eigenvalue computation, run for m <= kCapacityDenseMaxM.
    std::optional<double> denseOracleRoot;
};

inline constexpr int kCapacityMaxM = 20;
inline constexpr int kCapacityDenseMaxM = 9;

/**
 * Spectral radius of the follower graph on (m-1)-suffix states with one edge removed
 * per forbidden block. Returns 0 when the graph has no cycle.
 */
CapacityResult perron_root(const ForbiddenList& fl, double tol = 1e-14);

/// Entropy log(rho); throws EmptyLanguage when rho < 1.
CapacityResult capacity_exact(const ForbiddenList& fl, double tol = 1e-14);

inline constexpr int kWordCountMaxN = 62;

/// Exact number of admissible words of length n (dynamic programming over suffix states).
std::uint64_t word_count_oracle(const ForbiddenList& fl, int n);

/// Entropy from the growth ratio count(n + 1) / count(n).
CapacityResult capacity_from_word_counts(const ForbiddenList& fl, int n);

/// Binary sequence preperiod followed by period repeated forever.
struct EventuallyPeriodicWord {
    std::string preperiod;
    std::string period;

    /// Parses "pre(period)", e.g. "(1)", "1(0)", "(10)". Throws Undecidable without a period part.
    static EventuallyPeriodicWord parse(const std::string& text);
    /// Shortest preperiod and primitive period describing the same sequence.
    EventuallyPeriodicWord canonical() const;
    EventuallyPeriodicWord shifted(std::size_t j) const;
    /// First n symbols.
    std::string prefix(int n) const;
    std::string to_string() const;
    bool operator==(const EventuallyPeriodicWord& other) const;
};

/// l(i) = min{j >= 1 : shift^j z_i in the list}; empty when no shift returns.
std::vector<std::optional<int>> return_times(std::span<const EventuallyPeriodicWord> words);

/// sum_i (1 - 2^{-l(i)}) with 2^{-inf} = 0.
double asymptotic_prediction(std::span<const EventuallyPeriodicWord> words);

/// Family m -> {prefixes of length m of the limit words}.
std::function<ForbiddenList(int)> prefix_family(std::vector<EventuallyPeriodicWord> words);

struct AsymptoticPoint {
    int m = 0;
    double entropy = 0.0;
    double perronRoot = 0.0;
    /// (log 2 - h) / 2^{-m}
    double ratio = 0.0;
};

struct AsymptoticCurve {
    std::vector<AsymptoticPoint> points;
    double prediction = 0.0;
    /// |ratio - prediction| / prediction at the largest m.
    double finalRelativeGap = 0.0;
    std::optional<double> tolerance;
    bool withinTolerance = true;
    /// |ratio - prediction| is nonincreasing over the second half of the curve.
    bool eventuallyMonotone = true;
    /// Every block is a prefix of its limit word (the limit point lies in its cylinder).
    bool prefixConsistent = true;
};

/// Points are evaluated in parallel; blocks of family(m) are matched to limit words by index.
AsymptoticCurve capacity_asymptotic_check(const std::function<ForbiddenList(int)>& family,
                                          std::span<const EventuallyPeriodicWord> limitWords,
                                          std::span<const int> mRange,
                                          std::optional<double> tolerance = std::nullopt);

struct DoublingCrossCheck {
    int m = 0;
    std::size_t cells = 0;
    double lambdaEscape = 0.0;
    double halfPerronRoot = 0.0;
    double gap = 0.0;
    long iterations = 0;
};

inline constexpr int kCrossCheckMaxM = 12;

/// Doubling map on the dyadic 2^m grid with the forbidden cylinders as the hole, against rho / 2.
DoublingCrossCheck doubling_cross_check(const ForbiddenList& fl);

}  // namespace rarelab
