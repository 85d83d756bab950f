#include "doctest.h"

#include "rarelab/capacity.hpp"
#include "rarelab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace rarelab;

namespace {

/// Largest root of x^{m+1} - 2 x^m + 1, the growth rate of binary words without a run of m ones.
double run_root(int m) {
    auto f = [m](double x) { return std::pow(x, m + 1) - 2.0 * std::pow(x, m) + 1.0; };
    double lo = 1.5, hi = 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

const double kPhi = (1.0 + std::sqrt(5.0)) / 2.0;

std::vector<EventuallyPeriodicWord> words(std::initializer_list<const char*> texts) {
    std::vector<EventuallyPeriodicWord> w;
    for (const char* t : texts) w.push_back(EventuallyPeriodicWord::parse(t));
    return w;
}

ForbiddenList random_list(int m, std::size_t p, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::uint64_t> pick(0, (std::uint64_t{1} << m) - 1);
    std::vector<std::string> blocks;
    while (blocks.size() < p) {
        const std::uint64_t c = pick(rng);
        std::string b;
        for (int i = m - 1; i >= 0; --i) b.push_back((c >> i) & 1 ? '1' : '0');
        if (std::find(blocks.begin(), blocks.end(), b) == blocks.end()) blocks.push_back(b);
    }
    return ForbiddenList(blocks);
}

}  // namespace

TEST_CASE("ForbiddenList validation") {
    CHECK(ForbiddenList({"0110", "1111"}).m() == 4);
    CHECK(ForbiddenList({}, 3).p() == 0);
    CHECK(ForbiddenList({"101"}).codes() == std::vector<std::uint64_t>{5});
    CHECK_THROWS_AS(ForbiddenList({}), BadParam);
    CHECK_THROWS_AS(ForbiddenList({"01", "011"}), BadParam);
    CHECK_THROWS_AS(ForbiddenList({"012"}), BadParam);
    CHECK_THROWS_AS(ForbiddenList({"11", "11"}), BadParam);
    CHECK_THROWS_AS(capacity_exact(ones_block(kCapacityMaxM + 1)), BadParam);
    CHECK(ones_block(5).blocks().front() == "11111");
    CHECK(all_blocks(3).p() == 8);
}

TEST_CASE("capacity examples") {
    const CapacityResult full = capacity_exact(ForbiddenList({}, 4));
    CHECK(full.entropy == doctest::Approx(std::numbers::ln2).epsilon(1e-14));
    CHECK(full.bits == doctest::Approx(1.0).epsilon(1e-14));

    const CapacityResult golden = capacity_exact(ForbiddenList({"11"}));
    CHECK(golden.perronRoot == doctest::Approx(kPhi).epsilon(1e-14));
    CHECK(golden.entropy == doctest::Approx(std::log(kPhi)).epsilon(1e-14));
    REQUIRE(golden.denseOracleRoot.has_value());
    CHECK(*golden.denseOracleRoot == doctest::Approx(kPhi).epsilon(1e-12));

    const CapacityResult ten = capacity_exact(ones_block(10));
    CHECK(ten.perronRoot == doctest::Approx(run_root(10)).epsilon(1e-13));
    CHECK(ten.bracket <= 1e-12);
    CHECK_FALSE(ten.denseOracleRoot.has_value());

    CHECK_THROWS_AS(capacity_exact(all_blocks(3)), EmptyLanguage);
    CHECK(perron_root(all_blocks(3)).perronRoot == 0.0);
    // 00 and 11 forbidden leaves only the two alternating sequences: zero entropy, not empty.
    CHECK(capacity_exact(ForbiddenList({"00", "11"})).entropy == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("word counts") {
    CHECK(word_count_oracle(ForbiddenList({"11"}), 5) == 13);
    for (int n = 1; n <= 20; ++n) CHECK(word_count_oracle(ForbiddenList({}, 3), n) == (std::uint64_t{1} << n));
    CHECK(word_count_oracle(ForbiddenList({"00", "11"}), 6) == 2);
    // Words shorter than m are never constrained.
    CHECK(word_count_oracle(ones_block(6), 5) == 32);
    CHECK_THROWS_AS(word_count_oracle(ForbiddenList({}, 2), kWordCountMaxN + 1), BadParam);
}

TEST_CASE("word-count growth agrees with the Perron root") {
    const std::vector<ForbiddenList> lists = {ForbiddenList({"11"}), ones_block(4), ones_block(10),
                                              ForbiddenList({"0110", "1001", "1111"}).with("0000")};
    for (const auto& fl : lists) {
        CHECK(capacity_from_word_counts(fl, 40).entropy == doctest::Approx(capacity_exact(fl).entropy).epsilon(1e-7));
    }
}

TEST_CASE("random lists: dense oracle, word counts and monotonicity in the list") {
    std::mt19937_64 rng(7);
    int checked = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const int m = 3 + trial % 5;
        const ForbiddenList fl = random_list(m, 1 + trial % 3, rng);
        CAPTURE(fl.blocks().front());
        const CapacityResult r = perron_root(fl);
        if (r.denseOracleRoot) CHECK(std::abs(*r.denseOracleRoot - r.perronRoot) <= 1e-10);
        if (r.perronRoot < 1.0) continue;
        ++checked;
        // Adding a block never increases the entropy.
        const ForbiddenList more = [&] {
            for (;;) {
                const ForbiddenList extra = random_list(m, 1, rng);
                const auto& b = extra.blocks().front();
                if (std::find(fl.blocks().begin(), fl.blocks().end(), b) == fl.blocks().end()) return fl.with(b);
            }
        }();
        CHECK(perron_root(more).perronRoot <= r.perronRoot + 1e-12);
    }
    CHECK(checked >= 30);
}

TEST_CASE("eventually periodic words") {
    const auto w = EventuallyPeriodicWord::parse("10(01)");
    CHECK(w.prefix(7) == "1001010");
    CHECK(w.canonical().to_string() == "10(01)");
    CHECK(EventuallyPeriodicWord::parse("1(01)").canonical().to_string() == "(10)");
    CHECK(EventuallyPeriodicWord::parse("(1)") == EventuallyPeriodicWord::parse("1(11)"));
    CHECK(EventuallyPeriodicWord::parse("0(1)").shifted(1).canonical().to_string() == "(1)");
    CHECK_THROWS_AS(EventuallyPeriodicWord::parse("101"), Undecidable);
    CHECK_THROWS_AS(EventuallyPeriodicWord::parse("1(2)"), Undecidable);
}

TEST_CASE("asymptotic prediction examples") {
    CHECK(asymptotic_prediction(words({"(1)"})) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(asymptotic_prediction(words({"(10)"})) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(asymptotic_prediction(words({"1(0)"})) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(asymptotic_prediction(words({"(1)", "(0)"})) == doctest::Approx(1.0).epsilon(1e-15));
    const auto rt = return_times(words({"(10)", "(01)"}));
    REQUIRE(rt.size() == 2);
    CHECK(rt[0] == 1);
    CHECK(rt[1] == 1);
    CHECK_FALSE(return_times(words({"1(0)"}))[0].has_value());
}

TEST_CASE("doubling map cross-check") {
    const DoublingCrossCheck g = doubling_cross_check(ForbiddenList({"11"}));
    CHECK(g.lambdaEscape == doctest::Approx(kPhi / 2.0).epsilon(1e-10));
    CHECK(g.gap <= 1e-10);
    CHECK(doubling_cross_check(ones_block(5)).gap <= 1e-10);
    const DoublingCrossCheck all = doubling_cross_check(all_blocks(4));
    CHECK(all.lambdaEscape == 0.0);
    CHECK(all.halfPerronRoot == 0.0);
    CHECK_THROWS_AS(doubling_cross_check(ones_block(kCrossCheckMaxM + 1)), BadParam);
}

TEST_CASE("asymptotic curve for the blocks 1^m") {
    std::vector<int> ms;
    for (int m = 4; m <= 14; ++m) ms.push_back(m);
    const auto limit = words({"(1)"});
    const AsymptoticCurve c = capacity_asymptotic_check(prefix_family(limit), limit, ms, 0.01);
    CHECK(c.prediction == 0.5);
    CHECK(c.finalRelativeGap <= 0.01);
    CHECK(c.withinTolerance);
    CHECK(c.eventuallyMonotone);
    CHECK(c.prefixConsistent);
    for (const auto& p : c.points) CHECK(p.perronRoot == doctest::Approx(run_root(p.m)).epsilon(1e-13));
}

TEST_CASE("asymptotic curve for a period-2 limit word") {
    std::vector<int> ms;
    for (int m = 6; m <= 16; ++m) ms.push_back(m);
    const auto limit = words({"(10)"});
    const AsymptoticCurve c = capacity_asymptotic_check(prefix_family(limit), limit, ms);
    CHECK(c.prediction == 0.75);
    CHECK(c.finalRelativeGap <= 0.01);
}

TEST_CASE("asymptotic curve for the pair 1^m, 0^m") {
    const std::vector<int> ms = {8, 10, 12};
    const auto limit = words({"(1)", "(0)"});
    const AsymptoticCurve c = capacity_asymptotic_check(prefix_family(limit), limit, ms);
    CHECK(c.prediction == 1.0);
    const double h12 = capacity_exact(ForbiddenList({std::string(12, '1'), std::string(12, '0')})).entropy;
    CHECK(c.points.back().ratio == doctest::Approx((std::numbers::ln2 - h12) * 4096.0).epsilon(1e-12));
    CHECK(c.finalRelativeGap <= 0.01);
}
