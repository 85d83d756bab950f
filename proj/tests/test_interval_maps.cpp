#include "doctest.h"

#include "rarelab/errors.hpp"
#include "rarelab/interval_maps.hpp"
#include "rarelab/spectral.hpp"
#include "rarelab/ulam.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

using namespace rarelab;

namespace {

std::vector<double> samples(int n) {
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) xs.push_back((i + 0.5) / n);
    return xs;
}

/// Sum over branches of phi(inverse(x)) |inverse'(x)|.
double transfer(const PiecewiseMap& m, const std::function<double(double)>& phi, double x) {
    double s = 0.0;
    for (const auto& b : m.branches()) {
        if (x < b.imageLow() || x > b.imageHigh()) continue;
        const double y = b.inverse(x);
        s += phi(y) / b.derivAbs(y);
    }
    return s;
}

std::vector<PiecewiseMap> zoo() {
    return {doubling(), linear_mod1(3), linear_mod1(5), tent(), gauss(64), cusp(0.75), cusp(0.9)};
}

}  // namespace

TEST_CASE("builtin examples") {
    const PiecewiseMap d = doubling();
    REQUIRE(d.branches().size() == 2);
    for (const auto& b : d.branches()) CHECK(b.derivAbs(0.5 * (b.domainLeft + b.domainRight)) == 2.0);

    const PiecewiseMap g = gauss(64);
    REQUIRE(g.branches().size() == 64);
    for (int n = 1; n <= 64; ++n) {
        const Branch& b = g.branch_by_label(n);
        CHECK(b.domainLeft == doctest::Approx(1.0 / (n + 1)).epsilon(1e-15));
        CHECK(b.domainRight == doctest::Approx(1.0 / n).epsilon(1e-15));
        const double x = 0.5 * (b.domainLeft + b.domainRight);
        CHECK(g(x) == doctest::Approx(1.0 / x - n).epsilon(1e-14));
    }
    CHECK(g.truncation_defect() == doctest::Approx(1.0 / 65).epsilon(1e-12));

    const PiecewiseMap c1 = cusp(1.0), t = tent();
    for (double x : samples(97)) CHECK(c1(x) == doctest::Approx(t(x)).epsilon(1e-15));
    CHECK(c1.known_density().has_value());
    CHECK_FALSE(cusp(0.75).known_density().has_value());

    CHECK_THROWS_AS(cusp(0.5), BadParam);
    CHECK_THROWS_AS(cusp(1.01), BadParam);
    CHECK_THROWS_AS(linear_mod1(1), BadParam);
    CHECK_THROWS_AS(gauss(1), BadParam);
}

TEST_CASE("builtin factories by name and descriptor") {
    CHECK(builtin("gauss", {128}).branches().size() == 128);
    CHECK(builtin_from_descriptor("gauss:4096").descriptor() == "gauss:4096");
    CHECK(builtin_from_descriptor("linear_mod1:5").branches().size() == 5);
    CHECK(builtin_from_descriptor("cusp:0.75")(0.25) == doctest::Approx(1.0 - std::pow(0.5, 0.75)).epsilon(1e-15));
    CHECK_THROWS_AS(builtin_from_descriptor("sawtooth"), BadParam);
    CHECK_THROWS_AS(builtin_from_descriptor("gauss:x"), BadParam);
    CHECK_THROWS_AS(builtin("linear_mod1", {2.5}), BadParam);
}

TEST_CASE("branch inverses and expansion") {
    for (const auto& m : zoo()) {
        CAPTURE(m.descriptor());
        for (const auto& b : m.branches()) {
            for (int i = 1; i <= 100; ++i) {
                const double x = b.domainLeft + (b.domainRight - b.domainLeft) * i / 101.0;
                CHECK(std::abs(b.inverse(b.forward(x)) - x) <= 1e-12);
                CHECK(b.derivAbs(x) > 1.0);
            }
        }
    }
}

TEST_CASE("branch domains are disjoint and cover the unit interval") {
    for (const auto& m : zoo()) {
        CAPTURE(m.descriptor());
        double covered = 0.0;
        for (std::size_t k = 0; k < m.branches().size(); ++k) {
            const auto& b = m.branches()[k];
            covered += b.domainRight - b.domainLeft;
            if (k > 0) CHECK(m.branches()[k - 1].domainRight <= b.domainLeft);
        }
        CHECK(covered + m.truncation_defect() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("known densities integrate to one and are invariant") {
    using boost::math::quadrature::gauss_kronrod;
    for (const auto& m : zoo()) {
        if (!m.known_density()) continue;
        CAPTURE(m.descriptor());
        const auto& phi = *m.known_density();
        CHECK(gauss_kronrod<double, 61>::integrate(phi, 0.0, 1.0, 10, 1e-14) == doctest::Approx(1.0).epsilon(1e-10));
        const bool truncated = m.truncation_defect() > 0.0;
        const double tol = truncated ? 2.0 / static_cast<double>(m.branches().size()) + 1e-8 : 1e-8;
        for (int i = 0; i < 1000; ++i) {
            const double x = (i + 0.5) / 1000.0;
            CHECK(std::abs(transfer(m, phi, x) - phi(x)) <= tol);
        }
    }
}

TEST_CASE("periodic_point examples") {
    const PiecewiseMap d = doubling();
    const PeriodicPoint p0 = periodic_point(d, {0});
    CHECK(p0.z == 0.0);
    CHECK(p0.period == 1);
    CHECK(p0.multiplier == 2.0);

    const PeriodicPoint p2 = periodic_point(d, {0, 1});
    CHECK(p2.z == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(p2.period == 2);
    CHECK(p2.multiplier == doctest::Approx(4.0).epsilon(1e-12));

    const PeriodicPoint g = periodic_point(gauss(64), {1});
    CHECK(g.z == doctest::Approx(kGolden).epsilon(1e-14));
    CHECK(g.multiplier == doctest::Approx(1.0 / (kGolden * kGolden)).epsilon(1e-12));

    CHECK_THROWS_AS(periodic_point(d, {}), BadParam);
    CHECK_THROWS_AS(periodic_point(d, {7}), NotInDomain);
}

TEST_CASE("periodic points return to themselves with the chain-rule multiplier") {
    const std::vector<std::pair<PiecewiseMap, std::vector<int>>> cases = {
        {doubling(), {0, 0, 1}}, {doubling(), {1, 1, 0, 1}}, {linear_mod1(5), {3, 1}},
        {gauss(64), {2}},        {gauss(64), {1, 2}},         {tent(), {1}},
        {cusp(0.75), {1}},       {cusp(0.9), {0, 1}}};
    for (const auto& [m, it] : cases) {
        CAPTURE(m.descriptor());
        const PeriodicPoint p = periodic_point(m, it);
        double x = p.z, mult = 1.0;
        for (int k = 0; k < p.period; ++k) {
            mult *= m.branch_at(x).derivAbs(x);
            x = m(x);
        }
        CHECK(std::abs(x - p.z) <= 1e-12);
        CHECK(p.multiplier > 1.0);
        CHECK(std::abs(mult - p.multiplier) <= 1e-10 * p.multiplier);
    }
}

TEST_CASE("detect_periodic finds short orbits") {
    const auto p = detect_periodic(doubling(), 1.0 / 7.0);
    REQUIRE(p.has_value());
    CHECK(p->period == 3);
    CHECK(p->multiplier == doctest::Approx(8.0).epsilon(1e-12));
    CHECK_FALSE(detect_periodic(doubling(), 0.3).has_value());
}

TEST_CASE("golden_epsilon_k examples") {
    const GoldenInterval g1 = golden_epsilon_k(1);
    CHECK(g1.left == 0.5);
    CHECK(g1.right == 1.0);
    CHECK(g1.length == 0.5);
    CHECK(g1.dk == 1);
    CHECK(g1.dk1 == 2);
    CHECK(golden_epsilon_k(2).length == doctest::Approx(1.0 / 6.0).epsilon(1e-15));

    // The relative correction to z^{2k+1} (1 + z^2)^2 is of order z^{2k+2}.
    for (int k = 1; k <= 30; ++k) {
        const double lead = std::pow(kGolden, 2 * k + 1) * std::pow(1 + kGolden * kGolden, 2);
        CHECK(std::abs(golden_epsilon_k(k).length / lead - 1.0) <= std::pow(kGolden, 2 * k + 2));
    }
    const double lead16 = std::pow(kGolden, 33) * std::pow(1 + kGolden * kGolden, 2);
    CHECK(std::abs(golden_epsilon_k(16).length / lead16 - 1.0) < 1e-7);

    for (int k = 1; k <= 30; ++k) {
        const GoldenInterval g = golden_epsilon_k(k);
        CHECK(g.left < kGolden);
        CHECK(g.right > kGolden);
        CHECK(g.length == doctest::Approx(g.right - g.left).epsilon(1e-9));
    }
    CHECK_THROWS_AS(golden_epsilon_k(0), BadParam);
    CHECK_THROWS_AS(golden_epsilon_k(200), Overflow);
}

TEST_CASE("piecewise-linear maps from JSON") {
    const nlohmann::json spec = {{"name", "skew"},
                                 {"branches",
                                  {{{"domainLeft", 0.0}, {"domainRight", 0.4}, {"imageLeft", 0.0}, {"imageRight", 1.0}},
                                   {{"domainLeft", 0.4}, {"domainRight", 1.0}, {"imageLeft", 1.0}, {"imageRight", 0.0}}}}};
    const PiecewiseMap m = piecewise_linear_from_json(spec);
    CHECK(m.is_piecewise_linear());
    CHECK(m(0.2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m(0.7) == doctest::Approx(0.5).epsilon(1e-15));

    const auto dir = std::filesystem::temp_directory_path() / "rarelab-map-test";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "skew.json") << spec.dump();
    }
    CHECK(load_piecewise_linear((dir / "skew.json").string())(0.1) == doctest::Approx(0.25).epsilon(1e-15));

    nlohmann::json flat = spec;
    flat["branches"][1]["imageRight"] = 0.5;  // slope 5/6
    CHECK_THROWS_AS(piecewise_linear_from_json(flat), BadParam);

    nlohmann::json typo = spec;
    typo["branches"][0]["domainleft"] = 0.0;
    try {
        piecewise_linear_from_json(typo);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "map.branches[0].domainleft");
    }
}

TEST_CASE("cusp density vanishes at 1 with exponent 1/gamma - 1") {
    for (double gamma : {0.75, 0.9}) {
        CAPTURE(gamma);
        const Partition1D part = Partition1D::uniform(8192);
        const SpectralTriple t = leading_eigentriple(build_ulam_1d(cusp(gamma), part));
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        const Vector mid = part.midpoints();
        for (Eigen::Index i = 0; i < mid.size(); ++i) {
            if (mid[i] < 0.9 || mid[i] > 0.999) continue;
            const double lx = std::log(1.0 - mid[i]), ly = std::log(t.phi[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++n;
        }
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        CHECK(std::abs(slope - (1.0 / gamma - 1.0)) <= 0.05);
    }
}

// The correction at k = 10 is about 0.6 z^22 = 1.6e-5, so the 1e-7 level is reached only from k = 16.
TEST_CASE("golden_epsilon_k leading-order accuracy at k = 10" * doctest::may_fail()) {
    const double lead = std::pow(kGolden, 21) * std::pow(1 + kGolden * kGolden, 2);
    CHECK(std::abs(golden_epsilon_k(10).length / lead - 1.0) < 1e-7);
}
