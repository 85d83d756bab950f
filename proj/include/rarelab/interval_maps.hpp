#pragma once

#include "json.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace rarelab {

/// Slope/offset pair of an affine branch: T(x) = slope * x + offset.
struct AffinePiece {
    double slope = 0.0;
    double offset = 0.0;
};

/**
 * A monotone branch of an interval map. `forward` is evaluated on the open
 * domain; values at the endpoints are given by `imageAtLeft`/`imageAtRight`
 * (one-sided limits) so that exact image endpoints never depend on roundoff.
 */
struct Branch {
    int label = 0;
    double domainLeft = 0.0;
    double domainRight = 0.0;
    double imageAtLeft = 0.0;
    double imageAtRight = 0.0;
    std::function<double(double)> forward;
    std::function<double(double)> inverse;
    std::function<double(double)> derivAbs;
    std::optional<AffinePiece> affine;

    bool increasing() const noexcept { return imageAtRight > imageAtLeft; }
    double imageLow() const noexcept { return increasing() ? imageAtLeft : imageAtRight; }
    double imageHigh() const noexcept { return increasing() ? imageAtRight : imageAtLeft; }
    bool contains(double x) const noexcept { return x >= domainLeft && x <= domainRight; }
};

class PiecewiseMap {
public:
    PiecewiseMap(std::string name, std::vector<Branch> branches,
                 std::optional<std::function<double(double)>> knownDensity = std::nullopt);

    const std::string& name() const noexcept { return name_; }
    const std::vector<Branch>& branches() const noexcept { return branches_; }
    const std::optional<std::function<double(double)>>& known_density() const noexcept {
        return density_;
    }
    /// Lebesgue measure of [0,1] not covered by any branch domain (dropped branches).
    double truncation_defect() const noexcept { return defect_; }
    /// Canonical description, e.g. "gauss:4096".
    const std::string& descriptor() const noexcept { return descriptor_; }
    void set_descriptor(std::string d) { descriptor_ = std::move(d); }

    /// Branch whose closed domain contains x; ties at shared endpoints go to the right branch.
    const Branch& branch_at(double x) const;
    const Branch& branch_by_label(int label) const;
    double operator()(double x) const;
    bool is_piecewise_linear() const;

private:
    std::string name_;
    std::string descriptor_;
    std::vector<Branch> branches_;
    std::optional<std::function<double(double)>> density_;
    double defect_ = 0.0;
};

PiecewiseMap doubling();
PiecewiseMap linear_mod1(int k);
PiecewiseMap tent();
PiecewiseMap gauss(int nMax);
PiecewiseMap cusp(double gamma);

struct AffineBranchSpec {
    double domainLeft, domainRight, imageLeft, imageRight;
};

/// Affine branches from endpoint data; rejects branches with |slope| <= 1.
PiecewiseMap piecewise_linear(std::string name, const std::vector<AffineBranchSpec>& specs);
PiecewiseMap piecewise_linear_from_json(const nlohmann::json& spec);
PiecewiseMap load_piecewise_linear(const std::string& path);

/// Factory by name: doubling, linear_mod1(k), tent, gauss(N_max), cusp(gamma).
PiecewiseMap builtin(const std::string& name, const std::vector<double>& params = {});
/// Parses "name" or "name:param", e.g. "gauss:4096", "cusp:0.75", "linear_mod1:5".
PiecewiseMap builtin_from_descriptor(const std::string& descriptor);

struct PeriodicPoint {
    double z = 0.0;
    int period = 0;
    double multiplier = 0.0;
    std::vector<int> itinerary;
};

/// Fixed point of the composed inverse branches selected by the itinerary (labels).
PeriodicPoint periodic_point(const PiecewiseMap& map, const std::vector<int>& itinerary);

/// Detects whether z returns to itself within maxPeriod steps (tolerance 1e-12).
std::optional<PeriodicPoint> detect_periodic(const PiecewiseMap& map, double z, int maxPeriod = 16);

struct GoldenInterval {
    int k = 0;
    double left = 0.0;
    double right = 0.0;
    double length = 0.0;
    std::uint64_t dk = 0;
    std::uint64_t dk1 = 0;
};

/// Interval between the k-th preimages of 0 and 1 under f(x) = 1/x - 1 (Fibonacci arithmetic).
GoldenInterval golden_epsilon_k(int k);

inline const double kGolden = 0.6180339887498948482;  // (sqrt(5) - 1) / 2

}  // namespace rarelab
