#include "rarelab/interval_maps.hpp"

#include "rarelab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace rarelab {

using nlohmann::json;

namespace {

std::string fmt_param(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

Branch affine_branch(int label, double a, double b, double ya, double yb) {
    const double slope = (yb - ya) / (b - a);
    const double offset = ya - slope * a;
    Branch br;
    br.label = label;
    br.domainLeft = a;
    br.domainRight = b;
    br.imageAtLeft = ya;
    br.imageAtRight = yb;
    br.forward = [=](double x) { return ya + slope * (x - a); };
    br.inverse = [=](double y) { return a + (y - ya) / slope; };
    br.derivAbs = [s = std::abs(slope)](double) { return s; };
    br.affine = AffinePiece{slope, offset};
    return br;
}

}  // namespace

PiecewiseMap::PiecewiseMap(std::string name, std::vector<Branch> branches,
                           std::optional<std::function<double(double)>> knownDensity)
    : name_(std::move(name)), descriptor_(name_), branches_(std::move(branches)),
      density_(std::move(knownDensity)) {
    if (branches_.empty()) throw BadParam("map '" + name_ + "' has no branches");
    std::sort(branches_.begin(), branches_.end(),
              [](const Branch& a, const Branch& b) { return a.domainLeft < b.domainLeft; });
    double covered = 0.0;
    for (std::size_t i = 0; i < branches_.size(); ++i) {
        const Branch& b = branches_[i];
        if (!(b.domainLeft >= 0.0 && b.domainRight <= 1.0 && b.domainLeft < b.domainRight))
            throw BadParam("branch domain outside [0,1] or empty in map '" + name_ + "'");
        if (b.imageLow() < -1e-12 || b.imageHigh() > 1.0 + 1e-12 || b.imageAtLeft == b.imageAtRight)
            throw BadParam("branch image outside [0,1] or degenerate in map '" + name_ + "'");
        if (i > 0 && branches_[i - 1].domainRight > b.domainLeft + 1e-15)
            throw BadParam("overlapping branch domains in map '" + name_ + "'");
        covered += b.domainRight - b.domainLeft;
    }
    defect_ = std::max(0.0, 1.0 - covered);
    if (defect_ < 1e-13) defect_ = 0.0;
}

const Branch& PiecewiseMap::branch_at(double x) const {
    auto it = std::upper_bound(branches_.begin(), branches_.end(), x,
                               [](double v, const Branch& b) { return v < b.domainLeft; });
    if (it == branches_.begin()) throw NotInDomain("x = " + fmt_param(x) + " precedes every branch");
    --it;
    if (x > it->domainRight) throw NotInDomain("x = " + fmt_param(x) + " lies in a dropped region");
    return *it;
}

const Branch& PiecewiseMap::branch_by_label(int label) const {
    for (const auto& b : branches_)
        if (b.label == label) return b;
    throw NotInDomain("no branch labelled " + std::to_string(label) + " in map '" + name_ + "'");
}

double PiecewiseMap::operator()(double x) const {
    const Branch& b = branch_at(x);
    if (x == b.domainLeft) return b.imageAtLeft;
    if (x == b.domainRight) return b.imageAtRight;
    return b.forward(x);
}

bool PiecewiseMap::is_piecewise_linear() const {
    return std::all_of(branches_.begin(), branches_.end(), [](const Branch& b) { return b.affine.has_value(); });
}

PiecewiseMap linear_mod1(int k) {
    if (k < 2) throw BadParam("linear_mod1 needs k >= 2, got " + std::to_string(k));
    std::vector<Branch> bs;
    for (int j = 0; j < k; ++j) {
        const double a = static_cast<double>(j) / k;
        const double b = static_cast<double>(j + 1) / k;
        Branch br;
        br.label = j;
        br.domainLeft = a;
        br.domainRight = b;
        br.imageAtLeft = 0.0;
        br.imageAtRight = 1.0;
        br.forward = [=](double x) { return k * x - j; };
        br.inverse = [=](double y) { return (y + j) / k; };
        br.derivAbs = [=](double) { return static_cast<double>(k); };
        br.affine = AffinePiece{static_cast<double>(k), -static_cast<double>(j)};
        bs.push_back(std::move(br));
    }
    PiecewiseMap m("linear_mod1", std::move(bs), [](double) { return 1.0; });
    m.set_descriptor("linear_mod1:" + std::to_string(k));
    return m;
}

PiecewiseMap doubling() {
    PiecewiseMap base = linear_mod1(2);
    PiecewiseMap m("doubling", base.branches(), [](double) { return 1.0; });
    m.set_descriptor("doubling");
    return m;
}

PiecewiseMap cusp(double gamma) {
    if (!(gamma > 0.5 && gamma <= 1.0))
        throw BadParam("cusp exponent must lie in (1/2, 1], got " + fmt_param(gamma));
    const double ig = 1.0 / gamma;
    Branch left;
    left.label = 0;
    left.domainLeft = 0.0;
    left.domainRight = 0.5;
    left.imageAtLeft = 0.0;
    left.imageAtRight = 1.0;
    left.forward = [=](double x) { return 1.0 - std::pow(1.0 - 2.0 * x, gamma); };
    left.inverse = [=](double y) { return 0.5 * (1.0 - std::pow(1.0 - y, ig)); };
    left.derivAbs = [=](double x) { return 2.0 * gamma * std::pow(1.0 - 2.0 * x, gamma - 1.0); };
    Branch right;
    right.label = 1;
    right.domainLeft = 0.5;
    right.domainRight = 1.0;
    right.imageAtLeft = 1.0;
    right.imageAtRight = 0.0;
    right.forward = [=](double x) { return 1.0 - std::pow(2.0 * x - 1.0, gamma); };
    right.inverse = [=](double y) { return 0.5 * (1.0 + std::pow(1.0 - y, ig)); };
    right.derivAbs = [=](double x) { return 2.0 * gamma * std::pow(2.0 * x - 1.0, gamma - 1.0); };
    if (gamma == 1.0) {
        left.affine = AffinePiece{2.0, 0.0};
        right.affine = AffinePiece{-2.0, 2.0};
    }
    std::optional<std::function<double(double)>> density;
    if (gamma == 1.0) density = [](double) { return 1.0; };
    PiecewiseMap m("cusp", {left, right}, density);
    m.set_descriptor("cusp:" + fmt_param(gamma));
    return m;
}

PiecewiseMap tent() {
    PiecewiseMap c = cusp(1.0);
    PiecewiseMap m("tent", c.branches(), [](double) { return 1.0; });
    m.set_descriptor("tent");
    return m;
}

PiecewiseMap gauss(int nMax) {
    if (nMax < 2) throw BadParam("gauss needs N_max >= 2, got " + std::to_string(nMax));
    std::vector<Branch> bs;
    bs.reserve(static_cast<std::size_t>(nMax));
    for (int n = 1; n <= nMax; ++n) {
        Branch br;
        br.label = n;
        br.domainLeft = 1.0 / (n + 1);
        br.domainRight = 1.0 / n;
        br.imageAtLeft = 1.0;
        br.imageAtRight = 0.0;
        br.forward = [n](double x) { return 1.0 / x - n; };
        br.inverse = [n](double y) { return 1.0 / (y + n); };
        br.derivAbs = [](double x) { return 1.0 / (x * x); };
        bs.push_back(std::move(br));
    }
    PiecewiseMap m("gauss", std::move(bs),
                   [](double x) { return 1.0 / ((1.0 + x) * std::numbers::ln2); });
    m.set_descriptor("gauss:" + std::to_string(nMax));
    return m;
}

PiecewiseMap piecewise_linear(std::string name, const std::vector<AffineBranchSpec>& specs) {
    if (specs.empty()) throw BadParam("piecewise-linear map needs at least one branch");
    std::vector<Branch> bs;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        if (!(s.domainRight > s.domainLeft))
            throw BadParam("branch " + std::to_string(i) + " has an empty domain");
        const double slope = (s.imageRight - s.imageLeft) / (s.domainRight - s.domainLeft);
        if (!(std::abs(slope) > 1.0))
            throw BadParam("branch " + std::to_string(i) + " is not expanding (|slope| = " +
                           fmt_param(std::abs(slope)) + ")");
        bs.push_back(affine_branch(static_cast<int>(i), s.domainLeft, s.domainRight, s.imageLeft,
                                   s.imageRight));
    }
    PiecewiseMap m(std::move(name), std::move(bs));
    double prev = 0.0;
    for (const auto& b : m.branches()) {
        if (std::abs(b.domainLeft - prev) > 1e-12)
            throw BadParam("branch domains of '" + m.name() + "' do not tile [0,1] near " + fmt_param(prev));
        prev = b.domainRight;
    }
    if (std::abs(prev - 1.0) > 1e-12) throw BadParam("branch domains of '" + m.name() + "' stop before 1");
    return m;
}

PiecewiseMap piecewise_linear_from_json(const json& spec) {
    if (!spec.is_object()) throw ConfigError("map", "expected an object");
    for (const auto& [key, value] : spec.items())
        if (key != "name" && key != "branches") throw ConfigError("map." + key, "unknown key");
    if (!spec.contains("branches") || !spec["branches"].is_array())
        throw ConfigError("map.branches", "expected an array of affine branches");
    std::vector<AffineBranchSpec> specs;
    std::size_t idx = 0;
    for (const auto& b : spec["branches"]) {
        const std::string path = "map.branches[" + std::to_string(idx++) + "]";
        if (!b.is_object()) throw ConfigError(path, "expected an object");
        for (const auto& [key, value] : b.items()) {
            if (key != "domainLeft" && key != "domainRight" && key != "imageLeft" && key != "imageRight")
                throw ConfigError(path + "." + key, "unknown key");
            if (!value.is_number()) throw ConfigError(path + "." + key, "expected a number");
        }
        for (const char* key : {"domainLeft", "domainRight", "imageLeft", "imageRight"})
            if (!b.contains(key)) throw ConfigError(path + "." + key, "missing");
        specs.push_back({b["domainLeft"].get<double>(), b["domainRight"].get<double>(),
                         b["imageLeft"].get<double>(), b["imageRight"].get<double>()});
    }
    const std::string name = spec.value("name", std::string("custom"));
    PiecewiseMap m = piecewise_linear(name, specs);
    m.set_descriptor("custom:" + name);
    return m;
}

PiecewiseMap load_piecewise_linear(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open map file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError("map", std::string("malformed JSON: ") + e.what());
    }
    return piecewise_linear_from_json(j);
}

PiecewiseMap builtin(const std::string& name, const std::vector<double>& params) {
    auto need = [&](std::size_t n) {
        if (params.size() != n)
            throw BadParam("map '" + name + "' expects " + std::to_string(n) + " parameter(s)");
    };
    auto as_int = [&](double v) {
        if (v != std::floor(v)) throw BadParam("map '" + name + "' expects an integer parameter");
        return static_cast<int>(v);
    };
    if (name == "doubling") { need(0); return doubling(); }
    if (name == "tent") { need(0); return tent(); }
    if (name == "linear_mod1") { need(1); return linear_mod1(as_int(params[0])); }
    if (name == "gauss") { need(1); return gauss(as_int(params[0])); }
    if (name == "cusp") { need(1); return cusp(params[0]); }
    throw BadParam("unknown map '" + name + "'");
}

PiecewiseMap builtin_from_descriptor(const std::string& descriptor) {
    const auto colon = descriptor.find(':');
    if (colon == std::string::npos) return builtin(descriptor);
    const std::string name = descriptor.substr(0, colon);
    const std::string arg = descriptor.substr(colon + 1);
    double v = 0.0;
    try {
        std::size_t used = 0;
        v = std::stod(arg, &used);
        if (used != arg.size()) throw std::invalid_argument(arg);
    } catch (const std::exception&) {
        throw BadParam("cannot parse map parameter '" + arg + "'");
    }
    return builtin(name, {v});
}

PeriodicPoint periodic_point(const PiecewiseMap& map, const std::vector<int>& itinerary) {
    if (itinerary.empty()) throw BadParam("itinerary must be nonempty");
    std::vector<const Branch*> bs;
    for (int label : itinerary) bs.push_back(&map.branch_by_label(label));
    const std::size_t p = bs.size();

    // One sweep of the inverse composition; returns the orbit z, T z, ..., T^{p-1} z.
    auto sweep = [&](double x) {
        std::vector<double> orbit(p);
        double y = x;
        for (std::size_t j = p; j-- > 0;) {
            y = std::clamp(y, bs[j]->imageLow(), bs[j]->imageHigh());
            y = std::clamp(bs[j]->inverse(y), bs[j]->domainLeft, bs[j]->domainRight);
            orbit[j] = y;
        }
        return orbit;
    };

    double x = 0.5 * (bs[0]->domainLeft + bs[0]->domainRight);
    std::vector<double> orbit;
    bool converged = false;
    for (int it = 0; it < 5000; ++it) {
        orbit = sweep(x);
        const double nx = orbit[0];
        if (nx == x) {
            x = nx;
            converged = true;
            break;
        }
        x = nx;
    }
    orbit = sweep(x);
    double mult = 1.0;
    for (std::size_t j = 0; j < p; ++j) mult *= bs[j]->derivAbs(orbit[j]);
    if (!(mult > 1.0)) throw NoContraction("composed inverse branches do not contract (multiplier " +
                                           fmt_param(mult) + ")");
    if (!converged) {
        // Iterates may cycle between neighbouring floats; accept a last step below 1e-14.
        if (std::abs(sweep(x)[0] - x) > 1e-14) throw NoContraction("inverse-branch iteration stalled");
    }
    // Forward check: T^p z = z along the prescribed branches.
    double y = x;
    for (std::size_t j = 0; j < p; ++j) {
        if (!bs[j]->contains(y)) throw NotInDomain("orbit leaves the itinerary's branch domains");
        y = (y == bs[j]->domainLeft) ? bs[j]->imageAtLeft
            : (y == bs[j]->domainRight) ? bs[j]->imageAtRight : bs[j]->forward(y);
    }
    if (std::abs(y - x) > 1e-12) throw NotInDomain("T^p(z) differs from z by " + fmt_param(std::abs(y - x)));
    return PeriodicPoint{x, static_cast<int>(p), mult, itinerary};
}

std::optional<PeriodicPoint> detect_periodic(const PiecewiseMap& map, double z, int maxPeriod) {
    std::vector<int> labels;
    double y = z;
    double mult = 1.0;
    try {
        for (int p = 1; p <= maxPeriod; ++p) {
            const Branch& b = map.branch_at(y);
            labels.push_back(b.label);
            mult *= b.derivAbs(y);
            y = map(y);
            if (std::abs(y - z) <= 1e-12) return PeriodicPoint{z, p, mult, labels};
        }
    } catch (const NotInDomain&) {
        return std::nullopt;
    }
    return std::nullopt;
}

GoldenInterval golden_epsilon_k(int k) {
    if (k < 1) throw BadParam("k must be at least 1");
    // F_{k+2} must fit in 64 bits for the endpoint ratios.
    if (k > 90) throw Overflow("Fibonacci denominators exceed 64 bits for k = " + std::to_string(k));
    std::uint64_t f0 = 0, f1 = 1;  // F_0, F_1
    for (int i = 1; i <= k; ++i) {
        const std::uint64_t f2 = f0 + f1;
        f0 = f1;
        f1 = f2;
    }
    // now f0 = F_k, f1 = F_{k+1}
    const std::uint64_t fk = f0, fk1 = f1, fk2 = f0 + f1;
    GoldenInterval g;
    g.k = k;
    const double a = static_cast<double>(fk) / static_cast<double>(fk1);   // f^{-k}(0)
    const double b = static_cast<double>(fk1) / static_cast<double>(fk2);  // f^{-k}(1)
    g.left = std::min(a, b);
    g.right = std::max(a, b);
    g.dk = fk1;
    g.dk1 = fk2;
    const unsigned __int128 prod = static_cast<unsigned __int128>(fk1) * fk2;
    g.length = 1.0 / static_cast<double>(prod);
    return g;
}

}  // namespace rarelab
