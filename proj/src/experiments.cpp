#include "rarelab/experiments.hpp"

#include "rarelab/capacity.hpp"
#include "rarelab/errors.hpp"
#include "rarelab/escape.hpp"
#include "rarelab/metastab.hpp"
#include "rarelab/parallel.hpp"
#include "rarelab/perturbation.hpp"
#include "rarelab/ulam.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>

namespace rarelab {

namespace {

ordered_json ladder_json(double start, double ratio, int count) {
    return ordered_json{{"start", start}, {"ratio", ratio}, {"count", count}};
}

struct Entry {
    ExperimentInfo info;
    std::function<ordered_json()> defaults;
    std::function<Report(const ordered_json&, const RunOptions&)> run;
};

const std::map<std::string, Entry>& registry();

const Entry& entry(const std::string& name) {
    const auto& reg = registry();
    const auto it = reg.find(name);
    if (it == reg.end()) throw ConfigError("experiment", "unknown experiment '" + name + "'");
    return it->second;
}

std::string join(const std::string& prefix, const std::string& key) { return prefix.empty() ? key : prefix + "." + key; }

const char* kind_of(const ordered_json& j) {
    if (j.is_null()) return "null";
    if (j.is_boolean()) return "boolean";
    if (j.is_number_integer()) return "integer";
    if (j.is_number()) return "number";
    if (j.is_string()) return "string";
    if (j.is_array()) return "array";
    return "object";
}

/// Checks `value` against the type of `schema` and returns it in the schema's representation.
ordered_json conform(const ordered_json& schema, const ordered_json& value, const std::string& path) {
    if (schema.is_object()) {
        if (!value.is_object()) throw ConfigError(path, std::string("expected an object, got ") + kind_of(value));
        ordered_json out = schema;
        for (const auto& [k, v] : value.items()) {
            const std::string p = join(path, k);
            if (!schema.contains(k)) throw ConfigError(p, "unknown key");
            out[k] = conform(schema[k], v, p);
        }
        return out;
    }
    if (schema.is_null()) {
        // Optional number.
        if (value.is_null() || value.is_number()) return value.is_null() ? value : ordered_json(value.get<double>());
        throw ConfigError(path, std::string("expected a number or null, got ") + kind_of(value));
    }
    if (schema.is_boolean() && !value.is_boolean())
        throw ConfigError(path, std::string("expected a boolean, got ") + kind_of(value));
    if (schema.is_number_integer()) {
        if (value.is_number_integer()) return value;
        if (value.is_number_float() && std::nearbyint(value.get<double>()) == value.get<double>() &&
            std::abs(value.get<double>()) < 9e15)
            return ordered_json(static_cast<long long>(value.get<double>()));
        throw ConfigError(path, std::string("expected an integer, got ") + kind_of(value));
    }
    if (schema.is_number_float()) {
        if (!value.is_number()) throw ConfigError(path, std::string("expected a number, got ") + kind_of(value));
        return ordered_json(value.get<double>());
    }
    if (schema.is_string() && !value.is_string())
        throw ConfigError(path, std::string("expected a string, got ") + kind_of(value));
    if (schema.is_array() && !value.is_array())
        throw ConfigError(path, std::string("expected an array, got ") + kind_of(value));
    return value;
}

// Typed accessors that report the field path on failure.

double num(const ordered_json& c, const std::string& key) { return c.at(key).get<double>(); }
long long integer(const ordered_json& c, const std::string& key) { return c.at(key).get<long long>(); }
std::string str(const ordered_json& c, const std::string& key) { return c.at(key).get<std::string>(); }

long long positive(const ordered_json& c, const std::string& key, long long lo = 1, long long hi = 1LL << 40,
                   const std::string& prefix = "") {
    const long long v = integer(c, key);
    if (v < lo || v > hi)
        throw ConfigError(join(prefix, key), "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
}

double in_range(const ordered_json& c, const std::string& key, double lo, double hi, const std::string& prefix = "") {
    const double v = num(c, key);
    if (!(v >= lo && v <= hi))
        throw ConfigError(join(prefix, key), "must lie in [" + format_double(lo) + ", " + format_double(hi) + "]");
    return v;
}

std::vector<double> ladder_from(const ordered_json& c, const std::string& key = "ladder") {
    const auto& l = c.at(key);
    const double start = num(l, "start"), ratio = num(l, "ratio");
    if (!(start > 0.0 && start <= 0.5)) throw ConfigError(key + ".start", "must lie in (0, 1/2]");
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError(key + ".ratio", "must lie in (0, 1)");
    const long long count = positive(l, "count", 1, 64, key);
    return geometric_ladder(start, ratio, static_cast<int>(count));
}

PiecewiseMap map_from(const ordered_json& c, const std::string& key = "map") {
    const std::string d = str(c, key);
    try {
        if (d.size() > 5 && d.substr(d.size() - 5) == ".json") return load_piecewise_linear(d);
        return builtin_from_descriptor(d);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(key, e.what());
    }
}

ForbiddenList list_from(const ordered_json& c) {
    const std::string file = str(c, "blocksFile");
    const auto& blocks = c.at("blocks");
    if (!file.empty() && !blocks.empty()) throw ConfigError("blocks", "give either blocks or blocksFile, not both");
    try {
        if (!file.empty()) return read_forbidden_list(file);
        std::vector<std::string> words;
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            if (!blocks[i].is_string()) throw ConfigError("blocks." + std::to_string(i), "expected a string");
            words.push_back(blocks[i].get<std::string>());
        }
        const long long m = c.contains("m") ? integer(c, "m") : 0;
        return ForbiddenList(std::move(words), static_cast<int>(m));
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(file.empty() ? "blocks" : "blocksFile", e.what());
    }
}

ordered_json slope_json(const SlopeEstimate& s) {
    return ordered_json{{"value", s.value},
                        {"method", to_string(s.method)},
                        {"richardson", s.richardson},
                        {"regression", s.regression},
                        {"regressionSE", s.regressionSE},
                        {"uncertainty", s.uncertainty},
                        {"consistent", s.consistent}};
}

double rel_error(double value, double reference) { return std::abs(value / reference - 1.0); }

constexpr double kIdentityFactor = 10.0;

// ---------------------------------------------------------------- verify-theorem

ordered_json verify_theorem_defaults() {
    return ordered_json{{"seed", 7},           {"dim", 64},
                        {"families", 1},       {"kind", "all"},
                        {"kMax", 40},          {"tolerance", 1e-4},
                        {"route", "dense"},    {"solverTolerance", 1e-13}};
}

Report run_verify_theorem(const ordered_json& c, const RunOptions&) {
    const auto seed = static_cast<std::uint64_t>(integer(c, "seed"));
    const int dim = static_cast<int>(positive(c, "dim", 2, kDenseOracleMaxDim));
    const long long families = positive(c, "families", 1, 1000);
    const std::string kindName = str(c, "kind");
    std::vector<RandomFamilyKind> kinds;
    if (kindName == "all") {
        kinds = {RandomFamilyKind::first_order, RandomFamilyKind::second_order, RandomFamilyKind::nu_orthogonal,
                 RandomFamilyKind::phi_orthogonal};
    } else {
        try {
            kinds = {random_family_kind_from_string(kindName)};
        } catch (const BadParam& e) {
            throw ConfigError("kind", e.what());
        }
    }
    ResponseOptions ro;
    ro.kMax = static_cast<int>(positive(c, "kMax", 0, 1000));
    ro.tolerance = num(c, "tolerance");
    const std::string route = str(c, "route");
    if (route != "dense" && route != "power") throw ConfigError("route", "must be 'dense' or 'power'");
    ro.route = route == "dense" ? EigenRoute::dense : EigenRoute::power;
    ro.eigen.tol = in_range(c, "solverTolerance", 1e-15, 1e-6);

    struct Job {
        std::uint64_t seed;
        RandomFamilyKind kind;
    };
    std::vector<Job> jobs;
    for (long long f = 0; f < families; ++f)
        for (auto k : kinds) jobs.push_back({seed + static_cast<std::uint64_t>(f), k});
    std::vector<std::optional<RandomFamily>> fams(jobs.size());
    std::vector<ResponseReport> reps(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        fams[i] = random_family(jobs[i].seed, dim, jobs[i].kind);
        reps[i] = verify_response(fams[i]->family, ro);
    });

    Report rep;
    rep.curve = CsvTable({"family", "seed", "kind", "eps", "lambda", "delta", "eta", "ratio", "basicIdentityResidual"});
    ordered_json list = ordered_json::array();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& r = reps[i];
        const auto& f = *fams[i];
        for (const auto& pt : r.perEps)
            rep.curve.add_row({static_cast<long long>(i), static_cast<long long>(f.seed), to_string(f.kind), pt.eps,
                               pt.lambda, pt.delta, pt.eta, pt.ratio, pt.basicIdentityResidual});
        ordered_json j{{"seed", f.seed},
                       {"kind", to_string(f.kind)},
                       {"dim", f.dim},
                       {"gap", f.gap},
                       {"lambda0", r.lambda0},
                       {"zeroDeltaBranch", r.zeroDeltaBranch}};
        if (r.zeroDeltaBranch) {
            j["zeroDeltaDeviation"] = r.zeroDeltaDeviation;
        } else {
            j["extrapolatedRatio"] = r.extrapolatedRatio;
            j["seriesValue"] = r.seriesValue;
            j["truncationTerm"] = r.truncationTerm;
            j["discrepancy"] = r.discrepancy;
        }
        j["lipschitzConstant"] = r.lipschitzConstant;
        j["lipschitzHolds"] = r.lipschitzHolds;
        j["pass"] = r.pass;
        list.push_back(j);
        rep.check("family" + std::to_string(i), r.pass,
                  r.zeroDeltaBranch ? ordered_json{{"zeroDeltaDeviation", r.zeroDeltaDeviation}}
                                    : ordered_json{{"discrepancy", r.discrepancy}});
    }
    rep.result["families"] = list;
    return rep;
}

// ---------------------------------------------------------------- escape

ordered_json escape_defaults() {
    return ordered_json{{"map", "doubling"},
                        {"hole", {{"z", 0.0}, {"shape", "aligned"}}},
                        {"grid", 4096},
                        {"ladder", ladder_json(0.03125, 0.5, 6)},
                        {"qkMax", 8},
                        {"prediction", nullptr},
                        {"tolerance", 0.02},
                        {"completeTruncation", true},
                        {"solverTolerance", 1e-12}};
}

std::function<HoleSpec(double)> hole_family(const ordered_json& hole) {
    const double z = in_range(hole, "z", 0.0, 1.0, "hole");
    const std::string shape = str(hole, "shape");
    if (shape == "aligned")
        return [z](double e) {
            double lo = std::floor(z / e) * e;
            if (lo + e > 1.0) lo = 1.0 - e;
            return HoleSpec::interval(lo, lo + e);
        };
    if (shape == "centred") return [z](double e) { return HoleSpec::centred(z, e); };
    if (shape == "left") return [z](double e) { return HoleSpec::interval(std::max(0.0, z - e), z); };
    if (shape == "right") return [z](double e) { return HoleSpec::interval(z, std::min(1.0, z + e)); };
    throw ConfigError("hole.shape", "must be one of aligned, centred, left, right");
}

std::function<FiniteOperator(const PiecewiseMap&, const Partition1D&)> caching_builder(const std::string& dir) {
    return [dir](const PiecewiseMap& map, const Partition1D& part) {
        std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the node bit patterns
        for (double x : part.nodes()) {
            std::uint64_t bits;
            std::memcpy(&bits, &x, sizeof bits);
            for (int k = 0; k < 8; ++k) {
                h ^= (bits >> (8 * k)) & 0xffU;
                h *= 1099511628211ULL;
            }
        }
        std::string tag = map.descriptor().empty() ? map.name() : map.descriptor();
        for (char& ch : tag)
            if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-') ch = '_';
        char hex[17];
        std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
        const auto path = std::filesystem::path(dir) / (tag + "-" + std::to_string(part.cells()) + "-" + hex + ".op");
        if (std::filesystem::exists(path)) {
            try {
                LoadedOperator lo = read_operator(path.string());
                if (std::equal(lo.nodes.begin(), lo.nodes.end(), part.nodes().begin(), part.nodes().end()))
                    return lo.op;
            } catch (const IoError&) {
                // Unreadable cache entries are rebuilt and overwritten.
            }
        }
        FiniteOperator op = build_ulam_1d(map, part);
        std::filesystem::create_directories(dir);
        write_operator(path.string(), op, part.nodes());
        return op;
    };
}

Report run_escape(const ordered_json& c, const RunOptions& opts) {
    EigenOptions eigen;
    eigen.tol = in_range(c, "solverTolerance", 1e-15, 1e-6);
    EscapeExperiment ex{.map = map_from(c),
                        .holeFamily = hole_family(c.at("hole")),
                        .epsLadder = ladder_from(c),
                        .gridSize = static_cast<std::size_t>(positive(c, "grid", 2, 1 << 20)),
                        .prediction = std::nullopt,
                        .completeTruncation = c.at("completeTruncation").get<bool>(),
                        .qkMax = static_cast<int>(positive(c, "qkMax", 0, 200)),
                        .eigen = eigen,
                        .builder = opts.operatorCache.empty() ? nullptr : caching_builder(opts.operatorCache)};
    const double z = num(c.at("hole"), "z");

    std::optional<double> prediction;
    if (!c.at("prediction").is_null()) {
        prediction = num(c, "prediction");
    } else if (ex.map.known_density()) {
        try {
            prediction = predicted_slope(ex.map, z, *ex.map.known_density());
        } catch (const Error&) {
            // z outside the branch domains: no automatic prediction.
        }
    }

    const EscapeCurve curve = escape_curve(ex);
    const SlopeEstimate s = slope_at_zero(curve, false, false);

    Report rep;
    rep.curve = CsvTable({"eps", "holeMeasure", "delta", "lambda", "ratio", "ratioDelta", "basicIdentityResidual",
                          "solverResidual", "iterations"});
    for (const auto& p : curve.points)
        rep.curve.add_row({p.eps, p.holeMeasure, p.delta, p.lambda, p.ratio, p.ratioDelta, p.basicIdentityResidual,
                           p.solverResidual, static_cast<long long>(p.iterations)});
    auto& r = rep.result;
    r["lambda0"] = curve.lambda0;
    r["cells"] = curve.cells;
    r["maxCellWidth"] = curve.maxCellWidth;
    r["truncationDefect"] = curve.defect;
    r["completed"] = curve.completed;
    r["periodic"] = nullptr;
    try {
        if (const auto pp = detect_periodic(ex.map, z))
            r["periodic"] = {{"period", pp->period}, {"multiplier", pp->multiplier}};
    } catch (const Error&) {
        // z is not in the domain of any branch.
    }
    r["slope"] = slope_json(s);
    if (curve.qRoute) {
        const auto& q = *curve.qRoute;
        r["qRoute"] = {{"kMax", q.kMax}, {"qk", q.qk}, {"series", q.series}, {"lastTerm", q.lastTerm},
                       {"slope", q.slope}, {"uncertainty", q.uncertainty}};
    }
    r["prediction"] = prediction ? ordered_json(*prediction) : ordered_json(nullptr);
    r["maxBasicIdentityResidual"] = curve.maxBasicIdentityResidual;

    rep.check("monotone", curve.monotone);
    rep.check("basicIdentity", curve.maxBasicIdentityResidual <= kIdentityFactor * ex.eigen.tol,
              curve.maxBasicIdentityResidual);
    if (curve.qRoute) {
        const double diff = std::abs(curve.qRoute->slope - s.value);
        rep.check("routesAgree", diff <= 2.0 * (curve.qRoute->uncertainty + s.uncertainty), diff);
    }
    if (prediction) {
        const double e = rel_error(s.value, *prediction);
        r["relativeError"] = e;
        rep.check("prediction", e <= num(c, "tolerance"), e);
    }
    return rep;
}

// ---------------------------------------------------------------- gauss-golden-blocks

ordered_json golden_defaults() {
    return ordered_json{{"kMin", 2}, {"kMax", 5}, {"grid", 16384}, {"gaussBranches", 4096}, {"tolerance", 0.08}};
}

Report run_golden(const ordered_json& c, const RunOptions&) {
    const int kMin = static_cast<int>(positive(c, "kMin", 1, 30));
    const int kMax = static_cast<int>(positive(c, "kMax", kMin, 30));
    const auto r = golden_block_experiment(kMin, kMax, static_cast<std::size_t>(positive(c, "grid", 2, 1 << 20)),
                                           static_cast<int>(positive(c, "gaussBranches", 1, 1 << 20)));
    Report rep;
    rep.curve = CsvTable({"k", "left", "right", "length", "lambda", "ratio", "relativeError", "gridLimited"});
    for (const auto& p : r.points)
        rep.curve.add_row({static_cast<long long>(p.k), p.interval.left, p.interval.right, p.interval.length, p.lambda,
                           p.ratio, rel_error(p.ratio, r.limit), static_cast<long long>(p.gridLimited)});
    rep.result["lambda0"] = r.lambda0;
    rep.result["limit"] = r.limit;
    rep.result["cells"] = r.cells;
    const double e = rel_error(r.points.back().ratio, r.limit);
    rep.result["finalRelativeError"] = e;
    rep.check("finalWithinTolerance", e <= num(c, "tolerance"), e);
    rep.check("monotoneApproach", r.monotoneApproach);
    return rep;
}

// ---------------------------------------------------------------- cusp

ordered_json cusp_defaults() {
    return ordered_json{{"gamma", 0.75}, {"grid", 8192}, {"ladder", ladder_json(0.0625, 0.5, 6)}, {"tolerance", 0.05}};
}

Report run_cusp(const ordered_json& c, const RunOptions&) {
    const double gamma = num(c, "gamma");
    if (!(gamma > 0.6 && gamma <= 1.0)) throw ConfigError("gamma", "must lie in (0.6, 1]");
    const auto ladder = ladder_from(c);
    const auto r = cusp_exponent(gamma, ladder, static_cast<std::size_t>(positive(c, "grid", 2, 1 << 20)));
    Report rep;
    rep.curve = CsvTable({"eps", "oneMinusLambda", "scaled"});
    for (std::size_t i = 0; i < r.eps.size(); ++i)
        rep.curve.add_row({r.eps[i], r.oneMinusLambda[i], r.oneMinusLambda[i] / std::pow(r.eps[i], r.expectedExponent)});
    auto& j = rep.result;
    j["exponent"] = r.exponent;
    j["exponentSE"] = r.exponentSE;
    j["localExponent"] = r.localExponent;
    j["expectedExponent"] = r.expectedExponent;
    j["prefactor"] = r.prefactor;
    j["phiHalf"] = r.phiHalf;
    j["phiHalfSpread"] = r.phiHalfSpread;
    j["maxBasicIdentityResidual"] = r.maxBasicIdentityResidual;
    const double d = std::abs(r.exponent - r.expectedExponent);
    rep.check("exponent", d <= num(c, "tolerance"), d);
    rep.check("monotone", r.monotone);
    rep.check("basicIdentity", r.maxBasicIdentityResidual <= kIdentityFactor * EigenOptions{}.tol,
              r.maxBasicIdentityResidual);
    return rep;
}

// ---------------------------------------------------------------- staircase

ordered_json staircase_defaults() {
    return ordered_json{{"map", "doubling"},
                        {"base", {{"lo", 0.3}, {"hi", 0.5}}},
                        {"grid", 4096},
                        {"ladder", ladder_json(0.03125, 0.5, 8)}};
}

Report run_staircase(const ordered_json& c, const RunOptions&) {
    const auto& b = c.at("base");
    const Interval base{in_range(b, "lo", 0.0, 1.0, "base"), in_range(b, "hi", 0.0, 1.0, "base")};
    if (!(base.hi > base.lo)) throw ConfigError("base", "hi must exceed lo");
    const auto r = staircase_diagnostic(map_from(c), base, ladder_from(c),
                                        static_cast<std::size_t>(positive(c, "grid", 2, 1 << 20)));
    Report rep;
    rep.curve = CsvTable({"eps", "mass", "lambda"});
    for (const auto& p : r.points) rep.curve.add_row({p.eps, p.mass, p.lambda});
    rep.result["lambda0"] = r.lambda0;
    rep.result["trappedAfter"] = r.trappedAfter ? ordered_json(*r.trappedAfter) : ordered_json(nullptr);
    rep.result["trappedRadius"] = r.trappedRadius;
    rep.result["trappedDeviation"] = r.trappedDeviation;
    rep.check("massMonotone", r.massMonotone);
    if (r.trappedAfter) rep.check("trappedConstant", r.trappedDeviation <= 1e-10, r.trappedDeviation);
    return rep;
}

// ---------------------------------------------------------------- exchange

ordered_json exchange_defaults() {
    return ordered_json{{"kernel", "bump"},    {"z", 0.5},          {"grid", 8192},
                        {"ladder", ladder_json(0.03125, 0.5, 4)},   {"samples", 1000000},
                        {"seed", 42},          {"tolerance", 0.1},  {"compareAgainst", "derivation"},
                        {"thetaPoints", 201}};
}

Report run_exchange(const ordered_json& c, const RunOptions&) {
    KernelShape shape;
    try {
        shape = kernel_shape_from_string(str(c, "kernel"));
    } catch (const Error& e) {
        throw ConfigError("kernel", e.what());
    }
    const double z = num(c, "z");
    if (!(z > 0.0 && z < 1.0)) throw ConfigError("z", "must lie in (0, 1)");
    const std::string against = str(c, "compareAgainst");
    if (against != "derivation" && against != "intro")
        throw ConfigError("compareAgainst", "must be 'derivation' or 'intro'");
    const auto samples = static_cast<std::size_t>(positive(c, "samples", 1000, 1LL << 32));
    const auto seed = static_cast<std::uint64_t>(integer(c, "seed"));
    const auto ladder = ladder_from(c);
    const TwoComponentMap tc = two_component_zigzag(z);
    const auto r = exchange_experiment(tc, shape, ladder, static_cast<std::size_t>(positive(c, "grid", 16, 1 << 20)),
                                       samples, seed);

    const NoiseKernelSpec unit{shape, 1.0};
    const auto zeta = theta_grid(tc.Lambda, static_cast<std::size_t>(positive(c, "thetaPoints", 3, 100001)));
    const ThetaProfile theta = theta_infinity_profile(tc.Lambda, unit, zeta, samples, seed);

    Report rep;
    rep.curve = CsvTable({"eps", "lambda", "ratio", "nextModulus", "basicIdentityResidual", "solverResidual"});
    for (const auto& p : r.points)
        rep.curve.add_row({p.eps, p.lambda, p.ratio, p.nextModulus, p.basicIdentityResidual, p.solverResidual});
    auto& j = rep.result;
    j["Lambda"] = tc.Lambda;
    j["cells"] = r.cells;
    j["measured"] = slope_json(r.measured);
    j["EabsW"] = {{"monteCarlo", r.EabsW.value},    {"standardError", r.EabsW.standardError},
                  {"tailBound", r.EabsW.tailBound}, {"terms", r.EabsW.terms},
                  {"samples", r.EabsW.samples},     {"quadrature", r.EabsWQuadrature}};
    const auto& pr = r.prediction;
    j["prediction"] = {{"alpha", pr.alpha},           {"beta", pr.beta},
                       {"EZ", pr.EZ},                 {"derivationForm", pr.slope},
                       {"derivationFormError", pr.slopeError}, {"introForm", pr.introFormSlope},
                       {"introFormError", pr.introFormSlopeError}};
    j["relErrorDerivation"] = r.relErrorDerivation;
    j["relErrorIntroForm"] = r.relErrorIntroForm;
    j["scaleZeroLambda"] = r.scaleZeroLambda;
    j["halvingRatio"] = r.halvingRatio;
    j["maxBasicIdentityResidual"] = r.maxBasicIdentityResidual;
    j["theta"] = {{"integral", theta.integral}, {"twoEabsW", theta.twoEabsW}, {"error", theta.twoEabsWError}};

    const double e = against == "derivation" ? r.relErrorDerivation : r.relErrorIntroForm;
    rep.check("prediction", e <= num(c, "tolerance"), e);
    const double relSE = r.EabsW.standardError / r.EabsW.value;
    rep.check("monteCarloPrecision", relSE < 2e-3, relSE);
    // The quadrature keeps a fixed number of series terms; its own truncation bound joins the tolerance.
    const double quadTail = std::pow(tc.Lambda, 8) / (1.0 - tc.Lambda);
    const double qd = std::abs(r.EabsW.value - r.EabsWQuadrature);
    rep.check("quadratureAgrees", qd <= 3.0 * r.EabsW.error() + quadTail, qd);
    const double td = std::abs(theta.integral - theta.twoEabsW);
    rep.check("thetaConsistent", td <= theta.twoEabsWError, td);
    rep.check("scaleZeroInvariant", std::abs(r.scaleZeroLambda - 1.0) <= 1e-10, r.scaleZeroLambda);
    rep.check("basicIdentity", r.maxBasicIdentityResidual <= kIdentityFactor * SubleadingOptions{}.tol,
              r.maxBasicIdentityResidual);
    return rep;
}

// ---------------------------------------------------------------- coupled

ordered_json coupled_defaults() {
    return ordered_json{{"map", "linear_mod1:5"}, {"delta", 0.0},       {"n", 512},
                        {"ladder", ladder_json(0.0625, 0.5, 5)},        {"prediction", nullptr},
                        {"tolerance", 0.05}};
}

Report run_coupled(const ordered_json& c, const RunOptions&) {
    const double delta = num(c, "delta");
    if (!(delta >= 0.0 && delta < 0.5)) throw ConfigError("delta", "must lie in [0, 1/2)");
    const auto r = coupled_sync_experiment(map_from(c), delta, ladder_from(c),
                                           static_cast<int>(positive(c, "n", 4, 1024)));
    const double prediction = c.at("prediction").is_null() ? r.prediction : num(c, "prediction");
    Report rep;
    rep.curve = CsvTable({"eps", "stripArea", "lambda", "ratio", "basicIdentityResidual"});
    for (const auto& p : r.points) rep.curve.add_row({p.eps, p.stripArea, p.lambda, p.ratio, p.basicIdentityResidual});
    auto& j = rep.result;
    j["lambda0"] = r.lambda0;
    j["slope"] = slope_json(r.slope);
    j["integralPrediction"] = r.prediction;
    j["prediction"] = prediction;
    j["diagonalMass"] = r.diagonalMass;
    j["stochasticDefect"] = r.stochasticDefect;
    j["maxBasicIdentityResidual"] = r.maxBasicIdentityResidual;
    const double e = rel_error(r.slope.value, prediction);
    j["relativeError"] = e;
    rep.check("prediction", e <= num(c, "tolerance"), e);
    rep.check("monotone", r.monotone);
    rep.check("stochastic", r.stochasticDefect <= 1e-12, r.stochasticDefect);
    rep.check("basicIdentity", r.maxBasicIdentityResidual <= kIdentityFactor * EigenOptions{}.tol,
              r.maxBasicIdentityResidual);
    return rep;
}

// ---------------------------------------------------------------- capacity

ordered_json capacity_defaults() {
    return ordered_json{{"blocks", ordered_json::array()}, {"blocksFile", ""}, {"m", 0},
                        {"wordCountN", 40},                {"tolerance", 1e-7}};
}

Report run_capacity(const ordered_json& c, const RunOptions&) {
    const ForbiddenList fl = list_from(c);
    const int n = static_cast<int>(positive(c, "wordCountN", 1, kWordCountMaxN - 1));
    const CapacityResult r = capacity_exact(fl);
    const CapacityResult dp = capacity_from_word_counts(fl, n);

    Report rep;
    rep.curve = CsvTable({"n", "count", "growthRatio"});
    std::uint64_t prev = 0;
    for (int k = 0; k <= n + 1; ++k) {
        const std::uint64_t cnt = word_count_oracle(fl, k);
        const double growth = prev ? static_cast<double>(cnt) / static_cast<double>(prev) : std::nan("");
        rep.curve.add_row({static_cast<long long>(k), static_cast<long long>(cnt), growth});
        prev = cnt;
    }
    auto& j = rep.result;
    j["blocks"] = fl.blocks();
    j["m"] = fl.m();
    j["p"] = fl.p();
    j["entropy"] = r.entropy;
    j["bits"] = r.bits;
    j["perronRoot"] = r.perronRoot;
    j["method"] = to_string(r.method);
    j["bracket"] = r.bracket;
    j["denseOracleRoot"] = r.denseOracleRoot ? ordered_json(*r.denseOracleRoot) : ordered_json(nullptr);
    j["ratio"] = -std::log1p(0.5 * r.perronRoot - 1.0) * std::ldexp(1.0, fl.m());
    j["wordCountRoot"] = dp.perronRoot;
    const double agree = std::abs(dp.perronRoot - r.perronRoot);
    j["wordCountAgreement"] = agree;
    rep.check("wordCountAgreement", agree <= num(c, "tolerance"), agree);
    return rep;
}

// ---------------------------------------------------------------- capacity-asymptotic

ordered_json capacity_asymptotic_defaults() {
    return ordered_json{{"limitWords", ordered_json::array({"(1)"})}, {"mMin", 4}, {"mMax", 14}, {"tolerance", 0.01}};
}

Report run_capacity_asymptotic(const ordered_json& c, const RunOptions&) {
    const auto& lw = c.at("limitWords");
    if (lw.empty()) throw ConfigError("limitWords", "needs at least one word");
    std::vector<EventuallyPeriodicWord> words;
    for (std::size_t i = 0; i < lw.size(); ++i) {
        const std::string p = "limitWords." + std::to_string(i);
        if (!lw[i].is_string()) throw ConfigError(p, "expected a string such as \"(10)\"");
        try {
            words.push_back(EventuallyPeriodicWord::parse(lw[i].get<std::string>()));
        } catch (const Error& e) {
            throw ConfigError(p, e.what());
        }
    }
    const int mMin = static_cast<int>(positive(c, "mMin", 1, kCapacityMaxM));
    const int mMax = static_cast<int>(positive(c, "mMax", mMin, kCapacityMaxM));
    std::vector<int> ms;
    for (int m = mMin; m <= mMax; ++m) ms.push_back(m);
    const double tol = num(c, "tolerance");
    const auto curve = capacity_asymptotic_check(prefix_family(words), words, ms, tol);

    Report rep;
    rep.curve = CsvTable({"m", "entropy", "perronRoot", "ratio"});
    for (const auto& p : curve.points) rep.curve.add_row({static_cast<long long>(p.m), p.entropy, p.perronRoot, p.ratio});
    auto& j = rep.result;
    ordered_json ells = ordered_json::array();
    for (const auto& l : return_times(words)) ells.push_back(l ? ordered_json(*l) : ordered_json("inf"));
    j["returnTimes"] = ells;
    j["prediction"] = curve.prediction;
    j["finalRelativeGap"] = curve.finalRelativeGap;
    j["eventuallyMonotone"] = curve.eventuallyMonotone;
    j["prefixConsistent"] = curve.prefixConsistent;
    if (curve.prefixConsistent) {
        rep.check("finalWithinTolerance", curve.withinTolerance, curve.finalRelativeGap);
        rep.check("eventuallyMonotone", curve.eventuallyMonotone);
    }
    return rep;
}

// ---------------------------------------------------------------- doubling-crosscheck

ordered_json crosscheck_defaults() {
    return ordered_json{{"blocks", ordered_json::array()}, {"blocksFile", ""}, {"mMin", 2}, {"mMax", 12},
                        {"tolerance", 1e-10}};
}

Report run_crosscheck(const ordered_json& c, const RunOptions&) {
    std::vector<ForbiddenList> lists;
    if (!c.at("blocks").empty() || !str(c, "blocksFile").empty()) {
        lists.push_back(list_from(c));
    } else {
        const int mMin = static_cast<int>(positive(c, "mMin", 1, kCrossCheckMaxM));
        const int mMax = static_cast<int>(positive(c, "mMax", mMin, kCrossCheckMaxM));
        for (int m = mMin; m <= mMax; ++m) lists.push_back(ones_block(m));
    }
    std::vector<DoublingCrossCheck> out(lists.size());
    parallel_for(lists.size(), [&](std::size_t i) { out[i] = doubling_cross_check(lists[i]); });

    Report rep;
    rep.curve = CsvTable({"m", "p", "cells", "lambdaEscape", "halfPerronRoot", "gap"});
    double worst = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& x = out[i];
        rep.curve.add_row({static_cast<long long>(x.m), static_cast<long long>(lists[i].p()),
                           static_cast<long long>(x.cells), x.lambdaEscape, x.halfPerronRoot, x.gap});
        worst = std::max(worst, x.gap);
    }
    rep.result["maxGap"] = worst;
    rep.check("gap", worst <= num(c, "tolerance"), worst);
    return rep;
}

const std::map<std::string, Entry>& registry() {
    static const std::map<std::string, Entry> reg = [] {
        std::map<std::string, Entry> r;
        auto add = [&](std::string name, std::string module, std::string desc, std::function<ordered_json()> d,
                       std::function<Report(const ordered_json&, const RunOptions&)> run) {
            r.emplace(name, Entry{{name, std::move(module), std::move(desc)}, std::move(d), std::move(run)});
        };
        add("capacity", "capacity", "entropy of a forbidden-block subshift, checked against exact word counts",
            capacity_defaults, run_capacity);
        add("capacity-asymptotic", "capacity",
            "(log 2 - h)/2^-m along a block family against sum_i (1 - 2^-l(i))", capacity_asymptotic_defaults,
            run_capacity_asymptotic);
        add("coupled", "escape", "synchronization escape of two coupled expanding maps from a diagonal strip",
            coupled_defaults, run_coupled);
        add("cusp", "escape", "escape exponent of the cusp map for holes at the neutral-derivative point",
            cusp_defaults, run_cusp);
        add("doubling-crosscheck", "capacity", "doubling map with cylinder holes against half the Perron root",
            crosscheck_defaults, run_crosscheck);
        add("escape", "escape", "first-order escape rate of an interval map through a shrinking hole",
            escape_defaults, run_escape);
        add("exchange", "metastab", "exchange rate between two invariant components coupled by small noise",
            exchange_defaults, run_exchange);
        add("gauss-golden-blocks", "escape", "Gauss map holes between preimages of 0 and 1 near the golden mean",
            golden_defaults, run_golden);
        add("staircase", "escape", "holes grown from a nontrivial base hole, with the trapped-endpoint check",
            staircase_defaults, run_staircase);
        add("verify-theorem", "perturbation", "random substochastic families against the q-series",
            verify_theorem_defaults, run_verify_theorem);
        return r;
    }();
    return reg;
}

}  // namespace

std::vector<ExperimentInfo> list_experiments() {
    std::vector<ExperimentInfo> out;
    for (const auto& [name, e] : registry()) out.push_back(e.info);
    return out;
}

ordered_json default_config(const std::string& experiment) { return entry(experiment).defaults(); }

ordered_json merge_config(const std::string& experiment, const ordered_json& base, const ordered_json& overrides) {
    if (overrides.is_null()) return base;
    if (!overrides.is_object()) throw ConfigError("", "configuration must be an object");
    ordered_json ov = overrides;
    if (ov.contains("experiment")) {
        if (!ov["experiment"].is_string() || ov["experiment"].get<std::string>() != experiment)
            throw ConfigError("experiment", "configuration is for '" + ov["experiment"].dump() + "', not '" +
                                                experiment + "'");
        ov.erase("experiment");
    }
    return conform(base, ov, "");
}

ordered_json merge_config(const std::string& experiment, const ordered_json& overrides) {
    return merge_config(experiment, default_config(experiment), overrides);
}

void set_config_path(const std::string& experiment, ordered_json& config, const std::string& path,
                     const ordered_json& value) {
    const ordered_json schema = default_config(experiment);
    const ordered_json* s = &schema;
    ordered_json* target = &config;
    std::string key, rest = path, walked;
    for (;;) {
        const auto dot = rest.find('.');
        key = rest.substr(0, dot);
        const std::string here = join(walked, key);
        if (!s->is_object() || !s->contains(key)) throw ConfigError(here, "unknown key");
        if (dot == std::string::npos) break;
        s = &(*s)[key];
        target = &(*target)[key];
        walked = here;
        rest = rest.substr(dot + 1);
    }
    (*target)[key] = conform((*s)[key], value, path);
}

double parse_number(const std::string& text, const std::string& field) {
    const auto caret = text.find('^');
    std::size_t used = 0;
    try {
        if (caret == std::string::npos) {
            const double v = std::stod(text, &used);
            if (used != text.size()) throw std::invalid_argument(text);
            return v;
        }
        const std::string a = text.substr(0, caret), b = text.substr(caret + 1);
        const double base = std::stod(a, &used);
        if (used != a.size()) throw std::invalid_argument(text);
        const double ex = std::stod(b, &used);
        if (used != b.size()) throw std::invalid_argument(text);
        return std::pow(base, ex);
    } catch (const std::logic_error&) {
        throw ConfigError(field, "'" + text + "' is not a number");
    }
}

ordered_json parse_ladder_spec(const std::string& spec) {
    const auto a = spec.find(':');
    const auto b = a == std::string::npos ? a : spec.find(':', a + 1);
    if (b == std::string::npos) throw ConfigError("ladder", "expected start:ratio:count, got '" + spec + "'");
    const double start = parse_number(spec.substr(0, a), "ladder.start");
    const double ratio = parse_number(spec.substr(a + 1, b - a - 1), "ladder.ratio");
    const std::string cnt = spec.substr(b + 1);
    std::size_t used = 0;
    long long count = 0;
    try {
        count = std::stoll(cnt, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used == 0 || used != cnt.size()) throw ConfigError("ladder.count", "'" + cnt + "' is not an integer");
    return ladder_json(start, ratio, static_cast<int>(count));
}

Report run_experiment(const std::string& experiment, const ordered_json& config, const RunOptions& opts) {
    const Entry& e = entry(experiment);
    const ordered_json full = merge_config(experiment, e.defaults(), config);
    Report rep = e.run(full, opts);
    rep.experiment = experiment;
    rep.config = full;
    return rep;
}

}  // namespace rarelab
