#include "doctest.h"

#include "rarelab/errors.hpp"
#include "rarelab/experiments.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace rarelab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rarelab-cli-test-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Exit status of the CLI with the given arguments, run from `dir` with output discarded.
int run_cli(const std::string& args, const fs::path& dir) {
    const std::string cmd =
        "cd '" + dir.string() + "' && '" RARELAB_CLI_PATH "' " + args + " > cli.log 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

std::string config_error_field(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.field();
    }
    return "<no error>";
}

}  // namespace

TEST_CASE("list_experiments") {
    const auto list = list_experiments();
    std::vector<std::string> names;
    for (const auto& e : list) {
        names.push_back(e.name);
        CHECK_FALSE(e.module.empty());
        CHECK_FALSE(e.description.empty());
    }
    const std::vector<std::string> expected = {"capacity",   "capacity-asymptotic", "coupled",
                                               "cusp",       "doubling-crosscheck", "escape",
                                               "exchange",   "gauss-golden-blocks", "staircase",
                                               "verify-theorem"};
    CHECK(names == expected);
    CHECK(std::is_sorted(names.begin(), names.end()));
}

TEST_CASE("configuration merging") {
    const ordered_json defaults = default_config("escape");
    CHECK(merge_config("escape", ordered_json::object()) == defaults);

    const ordered_json merged = merge_config("escape", {{"hole", {{"z", 0.25}}}, {"grid", 2048}});
    CHECK(merged["hole"]["z"] == 0.25);
    CHECK(merged["hole"]["shape"] == defaults["hole"]["shape"]);
    CHECK(merged["grid"] == 2048);
    // An integral float is accepted where an integer is expected.
    CHECK(merge_config("escape", {{"grid", 1024.0}})["grid"] == 1024);
    CHECK(merge_config("escape", {{"experiment", "escape"}})["grid"] == defaults["grid"]);

    CHECK(config_error_field([] { merge_config("escape", {{"gird", 10}}); }) == "gird");
    CHECK(config_error_field([] { merge_config("escape", {{"hole", {{"zz", 0.1}}}}); }) == "hole.zz");
    CHECK(config_error_field([] { merge_config("escape", {{"grid", "large"}}); }) == "grid");
    CHECK(config_error_field([] { merge_config("escape", {{"grid", 10.5}}); }) == "grid");
    CHECK(config_error_field([] { merge_config("escape", {{"experiment", "cusp"}}); }) == "experiment");
    CHECK(config_error_field([] { default_config("nonesuch"); }) == "experiment");

    ordered_json cfg = defaults;
    set_config_path("escape", cfg, "hole.z", 0.125);
    CHECK(cfg["hole"]["z"] == 0.125);
    CHECK(config_error_field([&] { set_config_path("escape", cfg, "hole.radius", 1.0); }) == "hole.radius");
}

TEST_CASE("ladder specifications") {
    const ordered_json l = parse_ladder_spec("2^-5:0.5:6");
    CHECK(l["start"] == 0.03125);
    CHECK(l["ratio"] == 0.5);
    CHECK(l["count"] == 6);
    CHECK(parse_number("2^-3") == 0.125);
    CHECK(parse_number("1e-3") == 0.001);
    CHECK(config_error_field([] { parse_ladder_spec("2^-5:half:6"); }) == "ladder.ratio");
    CHECK(config_error_field([] { parse_ladder_spec("x:0.5:6"); }) == "ladder.start");
    CHECK_THROWS_AS(parse_ladder_spec("2^-5:0.5"), ConfigError);
}

TEST_CASE("number formatting and CSV tables") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(1.0 / 3.0) == "0.3333333333333333");
    CHECK(format_double(1e-20) == "1e-20");
    CHECK(std::stod(format_double(0.7071067811865476)) == 0.7071067811865476);

    CsvTable t({"eps", "k", "note"});
    t.add_row({0.5, 3LL, std::string("a")});
    CHECK(t.rows() == 1);
    CHECK(t.str() == "eps,k,note\n0.5,3,a\n");
    CHECK_THROWS_AS(t.add_row({0.5}), BadParam);
}

TEST_CASE("report files") {
    const fs::path dir = scratch("report");
    Report r;
    r.experiment = "demo";
    r.config = {{"seed", 1}};
    r.result = {{"slope", 0.5}};
    r.curve = CsvTable({"eps", "lambda"});
    r.curve.add_row({0.25, 0.875});
    r.check("slope", true, 0.5);
    r.check("bound", false);
    CHECK_FALSE(r.pass);
    write_report(r, dir.string());

    const auto j = nlohmann::ordered_json::parse(slurp(dir / "demo.json"));
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"experiment", "version", "config", "result", "checks", "pass"});
    CHECK(j["pass"] == false);
    CHECK(j["checks"]["slope"]["pass"] == true);
    CHECK(slurp(dir / "demo.csv") == "eps,lambda\n0.25,0.875\n");
    CHECK(nlohmann::json::parse(slurp(dir / "demo.meta.json")).contains("timestamp"));
}

TEST_CASE("run_experiment is deterministic and replays from its embedded config") {
    const ordered_json cfg = merge_config("verify-theorem", {{"seed", 7}, {"dim", 32}, {"families", 3}});
    const Report a = run_experiment("verify-theorem", cfg);
    const Report b = run_experiment("verify-theorem", cfg);
    CHECK(a.to_json().dump() == b.to_json().dump());
    CHECK(a.curve.str() == b.curve.str());

    const Report c = run_experiment("verify-theorem", merge_config("verify-theorem", a.to_json()["config"]));
    CHECK(c.to_json()["result"] == a.to_json()["result"]);

    const Report cap = run_experiment("capacity", merge_config("capacity", {{"blocks", {"11"}}}));
    CHECK(cap.pass);
    CHECK(cap.result["perronRoot"].get<double>() == doctest::Approx((1.0 + std::sqrt(5.0)) / 2.0).epsilon(1e-14));
}

TEST_CASE("command-line runs") {
    const fs::path dir = scratch("runs");
    CHECK(run_cli("list", dir) == 0);
    CHECK(slurp(dir / "cli.log").find("verify-theorem") != std::string::npos);

    CHECK(run_cli("run capacity --blocks-file '" RARELAB_TEST_DATA "/ones10.txt' --out out", dir) == 0);
    const auto cap = nlohmann::json::parse(slurp(dir / "out" / "capacity.json"));
    CHECK(cap["pass"] == true);
    CHECK(fs::exists(dir / "out" / "capacity.csv"));

    CHECK(run_cli("run escape --set grd=10 --out out", dir) == 1);
    CHECK(slurp(dir / "cli.log").find("grd") != std::string::npos);
    CHECK(run_cli("run nonesuch", dir) == 1);
    CHECK(run_cli("run escape --ladder 2^-5:0.5 --out out", dir) == 1);

    CHECK(run_cli("run verify-theorem --seed 7 --dim 64 --out out", dir) == 0);
    CHECK(run_cli("run escape --map doubling --hole-fixed-point 0 --ladder 2^-5:0.5:6 --out out", dir) == 0);
    const auto esc = nlohmann::json::parse(slurp(dir / "out" / "escape.json"));
    CHECK(esc["config"]["hole"]["z"] == 0.0);

    // Replaying the written configuration gives the same result.
    std::ofstream(dir / "replay.json") << esc["config"].dump();
    CHECK(run_cli("run escape --config replay.json --out replay", dir) == 0);
    const auto again = nlohmann::json::parse(slurp(dir / "replay" / "escape.json"));
    CHECK(again["result"] == esc["result"]);
}
