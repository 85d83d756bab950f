#include "rarelab/errors.hpp"
#include "rarelab/experiments.hpp"
#include "rarelab/parallel.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using rarelab::ordered_json;

ordered_json read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw rarelab::ConfigError("--config", "cannot open '" + path + "'");
    try {
        ordered_json j = ordered_json::parse(in);
        // A previous report can be replayed from its embedded configuration.
        if (j.is_object() && j.contains("config") && j.contains("result")) return j["config"];
        return j;
    } catch (const ordered_json::parse_error& e) {
        throw rarelab::ConfigError("--config", std::string("not valid JSON: ") + e.what());
    }
}

/// Values of --set are JSON when they parse as JSON and plain strings otherwise.
ordered_json parse_value(const std::string& text) {
    try {
        return ordered_json::parse(text);
    } catch (const ordered_json::parse_error&) {
        return text;
    }
}

bool has_key(const ordered_json& schema, const std::string& key) { return schema.contains(key); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Transfer-operator laboratory for rare-event asymptotics"};
    app.require_subcommand(1);

    auto* list = app.add_subcommand("list", "List the named experiments");

    auto* run = app.add_subcommand("run", "Run one experiment and write <out>/<name>.{json,csv,meta.json}");
    std::string experiment, configPath, outDir = "out", cacheDir;
    std::optional<long long> seed, grid, dim;
    std::optional<double> holePoint;
    std::optional<std::string> ladder, mapName, blocksFile;
    std::vector<std::string> sets;
    unsigned threads = 0;
    bool printConfig = false;
    run->add_option("experiment", experiment, "Experiment name (see 'list')")->required();
    run->add_option("--config", configPath, "JSON configuration file; flags override its values");
    run->add_option("--out", outDir, "Output directory")->capture_default_str();
    run->add_option("--seed", seed, "Random seed");
    run->add_option("--threads", threads, "Worker thread cap (0 = all cores)");
    run->add_option("--grid", grid, "Grid size (cells, or cells per axis for coupled maps)");
    run->add_option("--ladder", ladder, "Epsilon ladder start:ratio:count, e.g. 2^-5:0.5:6");
    run->add_option("--map", mapName, "Map descriptor, e.g. doubling, gauss:4096, cusp:0.75, or a .json file");
    run->add_option("--hole-fixed-point", holePoint, "Point the holes shrink to");
    run->add_option("--blocks-file", blocksFile, "Forbidden blocks, one binary word per line");
    run->add_option("--dim", dim, "Dimension of random families");
    run->add_option("--set", sets, "Override any field: path=value (value parsed as JSON when possible)");
    run->add_option("--cache", cacheDir, "Directory for cached closed operators");
    run->add_flag("--print-config", printConfig, "Print the merged configuration and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*list) {
            for (const auto& e : rarelab::list_experiments())
                std::printf("%-22s %-13s %s\n", e.name.c_str(), ("[" + e.module + "]").c_str(), e.description.c_str());
            return 0;
        }

        rarelab::set_thread_limit(threads);
        const ordered_json schema = rarelab::default_config(experiment);
        ordered_json config = configPath.empty() ? schema
                                                 : rarelab::merge_config(experiment, read_config_file(configPath));
        auto set = [&](const std::string& path, const ordered_json& v) {
            rarelab::set_config_path(experiment, config, path, v);
        };
        if (seed) set("seed", *seed);
        if (grid) set(has_key(schema, "grid") || !has_key(schema, "n") ? "grid" : "n", *grid);
        if (ladder) set("ladder", rarelab::parse_ladder_spec(*ladder));
        if (mapName) set("map", *mapName);
        if (holePoint) set("hole.z", *holePoint);
        if (blocksFile) set("blocksFile", *blocksFile);
        if (dim) set("dim", *dim);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw rarelab::ConfigError("--set", "expected path=value, got '" + s + "'");
            set(s.substr(0, eq), parse_value(s.substr(eq + 1)));
        }

        if (printConfig) {
            ordered_json echo{{"experiment", experiment}};
            echo.update(config);
            std::cout << echo.dump(2) << "\n";
            return 0;
        }

        const rarelab::Report report = rarelab::run_experiment(experiment, config, {cacheDir});
        rarelab::write_report(report, outDir);

        std::printf("%s (%s)\n", experiment.c_str(), rarelab::code_version());
        for (const auto& [name, c] : report.checks.items()) {
            std::string detail = c.contains("detail") ? " " + c["detail"].dump() : "";
            std::printf("  %-22s %s%s\n", name.c_str(), c["pass"].get<bool>() ? "pass" : "FAIL", detail.c_str());
        }
        std::printf("wrote %s/%s.{json,csv,meta.json}\n", outDir.c_str(), experiment.c_str());
        return report.pass ? 0 : 2;
    } catch (const rarelab::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
