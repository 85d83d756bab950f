#pragma once

#include "json.hpp"

#include <string>
#include <variant>
#include <vector>

namespace rarelab {

using ordered_json = nlohmann::ordered_json;

/// git describe of the source tree the library was built from.
const char* code_version() noexcept;

/// Shortest rendering that reads back to the same double, independent of the locale.
std::string format_double(double v);

/// Rows of a curve; cells are numbers, integers or text.
class CsvTable {
public:
    using Cell = std::variant<double, long long, std::string>;

    explicit CsvTable(std::vector<std::string> header = {});

    const std::vector<std::string>& header() const noexcept { return header_; }
    std::size_t rows() const noexcept { return rows_.size(); }
    /// Throws BadParam if the row width differs from the header.
    void add_row(std::vector<Cell> row);
    std::string str() const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<Cell>> rows_;
};

struct Report {
    std::string experiment;
    /// Full configuration after defaults and overrides; rerunning it reproduces the report.
    ordered_json config;
    ordered_json result;
    CsvTable curve;
    /// Acceptance assertions of the experiment and their outcomes.
    ordered_json checks = ordered_json::object();
    bool pass = true;

    void check(const std::string& name, bool ok, ordered_json detail = nullptr);
    /// {"experiment", "version", "config", "result", "checks", "pass"} in that order.
    ordered_json to_json() const;
};

/// Writes <dir>/<experiment>.json, <experiment>.csv and <experiment>.meta.json (timestamp, threads).
void write_report(const Report& report, const std::string& dir);

}  // namespace rarelab
