#include "rarelab/report.hpp"

#include "rarelab/errors.hpp"
#include "rarelab/parallel.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#ifndef RARELAB_VERSION
#define RARELAB_VERSION "unknown"
#endif

namespace rarelab {

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

const char* code_version() noexcept { return RARELAB_VERSION; }

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<Cell> row) {
    if (row.size() != header_.size())
        throw BadParam("CSV row has " + std::to_string(row.size()) + " cells, header has " +
                       std::to_string(header_.size()));
    rows_.push_back(std::move(row));
}

std::string CsvTable::str() const {
    std::string out;
    for (std::size_t k = 0; k < header_.size(); ++k) out += (k ? "," : "") + csv_escape(header_[k]);
    out += '\n';
    for (const auto& row : rows_) {
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out += ',';
            std::visit(
                [&](const auto& v) {
                    using T = std::decay_t<decltype(v)>;
                    if constexpr (std::is_same_v<T, double>) out += format_double(v);
                    else if constexpr (std::is_same_v<T, long long>) out += std::to_string(v);
                    else out += csv_escape(v);
                },
                row[k]);
        }
        out += '\n';
    }
    return out;
}

void Report::check(const std::string& name, bool ok, ordered_json detail) {
    ordered_json entry{{"pass", ok}};
    if (!detail.is_null()) entry["detail"] = std::move(detail);
    checks[name] = std::move(entry);
    pass = pass && ok;
}

ordered_json Report::to_json() const {
    ordered_json j;
    j["experiment"] = experiment;
    j["version"] = code_version();
    j["config"] = config;
    j["result"] = result;
    j["checks"] = checks;
    j["pass"] = pass;
    return j;
}

void write_report(const Report& report, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    const fs::path base = fs::path(dir) / report.experiment;

    write_file(base.string() + ".json", report.to_json().dump(2) + "\n");
    write_file(base.string() + ".csv", report.curve.str());

    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm utc{};
    gmtime_r(&t, &utc);
    std::ostringstream stamp;
    stamp << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
    ordered_json meta{{"experiment", report.experiment},
                      {"timestamp", stamp.str()},
                      {"threads", thread_limit()},
                      {"version", code_version()}};
    write_file(base.string() + ".meta.json", meta.dump(2) + "\n");
}

}  // namespace rarelab
