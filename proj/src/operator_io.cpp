#include "rarelab/errors.hpp"
#include "rarelab/ulam.hpp"

#include "json.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace rarelab {

namespace {

RowSums promise_from_string(const std::string& s) {
    if (s == "general") return RowSums::general;
    if (s == "substochastic") return RowSums::substochastic;
    if (s == "stochastic") return RowSums::stochastic;
    throw IoError("unknown row-sum promise '" + s + "'");
}

}  // namespace

void write_operator(const std::string& path, const FiniteOperator& op, std::span<const double> nodes) {
    if (!nodes.empty() && static_cast<Eigen::Index>(nodes.size()) != op.dim() + 1)
        throw DimensionMismatch("node count must be dim + 1");
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    const SparseMatrix m = op.materialize();

    nlohmann::ordered_json header;
    header["format"] = "rarelab-operator-v1";
    header["dim"] = op.dim();
    header["promise"] = to_string(op.promise());
    header["defect"] = op.defect();
    header["nnz"] = m.nonZeros();
    header["nodes"] = std::vector<double>(nodes.begin(), nodes.end());
    header["weights"] = std::vector<double>(op.weights().data(), op.weights().data() + op.dim());
    out << header.dump() << '\n';

    char buf[96];
    for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
        for (SparseMatrix::InnerIterator it(m, i); it; ++it) {
            std::snprintf(buf, sizeof buf, "%td %td %.17g\n", static_cast<std::ptrdiff_t>(it.row()),
                          static_cast<std::ptrdiff_t>(it.col()), it.value());
            out << buf;
        }
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

LoadedOperator read_operator(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw IoError("'" + path + "' is empty");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad operator header: ") + e.what());
    }
    if (header.value("format", "") != "rarelab-operator-v1") throw IoError("unsupported operator format");
    const auto dim = header.at("dim").get<Eigen::Index>();
    const auto nnz = header.at("nnz").get<std::size_t>();
    auto nodes = header.at("nodes").get<std::vector<double>>();
    auto w = header.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != dim) throw IoError("weights length differs from dim");

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(nnz);
    long r = 0, c = 0;
    double v = 0.0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        if (!(ls >> r >> c >> v)) throw IoError("malformed triplet line: " + line);
        if (r < 0 || c < 0 || r >= dim || c >= dim) throw IoError("triplet index out of range: " + line);
        trips.emplace_back(r, c, v);
    }
    if (trips.size() != nnz) throw IoError("triplet count differs from header nnz");
    SparseMatrix m(dim, dim);
    m.setFromTriplets(trips.begin(), trips.end());
    Vector weights = Eigen::Map<const Vector>(w.data(), dim);
    FiniteOperator op(std::move(m), std::move(weights), promise_from_string(header.at("promise").get<std::string>()),
                      header.value("defect", 0.0));
    return {std::move(op), std::move(nodes)};
}

}  // namespace rarelab
