#pragma once

// CSV tables, JSON experiment configs, and the config hash stamped into every
// output for replay. Floats are serialized with 17 significant digits so a
// round trip is bit-exact.

#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mra/covariance.hpp"
#include "mra/geometry.hpp"

namespace mra {

using Json = nlohmann::json;

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int col(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        throw std::invalid_argument("csv: missing column '" + name + "'");
    }
    Vector column(const std::string& name) const {
        const int c = col(name);
        Vector v(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) v[static_cast<Eigen::Index>(i)] = rows[i][static_cast<std::size_t>(c)];
        return v;
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (first) {
            while (std::getline(ss, cell, ',')) t.header.push_back(cell);
            first = false;
            continue;
        }
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != t.header.size())
            throw std::runtime_error(path + ": ragged row with " + std::to_string(row.size()) +
                                     " cells");
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_double(row[i]);
        out << "\n";
    }
}

// Locations (and optionally values) from columns x0..x{d-1}[, y].
inline std::pair<Matrix, Vector> read_locations(const CsvTable& t) {
    int d = 0;
    while (true) {
        bool found = false;
        for (const auto& h : t.header)
            if (h == "x" + std::to_string(d)) found = true;
        if (!found) break;
        ++d;
    }
    if (d == 0) throw std::invalid_argument("csv: no coordinate columns x0..");
    Matrix S(static_cast<Eigen::Index>(t.rows.size()), d);
    for (int j = 0; j < d; ++j) S.col(j) = t.column("x" + std::to_string(j));
    Vector y;
    for (const auto& h : t.header)
        if (h == "y") y = t.column("y");
    return {std::move(S), std::move(y)};
}

// FNV-1a over the canonical (sorted-key, compact) JSON dump.
inline std::string config_hash(const Json& config) {
    const std::string s = config.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

inline Json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    Json j;
    in >> j;
    return j;
}

inline CovarianceModel model_from_json(const Json& j) {
    CovarianceModel m;
    const std::string family = j.value("family", "matern15");
    if (family == "exponential") {
        m.family = CovarianceModel::Family::Exponential;
    } else if (family == "matern15") {
        m.family = CovarianceModel::Family::Matern15;
    } else {
        throw std::invalid_argument("config: unknown covariance family '" + family + "'");
    }
    m.variance = j.value("variance", 1.0);
    m.range = j.value("range", 0.1);
    m.nugget = j.value("nugget", 0.0);
    m.validate();
    return m;
}

struct PartitionConfig {
    Domain domain;
    std::vector<int> branching;
    std::vector<int> knots_per_level;  // r_m for m = 0..M-1 (leaf knots are the data)
    std::string strategy = "equidistant";
};

inline PartitionConfig partition_from_json(const Json& j, int dim_hint = 1) {
    PartitionConfig pc;
    if (j.contains("domain")) {
        const auto& d = j.at("domain");
        pc.domain.lower = Vector::Map(d.at("lower").get<std::vector<double>>().data(),
                                      static_cast<Eigen::Index>(d.at("lower").size()));
        pc.domain.upper = Vector::Map(d.at("upper").get<std::vector<double>>().data(),
                                      static_cast<Eigen::Index>(d.at("upper").size()));
    } else {
        pc.domain.lower = Vector::Zero(dim_hint);
        pc.domain.upper = Vector::Ones(dim_hint);
    }
    pc.domain.validate();
    if (j.contains("branching")) pc.branching = j.at("branching").get<std::vector<int>>();
    if (j.contains("knots_per_level"))
        pc.knots_per_level = j.at("knots_per_level").get<std::vector<int>>();
    pc.strategy = j.value("strategy", std::string("equidistant"));
    if (pc.knots_per_level.size() != pc.branching.size())
        throw std::invalid_argument("config: knots_per_level must list r for each resolution 0..M-1");
    return pc;
}

inline KnotStrategy make_strategy(const PartitionConfig& pc) {
    if (pc.strategy == "equidistant") return KnotStrategy::equidistant(pc.knots_per_level);
    if (pc.strategy == "child-boundaries")
        return KnotStrategy::child_boundaries(static_cast<int>(pc.branching.size()), pc.branching);
    throw std::invalid_argument("config: unknown knot strategy '" + pc.strategy + "'");
}

// build -> assign -> place_knots in one step from a parsed config.
inline PartitionTree build_tree(const PartitionConfig& pc, const Matrix& S, const Vector* y) {
    PartitionTree tree = pc.branching.empty() ? trivial_partition(pc.domain)
                                              : build_partition(pc.domain, pc.branching);
    assign_locations(tree, S, y);
    place_knots(tree, make_strategy(pc));
    return tree;
}

}  // namespace mra
