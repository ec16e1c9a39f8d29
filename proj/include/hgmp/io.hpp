#pragma once

// On-disk dataset format.
//
//   manifest.json
//     {
//       "format": "hgmp-hetgraph/1",
//       "node_types": [{"name": "paper", "dim": 16, "file": "nodes_paper.csv"}, ...],
//       "edge_types": [{"name": "pa", "src": "paper", "dst": "author",
//                       "file": "edges_pa.csv"}, ...],
//       "target_type": "paper",
//       "num_classes": 3,
//       "labels": "labels.csv"
//     }
//   nodes_<type>.csv   header f0,...,f{d-1}; row i is the feature vector of node i
//   edges_<type>.csv   header src,dst; type-local indices
//   labels.csv         header node_id,class[,type]
//
// A node type entry may carry "count"; when present it must match the row count.
// A class cell holding several labels ("2;5" or "2|5") keeps the first one, and
// repeated rows for one node keep the first row. An optional "type" column must
// name the target type.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgmp/hetgraph.hpp"

namespace hgmp {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            cells.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return cells;
}

/// Shortest decimal text that parses back to the identical double.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline std::string where(const fs::path& file, std::size_t row) {
    return file.filename().string() + ":" + std::to_string(row);
}

inline double parse_double(std::string_view cell, const fs::path& file, std::size_t row) {
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty())
        throw IoError(where(file, row) + ": not a number: '" + std::string(cell) + "'");
    return v;
}

inline long long parse_int(std::string_view cell, const fs::path& file, std::size_t row) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty())
        throw IoError(where(file, row) + ": not an integer: '" + std::string(cell) + "'");
    return v;
}

/// Reads a CSV file; returns data rows (header dropped). Row numbers are 1-based
/// file lines, so the first data row is line 2.
inline std::vector<std::string> read_lines(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open " + file.string());
    std::vector<std::string> lines;
    std::string line;
    if (!std::getline(in, line)) throw IoError(file.filename().string() + ": missing header row");
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        lines.push_back(line);
    }
    return lines;
}

inline void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write " + file.string());
    out << text;
    if (!out) throw IoError("write failed: " + file.string());
}

inline std::string read_text(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline json read_json(const fs::path& file) {
    try {
        return json::parse(read_text(file));
    } catch (const json::parse_error& e) {
        throw IoError(file.string() + ": invalid JSON: " + e.what());
    }
}

}  // namespace detail

inline HetGraph load_graph(const fs::path& manifest_path) {
    using namespace detail;
    if (!fs::exists(manifest_path)) throw IoError("missing file: " + manifest_path.string());
    const fs::path dir = manifest_path.parent_path();
    const json m = read_json(manifest_path);
    const std::string mname = manifest_path.filename().string();

    HetGraph g;
    try {
        for (const auto& nt : m.at("node_types"))
            g.schema.node_types.push_back({nt.at("name").get<std::string>(), nt.at("dim").get<std::size_t>()});
        for (const auto& et : m.at("edge_types")) {
            EdgeType decl{et.at("name").get<std::string>(), 0, 0};
            const auto src = g.schema.find_node_type(et.at("src").get<std::string>());
            const auto dst = g.schema.find_node_type(et.at("dst").get<std::string>());
            if (!src || !dst)
                throw IoError(mname + ": edge type '" + decl.name + "' references an undeclared node type");
            decl.src = *src;
            decl.dst = *dst;
            g.schema.edge_types.push_back(decl);
        }
        const auto target = g.schema.find_node_type(m.at("target_type").get<std::string>());
        if (!target) throw IoError(mname + ": target_type is not a declared node type");
        g.schema.target = *target;
        g.schema.num_classes = m.at("num_classes").get<std::size_t>();
    } catch (const json::exception& e) {
        throw IoError(mname + ": malformed manifest: " + e.what());
    }

    const auto& node_decls = m.at("node_types");
    for (std::size_t t = 0; t < g.schema.node_types.size(); ++t) {
        const std::size_t dim = g.schema.node_types[t].dim;
        const fs::path file = dir / node_decls[t].value("file", "nodes_" + g.schema.node_types[t].name + ".csv");
        const auto lines = read_lines(file);
        Matrix x(static_cast<Eigen::Index>(lines.size()), static_cast<Eigen::Index>(dim));
        for (std::size_t r = 0; r < lines.size(); ++r) {
            const auto cells = split_csv(lines[r]);
            if (cells.size() != dim)
                throw IoError(where(file, r + 2) + ": dimension mismatch: expected " + std::to_string(dim) +
                              " values, found " + std::to_string(cells.size()));
            for (std::size_t c = 0; c < dim; ++c)
                x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parse_double(cells[c], file, r + 2);
        }
        if (node_decls[t].contains("count") && node_decls[t]["count"].get<std::size_t>() != lines.size())
            throw IoError(where(file, 0) + ": declared count " + node_decls[t]["count"].dump() + " but found " +
                          std::to_string(lines.size()) + " rows");
        g.features.push_back(std::move(x));
    }

    const auto& edge_decls = m.at("edge_types");
    for (std::size_t et = 0; et < g.schema.edge_types.size(); ++et) {
        const auto& decl = g.schema.edge_types[et];
        const fs::path file = dir / edge_decls[et].value("file", "edges_" + decl.name + ".csv");
        const auto lines = read_lines(file);
        std::vector<Edge> list;
        list.reserve(lines.size());
        const auto ns = static_cast<long long>(g.node_count(decl.src));
        const auto nd = static_cast<long long>(g.node_count(decl.dst));
        for (std::size_t r = 0; r < lines.size(); ++r) {
            const auto cells = split_csv(lines[r]);
            if (cells.size() != 2) throw IoError(where(file, r + 2) + ": expected columns src,dst");
            const long long s = parse_int(cells[0], file, r + 2);
            const long long d = parse_int(cells[1], file, r + 2);
            if (s < 0 || s >= ns || d < 0 || d >= nd)
                throw IoError(where(file, r + 2) + ": dangling edge endpoint (" + std::to_string(s) + "," +
                              std::to_string(d) + ")");
            list.push_back({static_cast<std::size_t>(s), static_cast<std::size_t>(d)});
        }
        g.edges.push_back(std::move(list));
    }

    if (m.contains("labels")) {
        const fs::path file = dir / m["labels"].get<std::string>();
        const auto lines = read_lines(file);
        const std::string& target_name = g.schema.node_types[g.schema.target].name;
        const auto nt = static_cast<long long>(g.node_count(g.schema.target));
        for (std::size_t r = 0; r < lines.size(); ++r) {
            const auto cells = split_csv(lines[r]);
            if (cells.size() < 2 || cells.size() > 3)
                throw IoError(where(file, r + 2) + ": expected columns node_id,class[,type]");
            if (cells.size() == 3 && cells[2] != target_name)
                throw IoError(where(file, r + 2) + ": label on non-target type '" + std::string(cells[2]) + "'");
            const long long id = parse_int(cells[0], file, r + 2);
            std::string_view cls_cell = cells[1];
            if (auto cut = cls_cell.find_first_of(";|"); cut != std::string_view::npos)
                cls_cell = trim(cls_cell.substr(0, cut));
            const long long cls = parse_int(cls_cell, file, r + 2);
            if (id < 0 || id >= nt) throw IoError(where(file, r + 2) + ": label on nonexistent node " + std::to_string(id));
            if (cls < 0 || cls >= static_cast<long long>(g.schema.num_classes))
                throw IoError(where(file, r + 2) + ": class " + std::to_string(cls) + " out of range");
            g.labels.emplace(NodeRef{g.schema.target, static_cast<std::size_t>(id)}, static_cast<int>(cls));
        }
    }

    if (auto v = validate(g); !v.empty())
        throw IoError(mname + ": " + v.front().invariant + " violated at " + v.front().location);
    return g;
}

/// Writes `g` as a dataset directory; returns the manifest path. Features are
/// written in shortest round-trip form, so load_graph reproduces them exactly.
inline fs::path save_graph(const HetGraph& g, const fs::path& dir) {
    using namespace detail;
    fs::create_directories(dir);
    const auto& s = g.schema;
    json m;
    m["format"] = "hgmp-hetgraph/1";
    m["node_types"] = json::array();
    for (std::size_t t = 0; t < s.node_types.size(); ++t) {
        const auto& nt = s.node_types[t];
        const std::string file = "nodes_" + nt.name + ".csv";
        m["node_types"].push_back({{"name", nt.name}, {"dim", nt.dim}, {"count", g.node_count(t)}, {"file", file}});
        std::string text;
        for (std::size_t c = 0; c < nt.dim; ++c) text += (c ? ",f" : "f") + std::to_string(c);
        text += '\n';
        const Matrix& x = g.features[t];
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                if (c) text += ',';
                text += format_double(x(r, c));
            }
            text += '\n';
        }
        write_text(dir / file, text);
    }
    m["edge_types"] = json::array();
    for (std::size_t et = 0; et < s.edge_types.size(); ++et) {
        const auto& decl = s.edge_types[et];
        const std::string file = "edges_" + decl.name + ".csv";
        m["edge_types"].push_back({{"name", decl.name},
                                   {"src", s.node_types[decl.src].name},
                                   {"dst", s.node_types[decl.dst].name},
                                   {"file", file}});
        std::string text = "src,dst\n";
        for (const auto& e : g.edges[et]) text += std::to_string(e.src) + "," + std::to_string(e.dst) + "\n";
        write_text(dir / file, text);
    }
    m["target_type"] = s.node_types.empty() ? "" : s.node_types[s.target].name;
    m["num_classes"] = s.num_classes;
    m["labels"] = "labels.csv";
    std::string text = "node_id,class\n";
    for (const auto& [node, cls] : g.labels) text += std::to_string(node.index) + "," + std::to_string(cls) + "\n";
    write_text(dir / "labels.csv", text);
    write_text(dir / "manifest.json", m.dump(2) + "\n");
    return dir / "manifest.json";
}

}  // namespace hgmp
