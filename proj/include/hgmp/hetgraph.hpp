#pragma once

// Typed heterogeneous graph: per-type dense feature matrices, per-type edge
// lists, and class labels on nodes of a single target type.
//
// Node identity is the pair (type id, type-local index). Type ids are
// positions in the schema vectors.

#include <Eigen/Dense>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hgmp/error.hpp"

namespace hgmp {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct NodeType {
    std::string name;
    std::size_t dim = 0;

    bool operator==(const NodeType&) const = default;
};

struct EdgeType {
    std::string name;
    std::size_t src = 0;  ///< node type id
    std::size_t dst = 0;  ///< node type id

    bool operator==(const EdgeType&) const = default;
};

struct Schema {
    std::vector<NodeType> node_types;
    std::vector<EdgeType> edge_types;
    std::size_t target = 0;
    std::size_t num_classes = 0;

    bool operator==(const Schema&) const = default;

    std::optional<std::size_t> find_node_type(std::string_view name) const {
        for (std::size_t i = 0; i < node_types.size(); ++i)
            if (node_types[i].name == name) return i;
        return std::nullopt;
    }

    std::optional<std::size_t> find_edge_type(std::string_view name) const {
        for (std::size_t i = 0; i < edge_types.size(); ++i)
            if (edge_types[i].name == name) return i;
        return std::nullopt;
    }
};

struct NodeRef {
    std::size_t type = 0;
    std::size_t index = 0;

    auto operator<=>(const NodeRef&) const = default;
};

struct EdgeRef {
    std::size_t type = 0;
    std::size_t position = 0;

    auto operator<=>(const EdgeRef&) const = default;
};

struct Edge {
    std::size_t src = 0;
    std::size_t dst = 0;

    auto operator<=>(const Edge&) const = default;
};

/// Value type; treat as immutable once built. Transformations return copies.
struct HetGraph {
    Schema schema;
    std::vector<Matrix> features;          ///< one per node type; rows are nodes
    std::vector<std::vector<Edge>> edges;  ///< one per edge type
    std::map<NodeRef, int> labels;

    std::size_t num_node_types() const { return schema.node_types.size(); }
    std::size_t num_edge_types() const { return schema.edge_types.size(); }

    std::size_t node_count(std::size_t type) const {
        return static_cast<std::size_t>(features.at(type).rows());
    }

    std::size_t total_nodes() const {
        std::size_t n = 0;
        for (const auto& f : features) n += static_cast<std::size_t>(f.rows());
        return n;
    }

    std::size_t total_edges() const {
        std::size_t n = 0;
        for (const auto& e : edges) n += e.size();
        return n;
    }

    bool operator==(const HetGraph& other) const {
        if (schema != other.schema || edges != other.edges || labels != other.labels) return false;
        if (features.size() != other.features.size()) return false;
        for (std::size_t t = 0; t < features.size(); ++t) {
            if (features[t].rows() != other.features[t].rows() ||
                features[t].cols() != other.features[t].cols())
                return false;
            if (features[t] != other.features[t]) return false;
        }
        return true;
    }
};

struct Violation {
    std::string invariant;
    std::string location;
};

/// Checks every structural invariant. Never throws; an empty result means valid.
inline std::vector<Violation> validate(const HetGraph& g) {
    std::vector<Violation> out;
    const auto& s = g.schema;
    const std::size_t nt = s.node_types.size();

    std::set<std::string> seen;
    for (const auto& t : s.node_types)
        if (!seen.insert(t.name).second)
            out.push_back({"unique node type ids", "node type '" + t.name + "'"});
    seen.clear();
    for (const auto& e : s.edge_types)
        if (!seen.insert(e.name).second)
            out.push_back({"unique edge type ids", "edge type '" + e.name + "'"});

    for (const auto& e : s.edge_types)
        if (e.src >= nt || e.dst >= nt)
            out.push_back({"edge type endpoints are declared node types", "edge type '" + e.name + "'"});

    if (nt > 0 && s.target >= nt)
        out.push_back({"target type is a declared node type", "schema.target"});

    if (g.features.size() != nt) {
        out.push_back({"one feature matrix per node type", "features"});
        return out;
    }
    if (g.edges.size() != s.edge_types.size()) {
        out.push_back({"one edge list per edge type", "edges"});
        return out;
    }

    for (std::size_t t = 0; t < nt; ++t) {
        if (static_cast<std::size_t>(g.features[t].cols()) != s.node_types[t].dim)
            out.push_back({"feature dimension constant within type",
                           "features of '" + s.node_types[t].name + "': declared " +
                               std::to_string(s.node_types[t].dim) + ", found " +
                               std::to_string(g.features[t].cols())});
    }

    for (std::size_t et = 0; et < s.edge_types.size(); ++et) {
        const auto& decl = s.edge_types[et];
        if (decl.src >= nt || decl.dst >= nt) continue;
        const std::size_t ns = g.node_count(decl.src), nd = g.node_count(decl.dst);
        for (std::size_t p = 0; p < g.edges[et].size(); ++p) {
            const auto& e = g.edges[et][p];
            if (e.src >= ns || e.dst >= nd)
                out.push_back({"edge endpoints index valid nodes",
                               "edge '" + decl.name + "' position " + std::to_string(p)});
        }
    }

    for (const auto& [node, cls] : g.labels) {
        const std::string where = "label on node (" + std::to_string(node.type) + "," +
                                  std::to_string(node.index) + ")";
        if (node.type != s.target) {
            out.push_back({"labels only on target type", where});
            continue;
        }
        if (node.type < nt && node.index >= g.node_count(node.type))
            out.push_back({"labelled node exists", where});
        if (cls < 0 || static_cast<std::size_t>(cls) >= s.num_classes)
            out.push_back({"class id in range", where + ": class " + std::to_string(cls)});
    }
    return out;
}

struct TypeCounts {
    std::vector<std::size_t> nodes;  ///< indexed by node type id
    std::vector<std::size_t> edges;  ///< indexed by edge type id
};

inline TypeCounts type_counts(const HetGraph& g) {
    TypeCounts c;
    for (std::size_t t = 0; t < g.num_node_types(); ++t) c.nodes.push_back(g.node_count(t));
    for (const auto& e : g.edges) c.edges.push_back(e.size());
    return c;
}

/// Stable 64-bit FNV-1a hash, hex-encoded.
inline std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Identifies a schema (type names, dims, wiring, target, classes).
inline std::string schema_fingerprint(const Schema& s) {
    std::string canon;
    for (const auto& t : s.node_types) canon += "n:" + t.name + ":" + std::to_string(t.dim) + ";";
    for (const auto& e : s.edge_types)
        canon += "e:" + e.name + ":" + std::to_string(e.src) + ":" + std::to_string(e.dst) + ";";
    canon += "t:" + std::to_string(s.target) + ";c:" + std::to_string(s.num_classes);
    return fnv1a_hex(canon);
}

/// Global (type-erased) node numbering: type-major, then local index.
inline std::vector<std::size_t> node_offsets(const HetGraph& g) {
    std::vector<std::size_t> off(g.num_node_types() + 1, 0);
    for (std::size_t t = 0; t < g.num_node_types(); ++t) off[t + 1] = off[t] + g.node_count(t);
    return off;
}

}  // namespace hgmp
