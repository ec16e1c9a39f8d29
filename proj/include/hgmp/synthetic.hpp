#pragma once

// Planted-class heterogeneous graph generator for desk-scale experiments.
//
// Every node gets a latent class: target nodes are balanced across classes,
// auxiliary nodes draw one uniformly. Features of a node of type t and class c
// are  signal * feature_scale * mu[t][c] + N(0, 1)  with mu drawn once per
// (type, class). Edges are laid out round-robin over shuffled source nodes;
// with probability `signal` the destination is drawn from same-class nodes,
// otherwise from all nodes of the destination type. signal = 0 therefore
// yields pure-noise features and class-blind wiring.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgmp/hetgraph.hpp"
#include "hgmp/random.hpp"

namespace hgmp {

struct SyntheticNodeType {
    std::string name;
    std::size_t count = 0;
    std::size_t dim = 0;
};

/// `count` edges between `src` and `dst`. When `reverse_of` names an earlier
/// edge type, this type mirrors it instead (swapped endpoints, count ignored).
struct SyntheticEdgeType {
    std::string name;
    std::string src;
    std::string dst;
    std::size_t count = 0;
    std::string reverse_of;
};

struct SyntheticSpec {
    std::vector<SyntheticNodeType> node_types;
    std::vector<SyntheticEdgeType> edge_types;
    std::string target;
    std::size_t num_classes = 3;
    double signal = 0.9;
    double feature_scale = 0.5;
    std::uint64_t seed = 0;
};

inline void check_spec(const SyntheticSpec& spec) {
    if (spec.node_types.empty()) throw DomainError("synthetic spec: no node types");
    if (spec.num_classes < 2) throw DomainError("synthetic spec: need at least 2 classes");
    if (!(spec.signal >= 0.0 && spec.signal <= 1.0)) throw DomainError("synthetic spec: signal must lie in [0,1]");
    if (!(spec.feature_scale >= 0.0)) throw DomainError("synthetic spec: feature_scale must be >= 0");
    bool has_target = false;
    for (const auto& t : spec.node_types) {
        if (t.count == 0) throw DomainError("synthetic spec: node type '" + t.name + "' has count 0");
        if (t.dim == 0) throw DomainError("synthetic spec: node type '" + t.name + "' has dim 0");
        has_target = has_target || t.name == spec.target;
    }
    if (!has_target) throw DomainError("synthetic spec: target type '" + spec.target + "' not declared");
}

inline HetGraph generate_synthetic(const SyntheticSpec& spec) {
    check_spec(spec);
    HetGraph g;
    for (const auto& t : spec.node_types) g.schema.node_types.push_back({t.name, t.dim});
    g.schema.target = *g.schema.find_node_type(spec.target);
    g.schema.num_classes = spec.num_classes;
    const std::size_t nt = spec.node_types.size();
    const std::size_t C = spec.num_classes;

    Rng rng = make_rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // latent classes
    std::vector<std::vector<int>> cls(nt);
    std::vector<std::vector<std::vector<std::size_t>>> members(nt, std::vector<std::vector<std::size_t>>(C));
    for (std::size_t t = 0; t < nt; ++t) {
        const std::size_t n = spec.node_types[t].count;
        cls[t].resize(n);
        if (t == g.schema.target) {
            for (std::size_t i = 0; i < n; ++i) cls[t][i] = static_cast<int>(i % C);
            shuffle_in_place(cls[t], rng);
        } else {
            for (std::size_t i = 0; i < n; ++i) cls[t][i] = static_cast<int>(uniform_index(rng, C));
        }
        for (std::size_t i = 0; i < n; ++i) members[t][static_cast<std::size_t>(cls[t][i])].push_back(i);
    }

    // features
    for (std::size_t t = 0; t < nt; ++t) {
        const auto n = static_cast<Eigen::Index>(spec.node_types[t].count);
        const auto d = static_cast<Eigen::Index>(spec.node_types[t].dim);
        Matrix mu(static_cast<Eigen::Index>(C), d);
        for (Eigen::Index c = 0; c < mu.rows(); ++c)
            for (Eigen::Index j = 0; j < d; ++j) mu(c, j) = normal(rng);
        Matrix x(n, d);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                x(i, j) = spec.signal * spec.feature_scale * mu(cls[t][static_cast<std::size_t>(i)], j) + normal(rng);
        g.features.push_back(std::move(x));
    }

    // wiring
    for (const auto& et : spec.edge_types) {
        const auto src = g.schema.find_node_type(et.src);
        const auto dst = g.schema.find_node_type(et.dst);
        if (!src || !dst) throw DomainError("synthetic spec: edge type '" + et.name + "' references an undeclared node type");
        g.schema.edge_types.push_back({et.name, *src, *dst});
        std::vector<Edge> list;
        if (!et.reverse_of.empty()) {
            const auto fwd = g.schema.find_edge_type(et.reverse_of);
            if (!fwd || *fwd + 1 >= g.schema.edge_types.size())
                throw DomainError("synthetic spec: reverse_of '" + et.reverse_of + "' must name an earlier edge type");
            const auto& fdecl = g.schema.edge_types[*fwd];
            if (fdecl.src != *dst || fdecl.dst != *src)
                throw DomainError("synthetic spec: '" + et.name + "' endpoints do not mirror '" + et.reverse_of + "'");
            for (const auto& e : g.edges[*fwd]) list.push_back({e.dst, e.src});
        } else {
            const std::size_t ns = spec.node_types[*src].count;
            const std::size_t nd = spec.node_types[*dst].count;
            std::vector<std::size_t> order(ns);
            for (std::size_t i = 0; i < ns; ++i) order[i] = i;
            shuffle_in_place(order, rng);
            list.reserve(et.count);
            for (std::size_t k = 0; k < et.count; ++k) {
                const std::size_t s = order[k % ns];
                const auto& same = members[*dst][static_cast<std::size_t>(cls[*src][s])];
                std::size_t d;
                if (unit(rng) < spec.signal && !same.empty())
                    d = same[uniform_index(rng, same.size())];
                else
                    d = uniform_index(rng, nd);
                list.push_back({s, d});
            }
        }
        g.edges.push_back(std::move(list));
    }

    for (std::size_t i = 0; i < cls[g.schema.target].size(); ++i)
        g.labels.emplace(NodeRef{g.schema.target, i}, cls[g.schema.target][i]);
    return g;
}

inline void to_json(nlohmann::json& j, const SyntheticSpec& s) {
    j = nlohmann::json{{"target", s.target},
                       {"num_classes", s.num_classes},
                       {"signal", s.signal},
                       {"feature_scale", s.feature_scale},
                       {"seed", s.seed}};
    j["node_types"] = nlohmann::json::array();
    for (const auto& t : s.node_types) j["node_types"].push_back({{"name", t.name}, {"count", t.count}, {"dim", t.dim}});
    j["edge_types"] = nlohmann::json::array();
    for (const auto& e : s.edge_types) {
        nlohmann::json ej{{"name", e.name}, {"src", e.src}, {"dst", e.dst}};
        if (e.reverse_of.empty())
            ej["count"] = e.count;
        else
            ej["reverse_of"] = e.reverse_of;
        j["edge_types"].push_back(std::move(ej));
    }
}

inline void from_json(const nlohmann::json& j, SyntheticSpec& s) {
    s = SyntheticSpec{};
    j.at("target").get_to(s.target);
    s.num_classes = j.value("num_classes", s.num_classes);
    s.signal = j.value("signal", s.signal);
    s.feature_scale = j.value("feature_scale", s.feature_scale);
    s.seed = j.value("seed", s.seed);
    for (const auto& t : j.at("node_types"))
        s.node_types.push_back({t.at("name").get<std::string>(), t.at("count").get<std::size_t>(),
                                t.at("dim").get<std::size_t>()});
    for (const auto& e : j.at("edge_types"))
        s.edge_types.push_back({e.at("name").get<std::string>(), e.at("src").get<std::string>(),
                                e.at("dst").get<std::string>(), e.value("count", std::size_t{0}),
                                e.value("reverse_of", std::string{})});
}

}  // namespace hgmp
