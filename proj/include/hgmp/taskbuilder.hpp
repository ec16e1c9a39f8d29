#pragma once

// Node-, edge- and graph-level tasks recast as graph classification over
// induced ego subgraphs. Reachability ignores edge direction.

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgmp/hetgraph.hpp"
#include "hgmp/io.hpp"
#include "hgmp/random.hpp"

namespace hgmp {

using Origin = std::variant<NodeRef, EdgeRef>;

struct InducedSubgraph {
    HetGraph graph;  ///< parent schema; local indices; no labels
    Origin origin;
    std::optional<int> label;
    std::vector<std::vector<std::size_t>> node_map;  ///< per type: local index -> parent index (ascending)
    int tau = 0;
};

enum class TaskKind { node, edge, graph };

inline const char* to_string(TaskKind k) {
    switch (k) {
        case TaskKind::node: return "node";
        case TaskKind::edge: return "edge";
        case TaskKind::graph: return "graph";
    }
    return "?";
}

inline TaskKind parse_task_kind(std::string_view s) {
    if (s == "node") return TaskKind::node;
    if (s == "edge") return TaskKind::edge;
    if (s == "graph") return TaskKind::graph;
    throw ConfigError("unknown task kind '" + std::string(s) + "' (expected node, edge or graph)");
}

/// What to do with an edge whose endpoints are both of the target type.
enum class TwoTargetRule { skip, first_endpoint };

struct FewShotTask {
    TaskKind kind = TaskKind::node;
    std::vector<InducedSubgraph> support;
    std::vector<InducedSubgraph> query;
    std::vector<int> classes;
    std::size_t k = 0;
    std::uint64_t seed = 0;
};

/// Undirected incidence over the type-erased node set of one graph.
class NeighborIndex {
public:
    explicit NeighborIndex(const HetGraph& g) : offsets_(node_offsets(g)), incident_(offsets_.back()) {
        for (std::size_t et = 0; et < g.num_edge_types(); ++et) {
            const auto& decl = g.schema.edge_types[et];
            for (std::size_t p = 0; p < g.edges[et].size(); ++p) {
                const auto& e = g.edges[et][p];
                const std::size_t u = offsets_[decl.src] + e.src;
                const std::size_t v = offsets_[decl.dst] + e.dst;
                incident_[u].push_back({EdgeRef{et, p}, v});
                if (v != u) incident_[v].push_back({EdgeRef{et, p}, u});
            }
        }
    }

    std::size_t global(NodeRef n) const { return offsets_[n.type] + n.index; }

    NodeRef local(std::size_t id) const {
        const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), id);
        const auto t = static_cast<std::size_t>(it - offsets_.begin()) - 1;
        return {t, id - offsets_[t]};
    }

    std::size_t size() const { return incident_.size(); }

    struct Incidence {
        EdgeRef edge;
        std::size_t other;
    };

    const std::vector<Incidence>& incident(std::size_t id) const { return incident_[id]; }

    /// Global ids within `tau` hops of any seed.
    std::vector<std::size_t> ball(std::span<const std::size_t> seeds, int tau) const {
        std::vector<int> dist(incident_.size(), -1);
        std::deque<std::size_t> q;
        for (auto s : seeds)
            if (dist[s] < 0) {
                dist[s] = 0;
                q.push_back(s);
            }
        std::vector<std::size_t> out;
        while (!q.empty()) {
            const std::size_t u = q.front();
            q.pop_front();
            out.push_back(u);
            if (dist[u] >= tau) continue;
            for (const auto& inc : incident_[u])
                if (dist[inc.other] < 0) {
                    dist[inc.other] = dist[u] + 1;
                    q.push_back(inc.other);
                }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::vector<std::size_t> offsets_;
    std::vector<std::vector<Incidence>> incident_;
};

namespace detail {

inline InducedSubgraph induce(const HetGraph& g, const NeighborIndex& index, std::span<const std::size_t> nodes) {
    InducedSubgraph sub;
    sub.graph.schema = g.schema;
    const std::size_t nt = g.num_node_types();
    sub.node_map.assign(nt, {});
    std::vector<std::size_t> local_of(index.size(), static_cast<std::size_t>(-1));
    for (auto id : nodes) {  // ascending global id => ascending local index per type
        const NodeRef n = index.local(id);
        local_of[id] = sub.node_map[n.type].size();
        sub.node_map[n.type].push_back(n.index);
    }
    for (std::size_t t = 0; t < nt; ++t) {
        Matrix x(static_cast<Eigen::Index>(sub.node_map[t].size()), g.features[t].cols());
        for (std::size_t i = 0; i < sub.node_map[t].size(); ++i)
            x.row(static_cast<Eigen::Index>(i)) = g.features[t].row(static_cast<Eigen::Index>(sub.node_map[t][i]));
        sub.graph.features.push_back(std::move(x));
    }
    std::vector<EdgeRef> kept;
    for (auto id : nodes)
        for (const auto& inc : index.incident(id))
            if (local_of[inc.other] != static_cast<std::size_t>(-1)) kept.push_back(inc.edge);
    std::sort(kept.begin(), kept.end());
    kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
    sub.graph.edges.assign(g.num_edge_types(), {});
    const auto offsets = node_offsets(g);
    for (const auto& ref : kept) {
        const auto& decl = g.schema.edge_types[ref.type];
        const Edge& e = g.edges[ref.type][ref.position];
        sub.graph.edges[ref.type].push_back(
            {local_of[offsets[decl.src] + e.src], local_of[offsets[decl.dst] + e.dst]});
    }
    return sub;
}

inline void check_tau(int tau) {
    if (tau < 1) throw DomainError("tau must be a positive integer");
}

}  // namespace detail

inline InducedSubgraph node_induced_subgraph(const HetGraph& g, const NeighborIndex& index, NodeRef v, int tau) {
    detail::check_tau(tau);
    if (v.type >= g.num_node_types() || v.index >= g.node_count(v.type))
        throw DomainError("nonexistent node (" + std::to_string(v.type) + "," + std::to_string(v.index) + ")");
    const std::size_t seed = index.global(v);
    const auto nodes = index.ball(std::span<const std::size_t>(&seed, 1), tau);
    InducedSubgraph sub = detail::induce(g, index, nodes);
    sub.origin = v;
    sub.tau = tau;
    if (auto it = g.labels.find(v); it != g.labels.end()) sub.label = it->second;
    return sub;
}

inline InducedSubgraph node_induced_subgraph(const HetGraph& g, NodeRef v, int tau) {
    return node_induced_subgraph(g, NeighborIndex(g), v, tau);
}

/// Union of both endpoints' tau-balls with every parent edge among them. Unlabelled.
inline InducedSubgraph edge_induced_subgraph(const HetGraph& g, const NeighborIndex& index, EdgeRef e, int tau) {
    detail::check_tau(tau);
    if (e.type >= g.num_edge_types() || e.position >= g.edges[e.type].size())
        throw DomainError("nonexistent edge (" + std::to_string(e.type) + "," + std::to_string(e.position) + ")");
    const auto& decl = g.schema.edge_types[e.type];
    const Edge& edge = g.edges[e.type][e.position];
    const std::size_t seeds[2] = {index.global({decl.src, edge.src}), index.global({decl.dst, edge.dst})};
    const auto nodes = index.ball(seeds, tau);
    InducedSubgraph sub = detail::induce(g, index, nodes);
    sub.origin = e;
    sub.tau = tau;
    return sub;
}

inline InducedSubgraph edge_induced_subgraph(const HetGraph& g, EdgeRef e, int tau) {
    return edge_induced_subgraph(g, NeighborIndex(g), e, tau);
}

/// One labelled subgraph per labelled target node, in node order.
inline std::vector<InducedSubgraph> build_node_tasks(const HetGraph& g, int tau) {
    if (g.labels.empty()) throw DomainError("graph has no labelled target nodes");
    const NeighborIndex index(g);
    std::vector<InducedSubgraph> out;
    out.reserve(g.labels.size());
    for (const auto& [node, cls] : g.labels) out.push_back(node_induced_subgraph(g, index, node, tau));
    return out;
}

/// Labels each edge with its target-type endpoint's label. Edges without a
/// labelled target endpoint are skipped; edges with two target endpoints
/// follow `rule`.
inline std::vector<InducedSubgraph> build_edge_tasks(const HetGraph& g, int tau,
                                                     TwoTargetRule rule = TwoTargetRule::skip) {
    if (g.labels.empty()) throw DomainError("graph has no labelled target nodes");
    const NeighborIndex index(g);
    const std::size_t target = g.schema.target;
    std::vector<InducedSubgraph> out;
    for (std::size_t et = 0; et < g.num_edge_types(); ++et) {
        const auto& decl = g.schema.edge_types[et];
        const bool src_t = decl.src == target, dst_t = decl.dst == target;
        if (!src_t && !dst_t) continue;
        if (src_t && dst_t && rule == TwoTargetRule::skip) continue;
        for (std::size_t p = 0; p < g.edges[et].size(); ++p) {
            const Edge& e = g.edges[et][p];
            const NodeRef labelled = src_t ? NodeRef{target, e.src} : NodeRef{target, e.dst};
            const auto it = g.labels.find(labelled);
            if (it == g.labels.end()) continue;
            InducedSubgraph sub = edge_induced_subgraph(g, index, {et, p}, tau);
            sub.label = it->second;
            out.push_back(std::move(sub));
        }
    }
    if (out.empty()) throw DomainError("no edges with a labelled target-type endpoint");
    return out;
}

/// Exactly k support items per class (without replacement); a `query_fraction`
/// share of the remaining items, drawn at random, forms the query set.
inline FewShotTask sample_k_shot(std::span<const InducedSubgraph> tasks, std::size_t k, double query_fraction,
                                 std::uint64_t seed, TaskKind kind = TaskKind::node) {
    if (k == 0) throw DomainError("k must be positive");
    if (!(query_fraction >= 0.0 && query_fraction <= 1.0)) throw DomainError("query_fraction must lie in [0,1]");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!tasks[i].label) throw DomainError("unlabelled subgraph in task list");
        by_class[*tasks[i].label].push_back(i);
    }
    if (by_class.empty()) throw DomainError("empty task list");
    FewShotTask task;
    task.kind = kind;
    task.k = k;
    task.seed = seed;
    std::vector<std::size_t> rest;
    for (auto& [cls, items] : by_class) {
        if (items.size() < k + 1)
            throw DomainError("class " + std::to_string(cls) + " has " + std::to_string(items.size()) +
                              " items; need at least k+1 = " + std::to_string(k + 1));
        task.classes.push_back(cls);
        Rng rng = make_rng(derive_seed(seed, {static_cast<std::uint64_t>(cls)}));
        shuffle_in_place(items, rng);
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i < k)
                task.support.push_back(tasks[items[i]]);
            else
                rest.push_back(items[i]);
        }
    }
    Rng rng = make_rng(derive_seed(seed, {0xfeedULL}));
    std::sort(rest.begin(), rest.end());
    shuffle_in_place(rest, rng);
    const auto n_query = static_cast<std::size_t>(std::llround(query_fraction * static_cast<double>(rest.size())));
    rest.resize(n_query);
    std::sort(rest.begin(), rest.end());
    for (auto i : rest) task.query.push_back(tasks[i]);
    return task;
}

inline nlohmann::json origin_json(const Schema& s, const Origin& o) {
    if (const auto* n = std::get_if<NodeRef>(&o))
        return {{"kind", "node"}, {"type", s.node_types[n->type].name}, {"index", n->index}};
    const auto& e = std::get<EdgeRef>(o);
    return {{"kind", "edge"}, {"type", s.edge_types[e.type].name}, {"position", e.position}};
}

/// Writes each subgraph as its own dataset directory plus a tasks.json index.
inline void save_task_dump(const FewShotTask& task, const fs::path& dir) {
    fs::create_directories(dir);
    nlohmann::json index = nlohmann::json::array();
    std::size_t id = 0;
    auto emit = [&](const InducedSubgraph& sub, const char* split) {
        char name[32];
        std::snprintf(name, sizeof name, "sub_%05zu", id++);
        save_graph(sub.graph, dir / name);
        index.push_back({{"dir", name},
                         {"origin", origin_json(sub.graph.schema, sub.origin)},
                         {"label", sub.label ? nlohmann::json(*sub.label) : nlohmann::json(nullptr)},
                         {"split", split},
                         {"tau", sub.tau}});
    };
    for (const auto& s : task.support) emit(s, "support");
    for (const auto& s : task.query) emit(s, "query");
    nlohmann::json doc{{"kind", to_string(task.kind)}, {"k", task.k}, {"seed", task.seed}, {"tasks", index}};
    detail::write_text(dir / "tasks.json", doc.dump(2) + "\n");
}

}  // namespace hgmp
