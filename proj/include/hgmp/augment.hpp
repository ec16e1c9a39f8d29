#pragma once

// Heterogeneous node masking and edge permutation.
//
// Each type's share of the perturbation budget is its squared count over the
// sum of squared counts, so abundant types absorb most of the changes and rare
// types (a handful of hub nodes) are left mostly intact.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hgmp/hetgraph.hpp"
#include "hgmp/random.hpp"

namespace hgmp {

/// count(i)^2 / sum_j count(j)^2.
inline std::vector<double> adjusted_ratios(std::span<const std::size_t> counts) {
    double denom = 0.0;
    for (auto c : counts) denom += static_cast<double>(c) * static_cast<double>(c);
    if (denom == 0.0) throw DomainError("adjusted ratios: all counts are zero");
    std::vector<double> out;
    out.reserve(counts.size());
    for (auto c : counts) out.push_back(static_cast<double>(c) * static_cast<double>(c) / denom);
    return out;
}

inline std::vector<double> adjusted_node_ratios(std::span<const std::size_t> node_counts) {
    return adjusted_ratios(node_counts);
}

inline std::vector<double> adjusted_edge_ratios(std::span<const std::size_t> edge_counts) {
    return adjusted_ratios(edge_counts);
}

/// round(r * ratio * total), clamped to [0, type_count].
inline std::size_t scaled_count(double r, double ratio, std::size_t total, std::size_t type_count) {
    const double raw = r * ratio * static_cast<double>(total);
    if (!(raw > 0.0)) return 0;
    const auto rounded = static_cast<std::size_t>(std::llround(raw));
    return std::min(rounded, type_count);
}

inline std::size_t num_to_mask(double r, double a_i, std::size_t total_nodes, std::size_t type_count) {
    return scaled_count(r, a_i, total_nodes, type_count);
}

inline std::size_t num_to_permute(double r, double b_i, std::size_t total_edges, std::size_t type_count) {
    return scaled_count(r, b_i, total_edges, type_count);
}

enum class AugmentStrategy { node_mask, edge_permute };

/// heterogeneous: squared-count budget per type.
/// uniform: type-blind; round(r * total) items drawn from the whole node/edge set.
enum class AugmentScope { heterogeneous, uniform };

struct AugmentAudit {
    std::vector<std::vector<std::size_t>> masked_nodes;    ///< per node type, sorted
    std::vector<std::vector<std::size_t>> permuted_edges;  ///< per edge type, sorted positions
    std::uint64_t seed = 0;

    bool operator==(const AugmentAudit&) const = default;
};

struct AugmentView {
    HetGraph graph;
    AugmentAudit audit;
};

struct AugmentConfig {
    double ratio = 0.2;
    std::vector<AugmentStrategy> view1{AugmentStrategy::node_mask};
    std::vector<AugmentStrategy> view2{AugmentStrategy::edge_permute};
    AugmentScope scope = AugmentScope::heterogeneous;
    std::uint64_t seed = 0;
};

inline nlohmann::json to_json(const AugmentAudit& a, const Schema& s) {
    nlohmann::json j{{"seed", a.seed}, {"masked_nodes", nlohmann::json::object()},
                     {"permuted_edges", nlohmann::json::object()}};
    for (std::size_t t = 0; t < a.masked_nodes.size(); ++t)
        j["masked_nodes"][s.node_types[t].name] = a.masked_nodes[t];
    for (std::size_t t = 0; t < a.permuted_edges.size(); ++t)
        j["permuted_edges"][s.edge_types[t].name] = a.permuted_edges[t];
    return j;
}

namespace detail {

inline void check_ratio(double r) {
    if (!(r >= 0.0 && r <= 1.0)) throw DomainError("augmentation ratio must lie in [0,1]");
}

/// Spreads a global sample of `k` items over per-type blocks of size counts[t].
inline std::vector<std::vector<std::size_t>> sample_global(std::span<const std::size_t> counts, std::size_t k,
                                                           Rng& rng) {
    std::size_t total = 0;
    for (auto c : counts) total += c;
    std::vector<std::vector<std::size_t>> out(counts.size());
    std::size_t t = 0, base = 0;
    for (auto id : sample_without_replacement(total, k, rng)) {
        while (id >= base + counts[t]) base += counts[t++];
        out[t].push_back(id - base);
    }
    return out;
}

}  // namespace detail

/// Zeroes the feature rows of the selected nodes; topology is untouched.
inline AugmentView apply_node_masking(const HetGraph& g, double r, std::uint64_t seed,
                                      AugmentScope scope = AugmentScope::heterogeneous) {
    detail::check_ratio(r);
    AugmentView view{g, {}};
    view.audit.seed = seed;
    view.audit.permuted_edges.assign(g.num_edge_types(), {});
    const auto counts = type_counts(g).nodes;
    const std::size_t total = g.total_nodes();
    if (total == 0) {
        view.audit.masked_nodes.assign(counts.size(), {});
        return view;
    }
    if (scope == AugmentScope::heterogeneous) {
        const auto a = adjusted_node_ratios(counts);
        view.audit.masked_nodes.resize(counts.size());
        for (std::size_t t = 0; t < counts.size(); ++t) {
            Rng rng = make_rng(derive_seed(seed, {1, t}));
            view.audit.masked_nodes[t] =
                sample_without_replacement(counts[t], num_to_mask(r, a[t], total, counts[t]), rng);
        }
    } else {
        Rng rng = make_rng(derive_seed(seed, {1}));
        view.audit.masked_nodes = detail::sample_global(counts, scaled_count(r, 1.0, total, total), rng);
    }
    for (std::size_t t = 0; t < counts.size(); ++t)
        for (auto i : view.audit.masked_nodes[t]) view.graph.features[t].row(static_cast<Eigen::Index>(i)).setZero();
    return view;
}

/// Shuffles destination endpoints among the selected edges of each type.
/// Sources, per-type counts and per-type destination multisets are preserved.
inline AugmentView apply_edge_permutation(const HetGraph& g, double r, std::uint64_t seed,
                                          AugmentScope scope = AugmentScope::heterogeneous) {
    detail::check_ratio(r);
    AugmentView view{g, {}};
    view.audit.seed = seed;
    view.audit.masked_nodes.assign(g.num_node_types(), {});
    const auto counts = type_counts(g).edges;
    const std::size_t total = g.total_edges();
    if (total == 0) {
        view.audit.permuted_edges.assign(counts.size(), {});
        return view;
    }
    if (scope == AugmentScope::heterogeneous) {
        const auto b = adjusted_edge_ratios(counts);
        view.audit.permuted_edges.resize(counts.size());
        for (std::size_t t = 0; t < counts.size(); ++t) {
            Rng rng = make_rng(derive_seed(seed, {2, t}));
            view.audit.permuted_edges[t] =
                sample_without_replacement(counts[t], num_to_permute(r, b[t], total, counts[t]), rng);
        }
    } else {
        Rng rng = make_rng(derive_seed(seed, {2}));
        view.audit.permuted_edges = detail::sample_global(counts, scaled_count(r, 1.0, total, total), rng);
    }
    for (std::size_t t = 0; t < counts.size(); ++t) {
        const auto& positions = view.audit.permuted_edges[t];
        std::vector<std::size_t> dsts;
        dsts.reserve(positions.size());
        for (auto p : positions) dsts.push_back(g.edges[t][p].dst);
        Rng rng = make_rng(derive_seed(seed, {3, t}));
        shuffle_in_place(dsts, rng);
        for (std::size_t i = 0; i < positions.size(); ++i) view.graph.edges[t][positions[i]].dst = dsts[i];
    }
    return view;
}

namespace detail {

inline AugmentView apply_strategies(const HetGraph& g, std::span<const AugmentStrategy> strategies, double r,
                                    AugmentScope scope, std::uint64_t seed) {
    AugmentView out{g, {}};
    out.audit.seed = seed;
    out.audit.masked_nodes.assign(g.num_node_types(), {});
    out.audit.permuted_edges.assign(g.num_edge_types(), {});
    for (std::size_t i = 0; i < strategies.size(); ++i) {
        const std::uint64_t s = derive_seed(seed, {static_cast<std::uint64_t>(i)});
        AugmentView step = strategies[i] == AugmentStrategy::node_mask ? apply_node_masking(out.graph, r, s, scope)
                                                                       : apply_edge_permutation(out.graph, r, s, scope);
        out.graph = std::move(step.graph);
        for (std::size_t t = 0; t < step.audit.masked_nodes.size(); ++t)
            if (!step.audit.masked_nodes[t].empty()) out.audit.masked_nodes[t] = step.audit.masked_nodes[t];
        for (std::size_t t = 0; t < step.audit.permuted_edges.size(); ++t)
            if (!step.audit.permuted_edges[t].empty()) out.audit.permuted_edges[t] = step.audit.permuted_edges[t];
    }
    return out;
}

}  // namespace detail

/// Two independently seeded views; each applies its strategy list in order.
inline std::pair<AugmentView, AugmentView> make_views(const HetGraph& g, const AugmentConfig& cfg) {
    detail::check_ratio(cfg.ratio);
    if (cfg.view1.empty() && cfg.view2.empty()) throw DomainError("augment config selects no strategy");
    return {detail::apply_strategies(g, cfg.view1, cfg.ratio, cfg.scope, derive_seed(cfg.seed, {1})),
            detail::apply_strategies(g, cfg.view2, cfg.ratio, cfg.scope, derive_seed(cfg.seed, {2}))};
}

inline const char* to_string(AugmentStrategy s) {
    return s == AugmentStrategy::node_mask ? "node_mask" : "edge_permute";
}

inline AugmentStrategy parse_strategy(std::string_view s) {
    if (s == "node_mask") return AugmentStrategy::node_mask;
    if (s == "edge_permute") return AugmentStrategy::edge_permute;
    throw ConfigError("unknown augmentation strategy '" + std::string(s) + "'");
}

}  // namespace hgmp
