#include <gtest/gtest.h>

#include "hgmp/taskbuilder.hpp"
#include "support/graphs.hpp"

using namespace hgmp;
using hgmp::testing::empty_graph;
using hgmp::testing::HopOracle;
using hgmp::testing::three_type_schema;

namespace {

std::set<NodeRef> parent_nodes(const InducedSubgraph& s) {
    std::set<NodeRef> out;
    for (std::size_t t = 0; t < s.node_map.size(); ++t)
        for (auto i : s.node_map[t]) out.insert({t, i});
    return out;
}

std::multiset<std::tuple<std::size_t, std::size_t, std::size_t>> parent_edges(const InducedSubgraph& s) {
    std::multiset<std::tuple<std::size_t, std::size_t, std::size_t>> out;
    for (std::size_t et = 0; et < s.graph.num_edge_types(); ++et) {
        const auto& d = s.graph.schema.edge_types[et];
        for (const auto& e : s.graph.edges[et]) out.insert({et, s.node_map[d.src][e.src], s.node_map[d.dst][e.dst]});
    }
    return out;
}

void expect_matches_oracle(const HetGraph& g, const HopOracle& oracle, const InducedSubgraph& sub,
                           const std::vector<NodeRef>& seeds, int tau) {
    const auto want = oracle.ball(seeds, tau);
    ASSERT_EQ(parent_nodes(sub), want);
    EXPECT_EQ(parent_edges(sub), hgmp::testing::edges_within(g, want));
    EXPECT_EQ(sub.graph.schema, g.schema);
    EXPECT_TRUE(validate(sub.graph).empty());
    for (std::size_t t = 0; t < sub.node_map.size(); ++t)
        for (std::size_t i = 0; i < sub.node_map[t].size(); ++i)
            EXPECT_EQ(sub.graph.features[t].row(static_cast<Eigen::Index>(i)),
                      g.features[t].row(static_cast<Eigen::Index>(sub.node_map[t][i])));
}

// A0 -ab- B0 -bc- C0 -ca- A1, plus isolated A2
HetGraph path_graph() {
    HetGraph g = empty_graph(three_type_schema(), {3, 1, 1});
    for (Eigen::Index i = 0; i < 3; ++i) g.features[0].row(i).setConstant(static_cast<double>(i + 1));
    g.edges[0] = {{0, 0}};
    g.edges[1] = {{0, 0}};
    g.edges[3] = {{0, 1}};
    g.labels[{0, 0}] = 1;
    g.labels[{0, 2}] = 2;
    return g;
}

}  // namespace

TEST(Subgraph, PathGrowsOneHopAtATime) {
    const HetGraph g = path_graph();
    EXPECT_EQ(parent_nodes(node_induced_subgraph(g, {0, 0}, 1)), (std::set<NodeRef>{{0, 0}, {1, 0}}));
    EXPECT_EQ(parent_nodes(node_induced_subgraph(g, {0, 0}, 2)), (std::set<NodeRef>{{0, 0}, {1, 0}, {2, 0}}));
    const auto s3 = node_induced_subgraph(g, {0, 0}, 3);
    EXPECT_EQ(parent_nodes(s3), (std::set<NodeRef>{{0, 0}, {0, 1}, {1, 0}, {2, 0}}));
    EXPECT_EQ(s3.graph.total_edges(), 3u);
    EXPECT_EQ(s3.label, 1);
    EXPECT_EQ(s3.tau, 3);
}

TEST(Subgraph, StarCenterReachesAllLeaves) {
    HetGraph g = empty_graph(three_type_schema(), {4, 1, 1});
    g.edges[0] = {{0, 0}, {1, 0}, {2, 0}, {3, 0}};
    const auto s = node_induced_subgraph(g, {1, 0}, 1);
    EXPECT_EQ(s.graph.total_nodes(), 5u);
    EXPECT_EQ(s.graph.total_edges(), 4u);
    EXPECT_FALSE(s.label.has_value());
    // a leaf at tau=1 sees only the center
    EXPECT_EQ(node_induced_subgraph(g, {0, 2}, 1).graph.total_nodes(), 2u);
}

TEST(Subgraph, IsolatedNodeIsSingleton) {
    const HetGraph g = path_graph();
    const auto s = node_induced_subgraph(g, {0, 2}, 3);
    EXPECT_EQ(s.graph.total_nodes(), 1u);
    EXPECT_EQ(s.graph.total_edges(), 0u);
    EXPECT_EQ(s.graph.features[0](0, 0), 3.0);
    EXPECT_EQ(s.label, 2);
    EXPECT_TRUE(s.graph.labels.empty());
}

TEST(Subgraph, InvalidArguments) {
    const HetGraph g = path_graph();
    EXPECT_THROW(node_induced_subgraph(g, {0, 0}, 0), DomainError);
    EXPECT_THROW(node_induced_subgraph(g, {0, 9}, 1), DomainError);
    EXPECT_THROW(node_induced_subgraph(g, {7, 0}, 1), DomainError);
    EXPECT_THROW(edge_induced_subgraph(g, {2, 0}, 1), DomainError);
}

TEST(Subgraph, MatchesBruteForceOnRandomGraphs) {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        const HetGraph g = hgmp::testing::random_graph(rng, 45);
        const HopOracle oracle(g);
        const NeighborIndex index(g);
        const int tau = 1 + static_cast<int>(rng() % 3);
        const std::size_t t = rng() % 3;
        const NodeRef v{t, rng() % g.node_count(t)};
        expect_matches_oracle(g, oracle, node_induced_subgraph(g, index, v, tau), {v}, tau);
        for (std::size_t et = 0; et < g.num_edge_types(); ++et) {
            if (g.edges[et].empty()) continue;
            const std::size_t p = rng() % g.edges[et].size();
            const auto& d = g.schema.edge_types[et];
            const auto& e = g.edges[et][p];
            expect_matches_oracle(g, oracle, edge_induced_subgraph(g, index, {et, p}, tau),
                                  {{d.src, e.src}, {d.dst, e.dst}}, tau);
            break;
        }
    }
}

TEST(Subgraph, BallIsMonotoneInTau) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const HetGraph g = hgmp::testing::random_graph(rng, 40);
        const NodeRef v{0, rng() % g.node_count(0)};
        auto prev = parent_nodes(node_induced_subgraph(g, v, 1));
        for (int tau = 2; tau <= 4; ++tau) {
            const auto cur = parent_nodes(node_induced_subgraph(g, v, tau));
            EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end()));
            prev = cur;
        }
    }
}

namespace {

// Six edges qualify under the skip rule: four A-B edges with a labelled A,
// two C-A edges with a labelled A. A-A edges only count with first_endpoint.
HetGraph edge_toy() {
    HetGraph g = empty_graph(three_type_schema(), {5, 3, 2});
    g.edges[0] = {{0, 0}, {1, 1}, {2, 2}, {3, 0}, {4, 1}};  // A4 unlabelled
    g.edges[1] = {{0, 0}, {1, 1}};
    g.edges[2] = {{0, 1}, {2, 3}};
    g.edges[3] = {{0, 2}, {1, 3}};
    for (std::size_t i = 0; i < 4; ++i) g.labels[{0, i}] = static_cast<int>(i % 3);
    return g;
}

}  // namespace

TEST(EdgeTasks, SkipRuleKeepsSixQualifyingEdges) {
    const HetGraph g = edge_toy();
    const auto tasks = build_edge_tasks(g, 1, TwoTargetRule::skip);
    ASSERT_EQ(tasks.size(), 6u);
    for (const auto& t : tasks) {
        const auto e = std::get<EdgeRef>(t.origin);
        const auto& d = g.schema.edge_types[e.type];
        const auto& edge = g.edges[e.type][e.position];
        const NodeRef labelled = d.src == 0 ? NodeRef{0, edge.src} : NodeRef{0, edge.dst};
        EXPECT_EQ(t.label, g.labels.at(labelled));
        EXPECT_NE(e.type, 2u);
    }
}

TEST(EdgeTasks, FirstEndpointRuleAddsTargetTargetEdges) {
    const auto tasks = build_edge_tasks(edge_toy(), 1, TwoTargetRule::first_endpoint);
    ASSERT_EQ(tasks.size(), 8u);
    std::size_t aa = 0;
    for (const auto& t : tasks)
        if (std::get<EdgeRef>(t.origin).type == 2) {
            ++aa;
            const auto pos = std::get<EdgeRef>(t.origin).position;
            EXPECT_EQ(t.label, pos == 0 ? 0 : 2);
        }
    EXPECT_EQ(aa, 2u);
}

TEST(NodeTasks, OnePerLabelledTarget) {
    const auto tasks = build_node_tasks(edge_toy(), 2);
    ASSERT_EQ(tasks.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(std::get<NodeRef>(tasks[i].origin), (NodeRef{0, i}));
        EXPECT_EQ(tasks[i].label, static_cast<int>(i % 3));
    }
    HetGraph unlabelled = edge_toy();
    unlabelled.labels.clear();
    EXPECT_THROW(build_node_tasks(unlabelled, 1), DomainError);
}

namespace {

std::vector<InducedSubgraph> labelled_items(std::size_t per_class, std::size_t classes) {
    std::vector<InducedSubgraph> out;
    for (std::size_t i = 0; i < per_class * classes; ++i) {
        InducedSubgraph s;
        s.origin = NodeRef{0, i};
        s.label = static_cast<int>(i % classes);
        out.push_back(s);
    }
    return out;
}

std::set<std::size_t> indices(const std::vector<InducedSubgraph>& v) {
    std::set<std::size_t> out;
    for (const auto& s : v) out.insert(std::get<NodeRef>(s.origin).index);
    return out;
}

}  // namespace

TEST(KShot, ExactlyKPerClassAndDisjointQuery) {
    const auto items = labelled_items(10, 3);
    const auto task = sample_k_shot(items, 3, 1.0, 42);
    ASSERT_EQ(task.support.size(), 9u);
    std::map<int, int> per;
    for (const auto& s : task.support) ++per[*s.label];
    EXPECT_EQ(per, (std::map<int, int>{{0, 3}, {1, 3}, {2, 3}}));
    EXPECT_EQ(task.query.size(), 21u);
    const auto a = indices(task.support), b = indices(task.query);
    std::vector<std::size_t> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    EXPECT_TRUE(both.empty());
    EXPECT_EQ(task.classes, (std::vector<int>{0, 1, 2}));
}

TEST(KShot, DeterministicPerSeed) {
    const auto items = labelled_items(10, 3);
    EXPECT_EQ(indices(sample_k_shot(items, 4, 1.0, 1).support), indices(sample_k_shot(items, 4, 1.0, 1).support));
    EXPECT_NE(indices(sample_k_shot(items, 4, 1.0, 1).support), indices(sample_k_shot(items, 4, 1.0, 2).support));
}

TEST(KShot, QueryFractionRoundsToNearest) {
    const auto task = sample_k_shot(labelled_items(10, 3), 3, 0.5, 0);
    EXPECT_EQ(task.query.size(), 11u);  // llround(10.5)
    EXPECT_EQ(sample_k_shot(labelled_items(10, 3), 3, 0.0, 0).query.size(), 0u);
}

TEST(KShot, RejectsTooFewItems) {
    const auto items = labelled_items(10, 3);
    EXPECT_NO_THROW(sample_k_shot(items, 9, 1.0, 0));
    EXPECT_THROW(sample_k_shot(items, 10, 1.0, 0), DomainError);
    EXPECT_THROW(sample_k_shot(items, 0, 1.0, 0), DomainError);
    auto unlabelled = items;
    unlabelled[3].label.reset();
    EXPECT_THROW(sample_k_shot(unlabelled, 1, 1.0, 0), DomainError);
}

TEST(TaskDump, WritesLoadableSubgraphs) {
    const HetGraph g = edge_toy();
    const auto tasks = build_node_tasks(g, 1);
    FewShotTask task;
    task.k = 1;
    task.support = {tasks[0], tasks[1]};
    task.query = {tasks[2]};
    const auto dir = hgmp::testing::scratch_dir("task_dump");
    save_task_dump(task, dir);
    const auto index = detail::read_json(dir / "tasks.json");
    ASSERT_EQ(index["tasks"].size(), 3u);
    EXPECT_EQ(index["tasks"][2]["split"], "query");
    EXPECT_EQ(index["tasks"][1]["origin"]["index"], 1);
    const HetGraph back = load_graph(dir / index["tasks"][0]["dir"].get<std::string>() / "manifest.json");
    EXPECT_EQ(back.total_nodes(), tasks[0].graph.total_nodes());
    EXPECT_EQ(back.total_edges(), tasks[0].graph.total_edges());
}
