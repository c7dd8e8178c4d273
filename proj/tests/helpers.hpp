#pragma once

#include <algorithm>
#include <random>
#include <utility>
#include <vector>

#include "gafr/dataio.hpp"
#include "gafr/simgraph.hpp"

namespace gafr::testing {

inline SampleGraph graph_from_edges(int n, const std::vector<std::pair<int, int>>& edges,
                                    bool self_loops = true) {
    SampleGraph g;
    g.n = n;
    g.self_loops_in_attention = self_loops;
    g.adjacency.assign(n, {});
    for (auto [u, v] : edges) {
        g.adjacency[u].push_back(v);
        g.adjacency[v].push_back(u);
    }
    for (auto& a : g.adjacency) std::sort(a.begin(), a.end());
    return g;
}

inline SampleGraph random_gnp(int n, double p, std::mt19937_64& rng) {
    std::vector<std::pair<int, int>> edges;
    std::uniform_real_distribution<double> coin(0, 1);
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            if (coin(rng) < p) edges.emplace_back(u, v);
    return graph_from_edges(n, edges);
}

// Small labelled table, all-train split by default.
inline FeatureTable random_table(int n, int d, uint64_t seed, int num_classes = 2) {
    FeatureTable t;
    std::mt19937_64 rng(seed);
    t.features = random_normal(n, d, rng);
    t.labels.resize(n);
    t.splits.assign(n, Split::Train);
    for (int i = 0; i < n; ++i) t.labels[i] = i % num_classes;
    t.num_classes = num_classes;
    t.ids.resize(n);
    for (int i = 0; i < n; ++i) t.ids[i] = "r" + std::to_string(i);
    return t;
}

}  // namespace gafr::testing
