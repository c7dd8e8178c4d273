#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "gafr/array.hpp"
#include "gafr/simgraph.hpp"

namespace gafr {

// Per-node descriptor triple, each component in [0,1].
struct TopoVector {
    double clustering = 0.0;
    double degree_norm = 0.0;
    double label_agreement = 0.5;
};

// C(u) = 2 T(u) / (d(u)(d(u)-1)), zero when d(u) < 2.
inline double clustering_coefficient(const SampleGraph& g, int u) {
    const auto& nb = g.adjacency[u];
    int d = static_cast<int>(nb.size());
    if (d < 2) return 0.0;
    long long t = 0;
    for (int a = 0; a < d; ++a)
        for (int b = a + 1; b < d; ++b)
            if (g.has_edge(nb[a], nb[b])) ++t;
    return 2.0 * static_cast<double>(t) / (static_cast<double>(d) * (d - 1));
}

// d(u) / max_v d(v); zero on an edgeless graph.
inline double normalized_degree(const SampleGraph& g, int u) {
    int dmax = 0;
    for (int v = 0; v < g.n; ++v) dmax = std::max(dmax, g.degree(v));
    if (dmax == 0) return 0.0;
    return static_cast<double>(g.degree(u)) / dmax;
}

// Fraction of train-labeled nodes within distance {1,2} of u that share u's
// reference label. The reference is u's own label when u is in the train
// split, otherwise the majority label of the context set (ties broken by
// lowest class index). Empty context yields the neutral 0.5. Labels of
// non-train nodes are never read.
inline double two_hop_label_agreement(const SampleGraph& g, int u,
                                      const std::vector<int>& labels,
                                      const std::vector<bool>& train_mask) {
    std::vector<int> dist(g.n, -1);
    dist[u] = 0;
    std::vector<int> context;
    std::vector<int> frontier = {u};
    for (int hop = 1; hop <= 2; ++hop) {
        std::vector<int> next;
        for (int w : frontier)
            for (int v : g.adjacency[w])
                if (dist[v] < 0) {
                    dist[v] = hop;
                    next.push_back(v);
                    if (train_mask[v]) context.push_back(v);
                }
        frontier = std::move(next);
    }
    if (context.empty()) return 0.5;

    int ref;
    if (train_mask[u]) {
        ref = labels[u];
    } else {
        std::map<int, int> votes;
        for (int v : context) ++votes[labels[v]];
        ref = votes.begin()->first;
        int best = votes.begin()->second;
        for (const auto& [cls, cnt] : votes)
            if (cnt > best) {
                best = cnt;
                ref = cls;
            }
    }
    int agree = 0;
    for (int v : context)
        if (labels[v] == ref) ++agree;
    return static_cast<double>(agree) / static_cast<double>(context.size());
}

inline std::vector<TopoVector> topo_features(const SampleGraph& g,
                                             const std::vector<int>& labels,
                                             const std::vector<bool>& train_mask) {
    std::vector<TopoVector> out(g.n);
    int dmax = 0;
    for (int v = 0; v < g.n; ++v) dmax = std::max(dmax, g.degree(v));
    for (int u = 0; u < g.n; ++u) {
        out[u].clustering = clustering_coefficient(g, u);
        out[u].degree_norm = dmax == 0 ? 0.0 : static_cast<double>(g.degree(u)) / dmax;
        out[u].label_agreement = two_hop_label_agreement(g, u, labels, train_mask);
    }
    return out;
}

inline Array2 topo_matrix(const std::vector<TopoVector>& t) {
    Array2 out(static_cast<int>(t.size()), 3);
    for (size_t i = 0; i < t.size(); ++i) {
        out.at(static_cast<int>(i), 0) = t[i].clustering;
        out.at(static_cast<int>(i), 1) = t[i].degree_norm;
        out.at(static_cast<int>(i), 2) = t[i].label_agreement;
    }
    return out;
}

}  // namespace gafr
