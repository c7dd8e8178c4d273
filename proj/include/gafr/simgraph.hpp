#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "gafr/dataio.hpp"
#include "gafr/errors.hpp"
#include "gafr/text.hpp"

namespace gafr {

// Undirected similarity graph over table rows. Adjacency lists are sorted,
// self-edges are never stored; self_loops_in_attention only tells the GAT
// layer to extend each attention neighborhood with the node itself.
struct SampleGraph {
    int n = 0;
    std::vector<std::vector<int>> adjacency;
    double tau = 0.0;
    bool self_loops_in_attention = true;

    int degree(int u) const { return static_cast<int>(adjacency[u].size()); }

    long long edge_count() const {
        long long s = 0;
        for (const auto& a : adjacency) s += static_cast<long long>(a.size());
        return s / 2;
    }

    int isolated_count() const {
        int c = 0;
        for (const auto& a : adjacency)
            if (a.empty()) ++c;
        return c;
    }

    bool has_edge(int u, int v) const {
        const auto& a = adjacency[u];
        return std::binary_search(a.begin(), a.end(), v);
    }
};

// Cosine similarity; zero vectors get similarity 0 by convention.
inline double similarity(const std::vector<double>& xi, const std::vector<double>& xj) {
    if (xi.size() != xj.size())
        throw DimensionError("similarity: dimension mismatch " + std::to_string(xi.size()) +
                             " vs " + std::to_string(xj.size()));
    double dot = 0.0, ni = 0.0, nj = 0.0;
    for (size_t k = 0; k < xi.size(); ++k) {
        dot += xi[k] * xj[k];
        ni += xi[k] * xi[k];
        nj += xj[k] * xj[k];
    }
    if (ni == 0.0 || nj == 0.0) return 0.0;
    return dot / (std::sqrt(ni) * std::sqrt(nj));
}

// Edge {i,j} iff cosine(x_i, x_j) > tau, strict.
inline SampleGraph build_graph(const FeatureTable& table, double tau) {
    if (tau < -1.0 || tau > 1.0) throw ConfigError("tau must be in [-1, 1]");
    int n = table.n(), d = table.dim();
    SampleGraph g;
    g.n = n;
    g.tau = tau;
    g.adjacency.assign(n, {});
    std::vector<double> norm(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += table.features.at(i, j) * table.features.at(i, j);
        norm[i] = std::sqrt(s);
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            if (norm[i] == 0.0 || norm[j] == 0.0) continue;
            double dot = 0.0;
            for (int k = 0; k < d; ++k) dot += table.features.at(i, k) * table.features.at(j, k);
            double s = dot / (norm[i] * norm[j]);
            if (s > tau) {
                g.adjacency[i].push_back(j);
                g.adjacency[j].push_back(i);
            }
        }
    // inner loops append in increasing order already; keep the invariant explicit
    for (auto& a : g.adjacency) std::sort(a.begin(), a.end());
    return g;
}

// Empty graph on n nodes; the degenerate structure used by the no_graph ablation.
inline SampleGraph empty_graph(int n, double tau) {
    SampleGraph g;
    g.n = n;
    g.tau = tau;
    g.adjacency.assign(n, {});
    return g;
}

struct GraphStats {
    long long edges = 0;
    double density = 0.0;
    int isolated_count = 0;
    std::map<int, int> degree_histogram;
};

inline GraphStats graph_stats(const SampleGraph& g) {
    GraphStats s;
    s.edges = g.edge_count();
    s.isolated_count = g.isolated_count();
    if (g.n >= 2)
        s.density = 2.0 * static_cast<double>(s.edges) /
                    (static_cast<double>(g.n) * (g.n - 1));
    for (int u = 0; u < g.n; ++u) ++s.degree_histogram[g.degree(u)];
    return s;
}

// Edge-list export: one-line header `# n=<N> tau=<tau>`, then `u v` per
// line, 0-indexed with u < v.
inline void save_graph(const SampleGraph& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path);
    out << "# n=" << g.n << " tau=" << fmt_g17(g.tau) << "\n";
    for (int u = 0; u < g.n; ++u)
        for (int v : g.adjacency[u])
            if (u < v) out << u << ' ' << v << "\n";
}

}  // namespace gafr
