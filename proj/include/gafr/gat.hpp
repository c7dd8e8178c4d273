#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gafr/errors.hpp"
#include "gafr/simgraph.hpp"
#include "gafr/tape.hpp"

namespace gafr {

// One attention head: shared projection W (d_in x d_head) scores and
// transforms, attention vector a ((2 d_head) x 1) split into source and
// destination halves.
struct GatHeadParams {
    Param W;
    Param a;
};

struct GatLayerParams {
    std::vector<GatHeadParams> heads;
    double negative_slope = 0.2;
    enum class Combine { Concat, Mean } combine = Combine::Concat;

    int head_count() const { return static_cast<int>(heads.size()); }
    int d_in() const { return heads[0].W.value.rows; }
    int d_head() const { return heads[0].W.value.cols; }
    int d_out() const { return combine == Combine::Concat ? head_count() * d_head() : d_head(); }
};

// Flattened attention neighborhoods: pair i attends src[i] <- dst[i], pairs
// of node u occupy [offsets[u], offsets[u+1]). With self_loops_in_attention
// every node's own index is part of its neighborhood.
struct AttentionPairs {
    std::vector<int> src;
    std::vector<int> dst;
    std::vector<int> offsets;

    int pair_count() const { return static_cast<int>(src.size()); }
};

inline AttentionPairs attention_pairs(const SampleGraph& g) {
    AttentionPairs p;
    p.offsets.reserve(g.n + 1);
    p.offsets.push_back(0);
    for (int u = 0; u < g.n; ++u) {
        std::vector<int> targets = g.adjacency[u];
        if (g.self_loops_in_attention) {
            targets.insert(std::lower_bound(targets.begin(), targets.end(), u), u);
        }
        for (int v : targets) {
            p.src.push_back(u);
            p.dst.push_back(v);
        }
        p.offsets.push_back(static_cast<int>(p.src.size()));
    }
    return p;
}

// Coefficients alpha_uv per head for every attention pair.
struct AttentionRecord {
    AttentionPairs pairs;
    std::vector<std::vector<double>> alpha;  // [head][pair]

    // Mean-over-heads coefficients of node u as (neighbor, alpha) pairs.
    std::vector<std::pair<int, double>> node_coefficients(int u) const {
        std::vector<std::pair<int, double>> out;
        for (int i = pairs.offsets[u]; i < pairs.offsets[u + 1]; ++i) {
            double s = 0.0;
            for (const auto& h : alpha) s += h[i];
            out.emplace_back(pairs.dst[i], s / static_cast<double>(alpha.size()));
        }
        return out;
    }
};

namespace detail {

// Constant selector placing a d_head-wide block at head position h.
inline Array2 concat_selector(int d_head, int head_count, int h) {
    Array2 s(d_head, d_head * head_count);
    for (int j = 0; j < d_head; ++j) s.at(j, h * d_head + j) = 1.0;
    return s;
}

}  // namespace detail

// One multi-head GAT layer on the tape. Per head: z = h W,
// e_uv = leaky_relu(a . [z_u || z_v]), alpha = softmax of e over each
// neighborhood, out_u = elu(sum_v alpha_uv z_v). With uniform_attention the
// scores are skipped and alpha is the uniform constant over each
// neighborhood (the w/o A ablation).
inline std::pair<ValueId, AttentionRecord> gat_forward(Tape& tape, ValueId h,
                                                       const SampleGraph& g,
                                                       GatLayerParams& layer,
                                                       const AttentionPairs& pairs,
                                                       bool uniform_attention = false) {
    const int n = g.n;
    const int H = layer.head_count();
    const int dh = layer.d_head();
    if (tape.value(h).cols != layer.d_in())
        throw DimensionError("gat_forward: input dim " + std::to_string(tape.value(h).cols) +
                             " != layer d_in " + std::to_string(layer.d_in()));

    AttentionRecord record;
    record.pairs = pairs;

    std::vector<int> lower(dh), upper(dh);
    for (int j = 0; j < dh; ++j) {
        lower[j] = j;
        upper[j] = dh + j;
    }

    ValueId combined = -1;
    for (int hi = 0; hi < H; ++hi) {
        GatHeadParams& head = layer.heads[hi];
        ValueId W = tape.param(head.W);
        ValueId z = tape.matmul(h, W);
        ValueId zsrc = tape.gather_rows(z, pairs.src);
        ValueId zdst = tape.gather_rows(z, pairs.dst);

        ValueId alpha;
        if (uniform_attention) {
            Array2 u(pairs.pair_count(), 1);
            for (int nu = 0; nu < n; ++nu) {
                int lo = pairs.offsets[nu], hi2 = pairs.offsets[nu + 1];
                for (int i = lo; i < hi2; ++i) u.at(i, 0) = 1.0 / static_cast<double>(hi2 - lo);
            }
            alpha = tape.leaf(std::move(u));
        } else {
            ValueId a = tape.param(head.a);
            ValueId a_src = tape.gather_rows(a, lower);
            ValueId a_dst = tape.gather_rows(a, upper);
            ValueId e = tape.add(tape.matmul(zsrc, a_src), tape.matmul(zdst, a_dst));
            e = tape.leaky_relu(e, layer.negative_slope);
            alpha = tape.softmax_groups(e, pairs.offsets);
        }
        record.alpha.emplace_back(tape.value(alpha).data);

        ValueId msg = tape.mul(zdst, alpha);
        ValueId agg = tape.scatter_sum_rows(msg, pairs.src, n);
        ValueId head_out = tape.elu(agg);

        if (layer.combine == GatLayerParams::Combine::Concat) {
            ValueId placed = tape.matmul(head_out, tape.leaf(detail::concat_selector(dh, H, hi)));
            combined = hi == 0 ? placed : tape.add(combined, placed);
        } else {
            combined = hi == 0 ? head_out : tape.add(combined, head_out);
        }
    }
    if (layer.combine == GatLayerParams::Combine::Mean && H > 1)
        combined = tape.scalar_scale(combined, 1.0 / static_cast<double>(H));
    return {combined, std::move(record)};
}

// Runs the layer list in order; records attention per layer. Zero layers
// pass h0 through unchanged.
inline std::pair<ValueId, std::vector<AttentionRecord>> stack_layers(
    Tape& tape, ValueId h0, const SampleGraph& g, std::vector<GatLayerParams>& layers,
    bool uniform_attention = false) {
    AttentionPairs pairs = attention_pairs(g);
    ValueId h = h0;
    std::vector<AttentionRecord> records;
    for (size_t li = 0; li < layers.size(); ++li) {
        if (tape.value(h).cols != layers[li].d_in())
            throw DimensionError("stack_layers: layer " + std::to_string(li) + " expects dim " +
                                 std::to_string(layers[li].d_in()) + ", got " +
                                 std::to_string(tape.value(h).cols));
        auto [out, rec] = gat_forward(tape, h, g, layers[li], pairs, uniform_attention);
        h = out;
        records.push_back(std::move(rec));
    }
    return {h, std::move(records)};
}

// Default stack shape: hidden layers concat their heads, the final layer
// averages them, so the embedding dim equals the last layer's d_head.
inline std::vector<GatLayerParams> make_gat_stack(int d_in, int layer_count, int head_count,
                                                  int d_head, std::mt19937_64& rng) {
    std::vector<GatLayerParams> layers;
    int cur = d_in;
    for (int li = 0; li < layer_count; ++li) {
        GatLayerParams layer;
        layer.combine = li + 1 == layer_count ? GatLayerParams::Combine::Mean
                                              : GatLayerParams::Combine::Concat;
        for (int hi = 0; hi < head_count; ++hi) {
            std::string base = "gat.l" + std::to_string(li) + ".h" + std::to_string(hi);
            double w_scale = std::sqrt(2.0 / static_cast<double>(cur + d_head));
            GatHeadParams head;
            head.W = Param(base + ".W", random_normal(cur, d_head, rng, w_scale));
            head.a = Param(base + ".a", random_normal(2 * d_head, 1, rng, 0.1));
            layer.heads.push_back(std::move(head));
        }
        cur = layer.d_out();
        layers.push_back(std::move(layer));
    }
    return layers;
}

}  // namespace gafr
