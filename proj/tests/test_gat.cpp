#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "gafr/gat.hpp"
#include "helpers.hpp"

using namespace gafr;
using gafr::testing::graph_from_edges;
using gafr::testing::random_gnp;

namespace {

double elu_ref(double x) { return x > 0.0 ? x : std::expm1(x); }

// Dense reference: full NxN score matrix, masked softmax per row, plain
// loops, no tape.
Array2 dense_gat_reference(const Array2& h, const SampleGraph& g, GatLayerParams& layer) {
    int n = g.n;
    int dh = layer.d_head();
    int H = layer.head_count();
    bool concat = layer.combine == GatLayerParams::Combine::Concat;
    Array2 out(n, concat ? H * dh : dh);
    for (int hi = 0; hi < H; ++hi) {
        const Array2& W = layer.heads[hi].W.value;
        const Array2& a = layer.heads[hi].a.value;
        Array2 z(n, dh);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < dh; ++j) {
                double s = 0.0;
                for (int k = 0; k < h.cols; ++k) s += h.at(i, k) * W.at(k, j);
                z.at(i, j) = s;
            }
        std::vector<std::vector<double>> score(n, std::vector<double>(n, -std::numeric_limits<double>::infinity()));
        for (int u = 0; u < n; ++u) {
            std::vector<int> nb = g.adjacency[u];
            if (g.self_loops_in_attention) nb.push_back(u);
            for (int v : nb) {
                double e = 0.0;
                for (int j = 0; j < dh; ++j) e += a.at(j, 0) * z.at(u, j) + a.at(dh + j, 0) * z.at(v, j);
                score[u][v] = e > 0.0 ? e : layer.negative_slope * e;
            }
        }
        for (int u = 0; u < n; ++u) {
            double m = -std::numeric_limits<double>::infinity();
            for (int v = 0; v < n; ++v) m = std::max(m, score[u][v]);
            std::vector<double> alpha(n, 0.0);
            double sum = 0.0;
            if (std::isfinite(m)) {
                for (int v = 0; v < n; ++v)
                    if (std::isfinite(score[u][v])) {
                        alpha[v] = std::exp(score[u][v] - m);
                        sum += alpha[v];
                    }
            }
            for (int j = 0; j < dh; ++j) {
                double acc = 0.0;
                for (int v = 0; v < n; ++v)
                    if (alpha[v] > 0.0) acc += alpha[v] / sum * z.at(v, j);
                double val = sum > 0.0 ? elu_ref(acc) : 0.0;
                if (concat)
                    out.at(u, hi * dh + j) = val;
                else
                    out.at(u, j) += val / H;
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("a node with only its self-loop attends itself fully", "[gat]") {
    // node 3 is isolated; nodes 0-2 form a triangle
    SampleGraph g = graph_from_edges(4, {{0, 1}, {1, 2}, {0, 2}});
    std::mt19937_64 rng(3);
    auto layers = make_gat_stack(5, 1, 2, 4, rng);
    Array2 h = random_normal(4, 5, rng);

    Tape tape;
    AttentionPairs pairs = attention_pairs(g);
    auto [out, rec] = gat_forward(tape, tape.leaf(h), g, layers[0], pairs);

    int lo = pairs.offsets[3], hi = pairs.offsets[3 + 1];
    REQUIRE(hi - lo == 1);
    REQUIRE(pairs.dst[lo] == 3);
    for (const auto& head : rec.alpha) REQUIRE(head[lo] == Catch::Approx(1.0).epsilon(1e-12));

    // out_3 = mean over heads of elu(W h_3)
    const Array2& W0 = layers[0].heads[0].W.value;
    const Array2& W1 = layers[0].heads[1].W.value;
    for (int j = 0; j < 4; ++j) {
        double z0 = 0.0, z1 = 0.0;
        for (int k = 0; k < 5; ++k) {
            z0 += h.at(3, k) * W0.at(k, j);
            z1 += h.at(3, k) * W1.at(k, j);
        }
        double expect = 0.5 * (elu_ref(z0) + elu_ref(z1));
        REQUIRE(tape.value(out).at(3, j) == Catch::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("identical neighbor features give uniform attention", "[gat]") {
    SampleGraph g = graph_from_edges(4, {{0, 1}, {0, 2}, {0, 3}});
    std::mt19937_64 rng(5);
    auto layers = make_gat_stack(3, 1, 2, 4, rng);
    Array2 h(4, 3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) h.at(i, j) = 0.7 - 0.2 * j;  // every node identical

    Tape tape;
    AttentionPairs pairs = attention_pairs(g);
    auto [out, rec] = gat_forward(tape, tape.leaf(h), g, layers[0], pairs);
    (void)out;
    int lo = pairs.offsets[0], hi = pairs.offsets[1];
    REQUIRE(hi - lo == 4);
    for (const auto& head : rec.alpha)
        for (int i = lo; i < hi; ++i) REQUIRE(head[i] == Catch::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("zero attention vectors give uniform attention", "[gat]") {
    std::mt19937_64 rng(7);
    SampleGraph g = random_gnp(8, 0.4, rng);
    auto layers = make_gat_stack(4, 1, 3, 5, rng);
    for (auto& head : layers[0].heads) head.a.value.fill(0.0);

    Tape tape;
    AttentionPairs pairs = attention_pairs(g);
    auto [out, rec] = gat_forward(tape, tape.leaf(random_normal(8, 4, rng)), g, layers[0], pairs);
    (void)out;
    for (int u = 0; u < 8; ++u) {
        int lo = pairs.offsets[u], hi = pairs.offsets[u + 1];
        for (const auto& head : rec.alpha)
            for (int i = lo; i < hi; ++i)
                REQUIRE(head[i] == Catch::Approx(1.0 / (hi - lo)).epsilon(1e-12));
    }
}

TEST_CASE("forward matches the dense reference on a fixed 5-node graph", "[gat]") {
    SampleGraph g = graph_from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}, {1, 3}});
    std::mt19937_64 rng(11);
    auto layers = make_gat_stack(6, 1, 4, 3, rng);
    layers[0].combine = GatLayerParams::Combine::Concat;
    Array2 h = random_normal(5, 6, rng);

    Tape tape;
    AttentionPairs pairs = attention_pairs(g);
    auto [out, rec] = gat_forward(tape, tape.leaf(h), g, layers[0], pairs);
    (void)rec;
    Array2 ref = dense_gat_reference(h, g, layers[0]);
    REQUIRE(tape.value(out).rows == ref.rows);
    REQUIRE(tape.value(out).cols == ref.cols);
    for (size_t k = 0; k < ref.size(); ++k)
        REQUIRE(tape.value(out).data[k] == Catch::Approx(ref.data[k]).margin(1e-12));
}

TEST_CASE("stacking zero layers is the identity", "[gat]") {
    std::mt19937_64 rng(13);
    SampleGraph g = random_gnp(6, 0.3, rng);
    std::vector<GatLayerParams> none;
    Array2 h = random_normal(6, 4, rng);
    Tape tape;
    auto [out, recs] = stack_layers(tape, tape.leaf(h), g, none);
    REQUIRE(recs.empty());
    REQUIRE(tape.value(out) == h);
}

TEST_CASE("one stacked layer equals gat_forward", "[gat]") {
    std::mt19937_64 rng(17);
    SampleGraph g = random_gnp(7, 0.4, rng);
    auto layers = make_gat_stack(4, 1, 2, 3, rng);
    Array2 h = random_normal(7, 4, rng);

    Tape t1;
    auto [stacked, r1] = stack_layers(t1, t1.leaf(h), g, layers);
    (void)r1;
    Tape t2;
    AttentionPairs pairs = attention_pairs(g);
    auto [direct, r2] = gat_forward(t2, t2.leaf(h), g, layers[0], pairs);
    (void)r2;
    REQUIRE(t1.value(stacked) == t2.value(direct));
}

TEST_CASE("two stacked layers match the dense reference end-to-end", "[gat]") {
    std::mt19937_64 rng(19);
    SampleGraph g = random_gnp(12, 0.3, rng);
    auto layers = make_gat_stack(5, 2, 3, 4, rng);
    Array2 h = random_normal(12, 5, rng);

    Tape tape;
    auto [out, recs] = stack_layers(tape, tape.leaf(h), g, layers);
    (void)recs;
    Array2 mid = dense_gat_reference(h, g, layers[0]);
    Array2 ref = dense_gat_reference(mid, g, layers[1]);
    for (size_t k = 0; k < ref.size(); ++k)
        REQUIRE(tape.value(out).data[k] == Catch::Approx(ref.data[k]).margin(1e-12));
}

TEST_CASE("attention rows sum to one for every node and head", "[gat]") {
    std::mt19937_64 rng(23);
    for (int rep = 0; rep < 6; ++rep) {
        SampleGraph g = random_gnp(15, 0.25, rng);
        auto layers = make_gat_stack(4, 2, 3, 4, rng);
        Tape tape;
        auto [out, recs] = stack_layers(tape, tape.leaf(random_normal(15, 4, rng, 2.0)), g, layers);
        (void)out;
        for (const auto& rec : recs)
            for (const auto& head : rec.alpha)
                for (int u = 0; u < g.n; ++u) {
                    double s = 0.0;
                    for (int i = rec.pairs.offsets[u]; i < rec.pairs.offsets[u + 1]; ++i) {
                        s += head[i];
                        REQUIRE(head[i] >= 0.0);
                    }
                    REQUIRE(std::fabs(s - 1.0) < 1e-9);
                }
    }
}

TEST_CASE("node permutation equivariance", "[gat]") {
    std::mt19937_64 rng(29);
    int n = 9;
    SampleGraph g = random_gnp(n, 0.35, rng);
    auto layers = make_gat_stack(4, 2, 2, 3, rng);
    Array2 h = random_normal(n, 4, rng);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    SampleGraph pg;
    pg.n = n;
    pg.self_loops_in_attention = true;
    pg.adjacency.assign(n, {});
    for (int u = 0; u < n; ++u)
        for (int v : g.adjacency[u]) pg.adjacency[perm[u]].push_back(perm[v]);
    for (auto& a : pg.adjacency) std::sort(a.begin(), a.end());
    Array2 ph(n, 4);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 4; ++j) ph.at(perm[i], j) = h.at(i, j);

    Tape t1, t2;
    auto [o1, r1] = stack_layers(t1, t1.leaf(h), g, layers);
    auto [o2, r2] = stack_layers(t2, t2.leaf(ph), pg, layers);
    (void)r1;
    (void)r2;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < t1.value(o1).cols; ++j)
            REQUIRE(t2.value(o2).at(perm[i], j) == Catch::Approx(t1.value(o1).at(i, j)).margin(1e-12));
}

TEST_CASE("gat parameter gradients pass gradcheck", "[gat]") {
    std::mt19937_64 rng(37);
    SampleGraph g = random_gnp(12, 0.3, rng);
    auto layers = make_gat_stack(4, 2, 2, 3, rng);
    Array2 h = random_normal(12, 4, rng);
    Array2 probe = random_normal(12, 3, rng);

    std::vector<Param*> params;
    for (auto& layer : layers)
        for (auto& head : layer.heads) {
            params.push_back(&head.W);
            params.push_back(&head.a);
        }
    auto loss_fn = [&](bool with_grad) {
        Tape tape;
        auto [out, recs] = stack_layers(tape, tape.leaf(h), g, layers);
        (void)recs;
        ValueId loss = tape.matmul(
            tape.matmul(tape.leaf(Array2::ones(1, 12)), tape.mul(out, tape.leaf(probe))),
            tape.leaf(Array2::ones(3, 1)));
        if (with_grad) tape.backward(loss);
        return tape.value(loss).at(0, 0);
    };
    // step below the kink window of the attention leaky-relu
    GradcheckReport rep = gradcheck(loss_fn, params, 10, 1e-6, 1e-4, 41);
    REQUIRE(rep.all_pass());
}
