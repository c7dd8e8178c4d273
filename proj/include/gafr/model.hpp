#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gafr/dataio.hpp"
#include "gafr/errors.hpp"
#include "gafr/fuzzy.hpp"
#include "gafr/gat.hpp"
#include "gafr/metrics.hpp"
#include "gafr/simgraph.hpp"
#include "gafr/tape.hpp"
#include "gafr/text.hpp"
#include "gafr/topo.hpp"

namespace gafr {

// How the rule signal r(u) enters the embedding (Additive is the default
// projected reading, ScalarBroadcast the literal scalar one, Gated adds a
// learned sigmoid gate).
enum class FusionMode { Additive, Gated, ScalarBroadcast };

enum class Ablation { Full, NoGraph, NoAttention, NoFuzzy };

enum class ClassWeighting { None, InverseFrequency };

inline const char* fusion_mode_name(FusionMode m) {
    switch (m) {
        case FusionMode::Additive: return "additive";
        case FusionMode::Gated: return "gated";
        default: return "scalar-broadcast";
    }
}

inline FusionMode parse_fusion_mode(const std::string& s) {
    if (s == "additive") return FusionMode::Additive;
    if (s == "gated") return FusionMode::Gated;
    if (s == "scalar-broadcast") return FusionMode::ScalarBroadcast;
    throw ConfigError("unknown fusion mode '" + s + "' (additive|gated|scalar-broadcast)");
}

inline const char* ablation_name(Ablation a) {
    switch (a) {
        case Ablation::Full: return "full";
        case Ablation::NoGraph: return "no_graph";
        case Ablation::NoAttention: return "no_attention";
        default: return "no_fuzzy";
    }
}

inline Ablation parse_ablation(const std::string& s) {
    if (s == "full") return Ablation::Full;
    if (s == "no_graph") return Ablation::NoGraph;
    if (s == "no_attention") return Ablation::NoAttention;
    if (s == "no_fuzzy") return Ablation::NoFuzzy;
    throw ConfigError("unknown ablation '" + s + "' (full|no_graph|no_attention|no_fuzzy)");
}

// Report row labels following the paper's ablation naming.
inline const char* ablation_label(Ablation a) {
    switch (a) {
        case Ablation::Full: return "GAFR-Net";
        case Ablation::NoGraph: return "GAFR-Net w/o G";
        case Ablation::NoAttention: return "GAFR-Net w/o A";
        default: return "GAFR-Net w/o FR";
    }
}

inline const char* class_weighting_name(ClassWeighting w) {
    return w == ClassWeighting::None ? "none" : "inverse-frequency";
}

inline ClassWeighting parse_class_weighting(const std::string& s) {
    if (s == "none") return ClassWeighting::None;
    if (s == "inverse-frequency") return ClassWeighting::InverseFrequency;
    throw ConfigError("unknown class weighting '" + s + "' (none|inverse-frequency)");
}

struct TrainConfig {
    double learning_rate = 1e-4;
    int epochs = 50;
    uint64_t seed = 0;
    double tau = 0.75;
    double weight_decay = 0.0;
    ClassWeighting class_weighting = ClassWeighting::InverseFrequency;
    int early_stop_patience = 0;  // 0 = disabled
    Ablation ablation = Ablation::Full;
    FusionMode fusion_mode = FusionMode::Additive;
    int gat_layers = 2;
    int gat_heads = 4;
    int gat_hidden = 16;  // per-head width

    void validate() const {
        if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (tau < -1.0 || tau > 1.0) throw ConfigError("tau must be in [-1, 1]");
        if (gat_layers < 0) throw ConfigError("gat_layers must be >= 0");
        if (gat_heads < 1 || gat_hidden < 1) throw ConfigError("heads and hidden width must be >= 1");
        if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
        if (early_stop_patience < 0) throw ConfigError("early_stop_patience must be >= 0");
    }
};

// Maps the K-dim weighted rule vector into the embedding space. W_r rows are
// rules, columns embedding dims; gate params are used only in gated mode.
struct FusionParams {
    Param W_r;     // K x d
    Param gate_w;  // K x 1
    Param gate_b;  // 1 x 1
};

struct ClassifierParams {
    Param W_c;   // d x num_classes
    Param bias;  // 1 x num_classes
};

// Raw-feature fallback used by the w/o G ablation.
struct MlpParams {
    Param W1, b1, W2, b2;
};

struct ModelParams {
    std::vector<GatLayerParams> gat_layers;
    MlpParams mlp;
    MembershipParams membership;
    RuleBase rules;
    FusionParams fusion;
    ClassifierParams classifier;

    int embedding_dim() const { return classifier.W_c.value.rows; }

    // Fixed registry order; Adam state and checkpoints index by it.
    std::vector<Param*> all() {
        std::vector<Param*> out;
        for (auto& layer : gat_layers)
            for (auto& head : layer.heads) {
                out.push_back(&head.W);
                out.push_back(&head.a);
            }
        out.push_back(&mlp.W1);
        out.push_back(&mlp.b1);
        out.push_back(&mlp.W2);
        out.push_back(&mlp.b2);
        out.push_back(&membership.centers);
        out.push_back(&membership.log_widths);
        out.push_back(&rules.rule_weights);
        out.push_back(&fusion.W_r);
        out.push_back(&fusion.gate_w);
        out.push_back(&fusion.gate_b);
        out.push_back(&classifier.W_c);
        out.push_back(&classifier.bias);
        return out;
    }
};

inline ModelParams init_params(int feature_dim, int num_classes, const TrainConfig& cfg,
                               std::mt19937_64& rng) {
    ModelParams p;
    p.gat_layers = make_gat_stack(feature_dim, cfg.gat_layers, cfg.gat_heads, cfg.gat_hidden, rng);
    int d = cfg.gat_layers > 0 ? p.gat_layers.back().d_out() : feature_dim;
    int mlp_hidden = cfg.gat_heads * cfg.gat_hidden;
    p.mlp.W1 = Param("mlp.W1", random_normal(feature_dim, mlp_hidden, rng,
                                             std::sqrt(2.0 / (feature_dim + mlp_hidden))));
    p.mlp.b1 = Param("mlp.b1", Array2::zeros(1, mlp_hidden));
    p.mlp.W2 = Param("mlp.W2", random_normal(mlp_hidden, d, rng, std::sqrt(2.0 / (mlp_hidden + d))));
    p.mlp.b2 = Param("mlp.b2", Array2::zeros(1, d));
    p.membership = default_membership_params();
    p.rules = full_rule_grid();
    int K = p.rules.rule_count();
    p.fusion.W_r = Param("fusion.W_r", random_normal(K, d, rng, std::sqrt(2.0 / (K + d))));
    p.fusion.gate_w = Param("fusion.gate_w", random_normal(K, 1, rng, 0.1));
    p.fusion.gate_b = Param("fusion.gate_b", Array2::zeros(1, 1));
    p.classifier.W_c = Param("classifier.W_c",
                             random_normal(d, num_classes, rng, std::sqrt(2.0 / (d + num_classes))));
    p.classifier.bias = Param("classifier.bias", Array2::zeros(1, num_classes));
    return p;
}

struct ForwardResult {
    ValueId logits = -1;
    std::vector<AttentionRecord> attention;
    RuleActivation rule_activation;  // empty under no_fuzzy
    bool has_rules = false;
};

// Full forward pass on the tape. Ablations: no_graph swaps the GAT stack for
// a 2-layer MLP on raw features (and the caller passes the empty graph, so
// topo is the neutral triple); no_attention forces uniform alpha; no_fuzzy
// skips fusion entirely, leaving h'_u = h_u.
inline ForwardResult model_forward(Tape& tape, const FeatureTable& table, const SampleGraph& g,
                                   const Array2& topo, ModelParams& params,
                                   const TrainConfig& cfg) {
    ForwardResult out;
    ValueId h;
    if (cfg.ablation == Ablation::NoGraph) {
        ValueId x = tape.leaf(table.features);
        ValueId h1 = tape.elu(tape.add(tape.matmul(x, tape.param(params.mlp.W1)),
                                       tape.param(params.mlp.b1)));
        h = tape.add(tape.matmul(h1, tape.param(params.mlp.W2)), tape.param(params.mlp.b2));
    } else {
        ValueId h0 = tape.leaf(table.features);
        auto [hid, records] = stack_layers(tape, h0, g, params.gat_layers,
                                           cfg.ablation == Ablation::NoAttention);
        h = hid;
        out.attention = std::move(records);
    }

    ValueId fused = h;
    if (cfg.ablation != Ablation::NoFuzzy) {
        FuzzyForward ff = rule_fire_taped(tape, topo, params.rules, params.membership);
        out.rule_activation = extract_activation(tape, ff);
        out.has_rules = true;
        int d = tape.value(h).cols;
        switch (cfg.fusion_mode) {
            case FusionMode::Additive:
                fused = tape.add(h, tape.matmul(ff.weighted, tape.param(params.fusion.W_r)));
                break;
            case FusionMode::Gated: {
                ValueId gate = tape.sigmoid(
                    tape.add(tape.matmul(ff.weighted, tape.param(params.fusion.gate_w)),
                             tape.param(params.fusion.gate_b)));
                ValueId proj = tape.matmul(ff.weighted, tape.param(params.fusion.W_r));
                fused = tape.add(h, tape.mul(proj, gate));
                break;
            }
            case FusionMode::ScalarBroadcast: {
                ValueId s = tape.matmul(ff.weighted,
                                        tape.leaf(Array2::ones(tape.value(ff.weighted).cols, 1)));
                fused = tape.add(h, tape.matmul(s, tape.leaf(Array2::ones(1, d))));
                break;
            }
        }
    }
    out.logits = tape.add(tape.matmul(fused, tape.param(params.classifier.W_c)),
                          tape.param(params.classifier.bias));
    return out;
}

// Inverse-frequency class weights over the train split, normalized to mean 1
// across classes; all-ones under ClassWeighting::None.
inline std::vector<double> class_weights(const std::vector<int>& labels,
                                         const std::vector<bool>& train_mask, int num_classes,
                                         ClassWeighting mode) {
    std::vector<double> w(num_classes, 1.0);
    if (mode == ClassWeighting::None) return w;
    std::vector<long long> counts(num_classes, 0);
    for (size_t i = 0; i < labels.size(); ++i)
        if (train_mask[i]) ++counts[labels[i]];
    double inv_sum = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        if (counts[c] == 0)
            throw ConfigError("class " + std::to_string(c) + " absent from the train split");
        w[c] = 1.0 / static_cast<double>(counts[c]);
        inv_sum += w[c];
    }
    for (int c = 0; c < num_classes; ++c) w[c] *= static_cast<double>(num_classes) / inv_sum;
    return w;
}

// Mean over train nodes of the class-weighted negative log-softmax of the
// true class. The stabilizing row-max shift enters as a constant, which
// leaves the gradient exact.
inline ValueId nll_loss(Tape& tape, ValueId logits, const std::vector<int>& labels,
                        const std::vector<bool>& train_mask, const std::vector<double>& weights) {
    const Array2& lg = tape.value(logits);
    int n = lg.rows, c = lg.cols;
    long long train_n = 0;
    for (bool b : train_mask)
        if (b) ++train_n;
    if (train_n == 0) throw ConfigError("loss: empty train mask");

    Array2 neg_max(n, 1);
    for (int i = 0; i < n; ++i) {
        double m = lg.at(i, 0);
        for (int j = 1; j < c; ++j) m = std::max(m, lg.at(i, j));
        neg_max.at(i, 0) = -m;
    }
    Array2 onehot(n, c);
    Array2 node_weight(n, 1);
    for (int i = 0; i < n; ++i) {
        onehot.at(i, labels[i]) = 1.0;
        node_weight.at(i, 0) = train_mask[i] ? weights[labels[i]] : 0.0;
    }

    ValueId shifted = tape.add(logits, tape.leaf(std::move(neg_max)));
    ValueId ones_c = tape.leaf(Array2::ones(c, 1));
    ValueId log_z = tape.log(tape.matmul(tape.exp(shifted), ones_c));
    ValueId picked = tape.matmul(tape.mul(shifted, tape.leaf(std::move(onehot))), ones_c);
    ValueId nll = tape.add(log_z, tape.scalar_scale(picked, -1.0));
    ValueId weighted = tape.mul(nll, tape.leaf(std::move(node_weight)));
    ValueId total = tape.matmul(tape.leaf(Array2::ones(1, n)), weighted);
    return tape.scalar_scale(total, 1.0 / static_cast<double>(train_n));
}

// Row-stable softmax of raw logits; ties at argmax break to the lowest index.
struct Prediction {
    Array2 probabilities;  // N x C, rows sum to 1
    std::vector<int> argmax;
};

inline Prediction softmax_predict(const Array2& logits) {
    Prediction p;
    p.probabilities = Array2(logits.rows, logits.cols);
    p.argmax.resize(logits.rows);
    for (int i = 0; i < logits.rows; ++i) {
        double m = logits.at(i, 0);
        for (int j = 1; j < logits.cols; ++j) m = std::max(m, logits.at(i, j));
        double s = 0.0;
        for (int j = 0; j < logits.cols; ++j) {
            double e = std::exp(logits.at(i, j) - m);
            p.probabilities.at(i, j) = e;
            s += e;
        }
        int best = 0;
        for (int j = 0; j < logits.cols; ++j) {
            p.probabilities.at(i, j) /= s;
            if (p.probabilities.at(i, j) > p.probabilities.at(i, best)) best = j;
        }
        p.argmax[i] = best;
    }
    return p;
}

struct EpochStats {
    int epoch = 0;
    double loss = 0.0;
    double val_balanced_accuracy = 0.0;
};

struct Checkpoint {
    TrainConfig config;
    int num_classes = 0;
    int feature_dim = 0;
    int best_epoch = 0;
    // graph fingerprint
    int n = 0;
    long long edges = 0;
    double tau = 0.0;
    std::map<std::string, Array2> params;
    std::vector<EpochStats> history;
};

namespace detail {

inline Checkpoint snapshot(const TrainConfig& cfg, const FeatureTable& table,
                           const SampleGraph& g, ModelParams& params) {
    Checkpoint ck;
    ck.config = cfg;
    ck.num_classes = table.num_classes;
    ck.feature_dim = table.dim();
    ck.n = g.n;
    ck.edges = g.edge_count();
    ck.tau = g.tau;
    for (Param* p : params.all()) ck.params[p->name] = p->value;
    return ck;
}

// Adam with bias correction; weight decay enters as a plain L2 term.
struct AdamState {
    double lr, beta1 = 0.9, beta2 = 0.999, eps = 1e-8, weight_decay;
    long long t = 0;
    std::vector<Array2> m, v;

    AdamState(const std::vector<Param*>& params, double lr_, double wd)
        : lr(lr_), weight_decay(wd) {
        for (Param* p : params) {
            m.push_back(Array2::zeros(p->value.rows, p->value.cols));
            v.push_back(Array2::zeros(p->value.rows, p->value.cols));
        }
    }

    void step(const std::vector<Param*>& params) {
        ++t;
        double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (size_t i = 0; i < params.size(); ++i) {
            Param* p = params[i];
            for (size_t k = 0; k < p->value.size(); ++k) {
                double g = p->grad.data[k] + weight_decay * p->value.data[k];
                m[i].data[k] = beta1 * m[i].data[k] + (1.0 - beta1) * g;
                v[i].data[k] = beta2 * v[i].data[k] + (1.0 - beta2) * g * g;
                double mhat = m[i].data[k] / bc1;
                double vhat = v[i].data[k] / bc2;
                p->value.data[k] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

}  // namespace detail

struct TrainResult {
    Checkpoint best;
    Checkpoint final;
    std::vector<EpochStats> history;
};

inline SampleGraph graph_for(const FeatureTable& table, const TrainConfig& cfg) {
    return cfg.ablation == Ablation::NoGraph ? empty_graph(table.n(), cfg.tau)
                                             : build_graph(table, cfg.tau);
}

// Full-batch transductive training: graph and topo are computed once, every
// epoch runs one taped forward/backward and an Adam step, then validates.
// Best checkpoint = highest val balanced accuracy (earliest epoch on ties).
inline TrainResult train(const FeatureTable& table, const TrainConfig& cfg) {
    cfg.validate();
    SampleGraph g = graph_for(table, cfg);
    std::vector<bool> train_mask = table.train_mask();
    std::vector<bool> val_mask = table.mask(Split::Val);
    Array2 topo = topo_matrix(topo_features(g, table.labels, train_mask));

    std::mt19937_64 rng(cfg.seed);
    ModelParams params = init_params(table.dim(), table.num_classes, cfg, rng);
    std::vector<Param*> registry = params.all();
    std::vector<double> weights =
        class_weights(table.labels, train_mask, table.num_classes, cfg.class_weighting);
    detail::AdamState adam(registry, cfg.learning_rate, cfg.weight_decay);

    std::vector<int> val_idx;
    for (int i = 0; i < table.n(); ++i)
        if (val_mask[i]) val_idx.push_back(i);

    TrainResult result;
    double best_val = -1.0;
    int best_epoch = 0;
    int since_best = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        double loss_value;
        double val_ba = 0.0;
        try {
            Tape tape;
            ForwardResult fwd = model_forward(tape, table, g, topo, params, cfg);
            ValueId loss = nll_loss(tape, fwd.logits, table.labels, train_mask, weights);
            loss_value = tape.value(loss).at(0, 0);
            for (Param* p : registry) p->zero_grad();
            tape.backward(loss);
            adam.step(registry);

            Tape eval_tape;
            ForwardResult eval_fwd = model_forward(eval_tape, table, g, topo, params, cfg);
            Prediction pred = softmax_predict(eval_tape.value(eval_fwd.logits));
            if (!val_idx.empty()) {
                std::vector<int> vp, vl;
                for (int i : val_idx) {
                    vp.push_back(pred.argmax[i]);
                    vl.push_back(table.labels[i]);
                }
                val_ba = balanced_accuracy(vp, vl, table.num_classes);
            }
        } catch (const NumericError& e) {
            throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " +
                               e.what());
        }

        result.history.push_back({epoch, loss_value, val_ba});
        if (val_ba > best_val) {
            best_val = val_ba;
            best_epoch = epoch;
            since_best = 0;
            result.best = detail::snapshot(cfg, table, g, params);
            result.best.best_epoch = epoch;
        } else {
            ++since_best;
            if (cfg.early_stop_patience > 0 && since_best >= cfg.early_stop_patience) break;
        }
    }
    result.final = detail::snapshot(cfg, table, g, params);
    result.final.best_epoch = best_epoch;
    result.best.history = result.history;
    result.final.history = result.history;
    return result;
}

// Rebuilds a ModelParams skeleton from checkpoint config and loads the saved
// arrays into it by name.
inline ModelParams params_from_checkpoint(const Checkpoint& ck) {
    std::mt19937_64 rng(ck.config.seed);
    ModelParams params = init_params(ck.feature_dim, ck.num_classes, ck.config, rng);
    for (Param* p : params.all()) {
        auto it = ck.params.find(p->name);
        if (it == ck.params.end())
            throw ParseError("checkpoint missing parameter " + p->name);
        if (it->second.rows != p->value.rows || it->second.cols != p->value.cols)
            throw ParseError("checkpoint parameter " + p->name + " has shape " +
                             it->second.shape_str() + ", expected " + p->value.shape_str());
        p->value = it->second;
    }
    return params;
}

struct PredictOutput {
    Prediction prediction;
    std::vector<AttentionRecord> attention;
    RuleActivation rule_activation;
    bool has_rules = false;
    Array2 topo;
};

// Deterministic inference from a checkpoint; the table-derived graph must
// match the stored fingerprint.
inline PredictOutput predict(const Checkpoint& ck, const FeatureTable& table) {
    if (table.n() != ck.n)
        throw ConfigError("fingerprint mismatch: table has " + std::to_string(table.n()) +
                          " nodes, checkpoint expects " + std::to_string(ck.n));
    if (table.dim() != ck.feature_dim)
        throw ConfigError("fingerprint mismatch: feature dim " + std::to_string(table.dim()) +
                          " vs checkpoint " + std::to_string(ck.feature_dim));
    SampleGraph g = graph_for(table, ck.config);
    if (g.edge_count() != ck.edges || g.tau != ck.tau)
        throw ConfigError("fingerprint mismatch: graph at tau=" + fmt_g17(ck.tau) + " has " +
                          std::to_string(g.edge_count()) + " edges, checkpoint expects " +
                          std::to_string(ck.edges));
    ModelParams params = params_from_checkpoint(ck);
    PredictOutput out;
    out.topo = topo_matrix(topo_features(g, table.labels, table.train_mask()));
    Tape tape;
    ForwardResult fwd = model_forward(tape, table, g, out.topo, params, ck.config);
    out.prediction = softmax_predict(tape.value(fwd.logits));
    out.attention = std::move(fwd.attention);
    out.rule_activation = std::move(fwd.rule_activation);
    out.has_rules = fwd.has_rules;
    return out;
}

// --- checkpoint serialization (full-precision structured text) ---

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path);
    out << "gafr-checkpoint v1\n";
    out << "[config]\n";
    out << "ablation = " << ablation_name(ck.config.ablation) << "\n";
    out << "fusion_mode = " << fusion_mode_name(ck.config.fusion_mode) << "\n";
    out << "learning_rate = " << fmt_g17(ck.config.learning_rate) << "\n";
    out << "epochs = " << ck.config.epochs << "\n";
    out << "seed = " << ck.config.seed << "\n";
    out << "tau = " << fmt_g17(ck.config.tau) << "\n";
    out << "weight_decay = " << fmt_g17(ck.config.weight_decay) << "\n";
    out << "class_weighting = " << class_weighting_name(ck.config.class_weighting) << "\n";
    out << "early_stop_patience = " << ck.config.early_stop_patience << "\n";
    out << "gat_layers = " << ck.config.gat_layers << "\n";
    out << "gat_heads = " << ck.config.gat_heads << "\n";
    out << "gat_hidden = " << ck.config.gat_hidden << "\n";
    out << "num_classes = " << ck.num_classes << "\n";
    out << "feature_dim = " << ck.feature_dim << "\n";
    out << "best_epoch = " << ck.best_epoch << "\n";
    out << "[fingerprint]\n";
    out << "n = " << ck.n << "\n";
    out << "edges = " << ck.edges << "\n";
    out << "tau = " << fmt_g17(ck.tau) << "\n";
    out << "[history]\n";
    out << "epoch loss val_balanced_accuracy\n";
    for (const auto& h : ck.history)
        out << h.epoch << ' ' << fmt_g17(h.loss) << ' ' << fmt_g17(h.val_balanced_accuracy) << "\n";
    out << "[params " << ck.params.size() << "]\n";
    for (const auto& [name, value] : ck.params) {
        out << "param " << name << ' ' << value.rows << ' ' << value.cols << "\n";
        for (int i = 0; i < value.rows; ++i) {
            for (int j = 0; j < value.cols; ++j) out << (j ? " " : "") << fmt_g17(value.at(i, j));
            out << "\n";
        }
    }
    out << "end\n";
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    auto next = [&](const char* what) {
        if (!std::getline(in, line)) throw ParseError(path + ": truncated checkpoint, expected " + what);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next("header") != "gafr-checkpoint v1") throw ParseError(path + ": not a gafr checkpoint");
    if (next("[config]") != "[config]") throw ParseError(path + ": missing [config]");

    Checkpoint ck;
    std::map<std::string, std::string> kv;
    while (next("config entry") != "[fingerprint]") {
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(path + ": bad config line '" + line + "'");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto need = [&](const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) throw ParseError(path + ": config missing " + key);
        return it->second;
    };
    ck.config.ablation = parse_ablation(need("ablation"));
    ck.config.fusion_mode = parse_fusion_mode(need("fusion_mode"));
    ck.config.learning_rate = std::stod(need("learning_rate"));
    ck.config.epochs = std::stoi(need("epochs"));
    ck.config.seed = std::stoull(need("seed"));
    ck.config.tau = std::stod(need("tau"));
    ck.config.weight_decay = std::stod(need("weight_decay"));
    ck.config.class_weighting = parse_class_weighting(need("class_weighting"));
    ck.config.early_stop_patience = std::stoi(need("early_stop_patience"));
    ck.config.gat_layers = std::stoi(need("gat_layers"));
    ck.config.gat_heads = std::stoi(need("gat_heads"));
    ck.config.gat_hidden = std::stoi(need("gat_hidden"));
    ck.num_classes = std::stoi(need("num_classes"));
    ck.feature_dim = std::stoi(need("feature_dim"));
    ck.best_epoch = std::stoi(need("best_epoch"));

    while (true) {
        next("fingerprint entry");
        if (line == "[history]") break;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(path + ": bad fingerprint line '" + line + "'");
        std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (key == "n") ck.n = std::stoi(val);
        else if (key == "edges") ck.edges = std::stoll(val);
        else if (key == "tau") ck.tau = std::stod(val);
    }
    next("history header");
    while (true) {
        next("history row");
        if (line.rfind("[params", 0) == 0) break;
        std::istringstream is(line);
        EpochStats e;
        if (!(is >> e.epoch >> e.loss >> e.val_balanced_accuracy))
            throw ParseError(path + ": bad history row '" + line + "'");
        ck.history.push_back(e);
    }
    while (true) {
        next("param block");
        if (line == "end") break;
        std::istringstream is(line);
        std::string tag, name;
        int rows, cols;
        if (!(is >> tag >> name >> rows >> cols) || tag != "param")
            throw ParseError(path + ": bad param header '" + line + "'");
        Array2 value(rows, cols);
        for (int i = 0; i < rows; ++i) {
            next("param row");
            std::istringstream row(line);
            for (int j = 0; j < cols; ++j)
                if (!(row >> value.at(i, j)))
                    throw ParseError(path + ": bad value row for " + name);
        }
        ck.params[name] = std::move(value);
    }
    return ck;
}

}  // namespace gafr
