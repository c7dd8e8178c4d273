#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gafr/dataio.hpp"
#include "gafr/errors.hpp"
#include "gafr/fuzzy.hpp"
#include "gafr/metrics.hpp"
#include "gafr/model.hpp"
#include "gafr/simgraph.hpp"
#include "gafr/text.hpp"
#include "gafr/topo.hpp"

namespace gafr {

inline constexpr std::array<const char*, 6> kMetricNames = {
    "auc_roc", "balanced_accuracy", "f1", "kappa", "sensitivity", "specificity"};

using MetricVector = std::array<double, 6>;

inline MetricVector metric_vector(const EvalReport& r) {
    return {r.auc_roc, r.balanced_accuracy, r.f1, r.kappa, r.sensitivity, r.specificity};
}

// Experiment-level options shared by the commands: which seeds to repeat
// over (the paper protocol repeats four times) and where outputs go.
struct RunConfig {
    TrainConfig train;
    std::vector<uint64_t> seeds = {0, 1, 2, 3};
    std::string out_dir;
    int top_k = 3;

    void validate() const {
        if (seeds.empty()) throw ConfigError("seed list must be nonempty");
        train.validate();
    }
};

inline std::string timestamp_line() {
    std::time_t now = std::time(nullptr);
    char buf[64];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return std::string("# generated ") + buf + "\n";
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path);
    out << content;
}

// Test-split evaluation of a checkpoint via predict().
inline EvalReport eval_checkpoint(const Checkpoint& ck, const FeatureTable& table,
                                  Split split = Split::Test) {
    PredictOutput out = predict(ck, table);
    std::vector<int> idx;
    for (int i = 0; i < table.n(); ++i)
        if (table.splits[i] == split) idx.push_back(i);
    if (idx.empty()) throw ConfigError(std::string("no samples in the ") + split_name(split) + " split");
    Array2 scores(static_cast<int>(idx.size()), table.num_classes);
    std::vector<int> pred, labels;
    for (size_t k = 0; k < idx.size(); ++k) {
        for (int c = 0; c < table.num_classes; ++c)
            scores.at(static_cast<int>(k), c) = out.prediction.probabilities.at(idx[k], c);
        pred.push_back(out.prediction.argmax[idx[k]]);
        labels.push_back(table.labels[idx[k]]);
    }
    return evaluate(scores, pred, labels, table.num_classes);
}

// ---------------------------------------------------------------- synth ---

struct SynthSummary {
    FeatureTable table;
    std::vector<int> per_class_counts;
    std::vector<double> priors;
    std::string report;
};

// Writes a dataio-schema CSV and summarizes per-class counts and a priori
// proportions.
inline SynthSummary cmd_synth(const SynthSpec& spec, const std::string& out_path) {
    SynthSummary s;
    s.table = make_synthetic(spec);
    if (!out_path.empty()) {
        std::filesystem::path p(out_path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        save_table(s.table, out_path);
    }
    s.per_class_counts.assign(s.table.num_classes, 0);
    for (int lab : s.table.labels) ++s.per_class_counts[lab];
    std::ostringstream os;
    os << "synthetic dataset: n=" << s.table.n() << " dim=" << s.table.dim()
       << " classes=" << s.table.num_classes << " seed=" << spec.seed << "\n";
    os << "class count a_priori(%)\n";
    for (int c = 0; c < s.table.num_classes; ++c) {
        double prior = 100.0 * s.per_class_counts[c] / static_cast<double>(s.table.n());
        s.priors.push_back(prior);
        os << c << " " << s.per_class_counts[c] << " " << fmt_fixed(prior, 2) << "\n";
    }
    s.report = os.str();
    return s;
}

// ---------------------------------------------------------------- train ---

struct SeedOutcome {
    uint64_t seed = 0;
    MetricVector metrics{};
    int best_epoch = 0;
    double final_loss = 0.0;
    Checkpoint best;
    Checkpoint final;
};

struct TrainSummary {
    std::vector<SeedOutcome> runs;
    std::array<MeanStd, 6> aggregate{};
    GraphStats graph;
    std::string report;  // human-readable, first line is the timestamp
    std::string tsv;     // machine-readable, no timestamp
};

namespace detail {

inline std::array<MeanStd, 6> aggregate_metrics(const std::vector<SeedOutcome>& runs) {
    std::array<MeanStd, 6> out{};
    for (int m = 0; m < 6; ++m) {
        std::vector<double> xs;
        for (const auto& r : runs) xs.push_back(r.metrics[m]);
        out[m] = gafr::aggregate(xs);
    }
    return out;
}

inline std::string metrics_tsv(const std::vector<SeedOutcome>& runs,
                               const std::array<MeanStd, 6>& agg) {
    std::ostringstream os;
    os << "seed";
    for (const char* name : kMetricNames) os << '\t' << name;
    os << "\n";
    for (const auto& r : runs) {
        os << r.seed;
        for (int m = 0; m < 6; ++m) os << '\t' << fmt_g17(r.metrics[m]);
        os << "\n";
    }
    os << "mean";
    for (int m = 0; m < 6; ++m) os << '\t' << fmt_g17(agg[m].mean);
    os << "\nstd";
    for (int m = 0; m < 6; ++m) os << '\t' << fmt_g17(agg[m].std);
    os << "\n";
    return os.str();
}

inline void append_mean_std_table(std::ostringstream& os, const std::vector<SeedOutcome>& runs,
                                  const std::array<MeanStd, 6>& agg) {
    os << "seed";
    for (const char* name : kMetricNames) os << ' ' << name;
    os << "\n";
    for (const auto& r : runs) {
        os << r.seed;
        for (int m = 0; m < 6; ++m) os << ' ' << fmt_fixed(r.metrics[m], 4);
        os << "\n";
    }
    os << "mean+-std";
    for (int m = 0; m < 6; ++m)
        os << ' ' << fmt_fixed(agg[m].mean, 4) << "+-" << fmt_fixed(agg[m].std, 4);
    os << "\n";
}

}  // namespace detail

// Trains once per seed, evaluates each best-validation checkpoint on the
// test split, and aggregates mean +- population std across seeds. When
// out_dir is set, writes per-seed checkpoints and both report flavors.
inline TrainSummary cmd_train(const FeatureTable& table, const RunConfig& rc) {
    rc.validate();
    TrainSummary s;
    s.graph = graph_stats(graph_for(table, rc.train));
    for (uint64_t seed : rc.seeds) {
        TrainConfig cfg = rc.train;
        cfg.seed = seed;
        TrainResult tr = train(table, cfg);
        SeedOutcome run;
        run.seed = seed;
        run.best = std::move(tr.best);
        run.final = std::move(tr.final);
        run.best_epoch = run.best.best_epoch;
        run.final_loss = tr.history.back().loss;
        run.metrics = metric_vector(eval_checkpoint(run.best, table));
        s.runs.push_back(std::move(run));
    }
    s.aggregate = detail::aggregate_metrics(s.runs);
    s.tsv = detail::metrics_tsv(s.runs, s.aggregate);

    std::ostringstream os;
    os << timestamp_line();
    os << "model: " << ablation_label(rc.train.ablation) << "\n";
    os << "config: tau=" << fmt_g17(rc.train.tau) << " epochs=" << rc.train.epochs
       << " lr=" << fmt_g17(rc.train.learning_rate) << " fusion=" << fusion_mode_name(rc.train.fusion_mode)
       << " layers=" << rc.train.gat_layers << " heads=" << rc.train.gat_heads
       << " hidden=" << rc.train.gat_hidden << "\n";
    os << "graph: n=" << table.n() << " edges=" << s.graph.edges << " density="
       << fmt_fixed(s.graph.density, 6) << " isolated=" << s.graph.isolated_count << "\n";
    os << "test metrics per seed\n";
    detail::append_mean_std_table(os, s.runs, s.aggregate);
    s.report = os.str();

    if (!rc.out_dir.empty()) {
        std::filesystem::create_directories(rc.out_dir);
        for (const auto& run : s.runs) {
            save_checkpoint(run.best, rc.out_dir + "/checkpoint_seed" + std::to_string(run.seed) + ".txt");
            save_checkpoint(run.final,
                            rc.out_dir + "/checkpoint_seed" + std::to_string(run.seed) + "_final.txt");
        }
        write_text_file(rc.out_dir + "/train_report.txt", s.report);
        write_text_file(rc.out_dir + "/train_metrics.tsv", s.tsv);
    }
    return s;
}

// ----------------------------------------------------------------- eval ---

struct EvalSummary {
    EvalReport report;
    std::string text;
};

inline EvalSummary cmd_eval(const Checkpoint& ck, const FeatureTable& table) {
    EvalSummary s;
    s.report = eval_checkpoint(ck, table);
    std::ostringstream os;
    os << timestamp_line();
    os << "model: " << ablation_label(ck.config.ablation) << " (seed " << ck.config.seed
       << ", best epoch " << ck.best_epoch << ")\n";
    MetricVector mv = metric_vector(s.report);
    for (int m = 0; m < 6; ++m) os << kMetricNames[m] << " = " << fmt_g17(mv[m]) << "\n";
    os << "confusion (rows=label, cols=pred)\n";
    for (const auto& row : s.report.confusion) {
        for (size_t j = 0; j < row.size(); ++j) os << (j ? " " : "") << row[j];
        os << "\n";
    }
    for (const auto& w : s.report.warnings) os << "warning: " << w << "\n";
    s.text = os.str();
    return s;
}

// ------------------------------------------------------------ sweep-tau ---

inline const std::vector<double>& default_tau_grid() {
    static const std::vector<double> grid = {0.0, 0.25, 0.5, 0.65, 0.75, 0.85, 0.95};
    return grid;
}

struct SweepRow {
    double tau = 0.0;
    long long edges = 0;
    double density = 0.0;
    int isolated = 0;
    std::array<MeanStd, 6> metrics{};
};

struct SweepSummary {
    std::vector<SweepRow> rows;
    std::string report;
    std::string tsv;
};

// Trains the full config at every tau in the grid and tabulates graph
// structure against test metrics; the plot-ready table behind the
// tau-sensitivity analysis.
inline SweepSummary cmd_sweep_tau(const FeatureTable& table, const RunConfig& rc,
                                  std::vector<double> grid = {}) {
    rc.validate();
    if (grid.empty()) grid = default_tau_grid();
    SweepSummary s;
    for (double tau : grid) {
        RunConfig point = rc;
        point.train.tau = tau;
        point.out_dir.clear();
        TrainSummary ts = cmd_train(table, point);
        SweepRow row;
        row.tau = tau;
        row.edges = ts.graph.edges;
        row.density = ts.graph.density;
        row.isolated = ts.graph.isolated_count;
        row.metrics = ts.aggregate;
        s.rows.push_back(row);
    }
    std::ostringstream tsv;
    tsv << "tau\tedges\tdensity\tisolated";
    for (const char* name : kMetricNames) tsv << '\t' << name << "_mean\t" << name << "_std";
    tsv << "\n";
    for (const auto& r : s.rows) {
        tsv << fmt_g17(r.tau) << '\t' << r.edges << '\t' << fmt_g17(r.density) << '\t' << r.isolated;
        for (int m = 0; m < 6; ++m)
            tsv << '\t' << fmt_g17(r.metrics[m].mean) << '\t' << fmt_g17(r.metrics[m].std);
        tsv << "\n";
    }
    s.tsv = tsv.str();

    std::ostringstream os;
    os << timestamp_line();
    os << "tau sweep over " << s.rows.size() << " thresholds, seeds=" << rc.seeds.size() << "\n";
    os << "tau edges density isolated auc_roc balanced_accuracy\n";
    for (const auto& r : s.rows)
        os << fmt_g17(r.tau) << ' ' << r.edges << ' ' << fmt_fixed(r.density, 6) << ' ' << r.isolated
           << ' ' << fmt_fixed(r.metrics[0].mean, 4) << "+-" << fmt_fixed(r.metrics[0].std, 4) << ' '
           << fmt_fixed(r.metrics[1].mean, 4) << "+-" << fmt_fixed(r.metrics[1].std, 4) << "\n";
    s.report = os.str();

    if (!rc.out_dir.empty()) {
        write_text_file(rc.out_dir + "/sweep_tau.tsv", s.tsv);
        write_text_file(rc.out_dir + "/sweep_tau_report.txt", s.report);
    }
    return s;
}

// --------------------------------------------------------------- ablate ---

struct AblateRow {
    Ablation ablation = Ablation::Full;
    std::string label;
    std::array<MeanStd, 6> metrics{};
};

struct AblateSummary {
    std::vector<AblateRow> rows;
    std::vector<TrainSummary> runs;  // aligned with rows
    std::string report;
    std::string tsv;
};

// The four-variant ablation table: full model plus w/o G, w/o A, w/o FR.
inline AblateSummary cmd_ablate(const FeatureTable& table, const RunConfig& rc) {
    rc.validate();
    static const Ablation variants[] = {Ablation::Full, Ablation::NoGraph, Ablation::NoAttention,
                                        Ablation::NoFuzzy};
    AblateSummary s;
    for (Ablation a : variants) {
        RunConfig variant = rc;
        variant.train.ablation = a;
        variant.out_dir.clear();
        TrainSummary ts = cmd_train(table, variant);
        AblateRow row;
        row.ablation = a;
        row.label = ablation_label(a);
        row.metrics = ts.aggregate;
        s.rows.push_back(row);
        s.runs.push_back(std::move(ts));
    }
    std::ostringstream tsv;
    tsv << "variant";
    for (const char* name : kMetricNames) tsv << '\t' << name << "_mean\t" << name << "_std";
    tsv << "\n";
    for (const auto& r : s.rows) {
        tsv << r.label;
        for (int m = 0; m < 6; ++m)
            tsv << '\t' << fmt_g17(r.metrics[m].mean) << '\t' << fmt_g17(r.metrics[m].std);
        tsv << "\n";
    }
    s.tsv = tsv.str();

    std::ostringstream os;
    os << timestamp_line();
    os << "ablation study, seeds=" << rc.seeds.size() << "\n";
    os << "variant";
    for (const char* name : kMetricNames) os << ' ' << name;
    os << "\n";
    for (const auto& r : s.rows) {
        os << r.label;
        for (int m = 0; m < 6; ++m)
            os << ' ' << fmt_fixed(r.metrics[m].mean, 4) << "+-" << fmt_fixed(r.metrics[m].std, 4);
        os << "\n";
    }
    s.report = os.str();

    if (!rc.out_dir.empty()) {
        write_text_file(rc.out_dir + "/ablate.tsv", s.tsv);
        write_text_file(rc.out_dir + "/ablate_report.txt", s.report);
    }
    return s;
}

// -------------------------------------------------------------- explain ---

struct RuleHit {
    int rule_id = 0;
    double strength = 0.0;
    std::string text;
};

struct NodeExplanation {
    int node = 0;
    TopoVector topo;
    int predicted_class = 0;
    double probability = 0.0;
    std::vector<RuleHit> rules;                       // top_k by weighted strength
    std::vector<std::pair<int, double>> attention;    // top_k neighbors, mean over heads
};

struct ExplainSummary {
    std::vector<NodeExplanation> nodes;
    std::string report;
};

// Per-node diagnostic path: raw descriptors, strongest fired rules with
// their linguistic text, strongest attended neighbors (final layer, mean
// over heads) and the prediction itself.
inline ExplainSummary cmd_explain(const Checkpoint& ck, const FeatureTable& table,
                                  std::vector<int> node_ids, int top_k) {
    if (top_k < 1) throw ConfigError("--top-k must be >= 1");
    PredictOutput out = predict(ck, table);
    ModelParams params = params_from_checkpoint(ck);
    if (node_ids.empty()) {
        node_ids.resize(table.n());
        std::iota(node_ids.begin(), node_ids.end(), 0);
    }
    ExplainSummary s;
    std::ostringstream os;
    os << timestamp_line();
    for (int u : node_ids) {
        if (u < 0 || u >= table.n())
            throw ConfigError("node id " + std::to_string(u) + " out of range 0.." +
                              std::to_string(table.n() - 1));
        NodeExplanation ne;
        ne.node = u;
        ne.topo.clustering = out.topo.at(u, 0);
        ne.topo.degree_norm = out.topo.at(u, 1);
        ne.topo.label_agreement = out.topo.at(u, 2);
        ne.predicted_class = out.prediction.argmax[u];
        ne.probability = out.prediction.probabilities.at(u, ne.predicted_class);

        if (out.has_rules) {
            int K = params.rules.rule_count();
            std::vector<int> idx(K);
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
                return out.rule_activation.weighted.at(u, a) > out.rule_activation.weighted.at(u, b);
            });
            for (int t = 0; t < std::min(top_k, K); ++t) {
                RuleHit hit;
                hit.rule_id = idx[t];
                hit.strength = out.rule_activation.weighted.at(u, idx[t]);
                hit.text = params.rules.rule_text(idx[t]);
                ne.rules.push_back(std::move(hit));
            }
        }
        if (!out.attention.empty()) {
            auto coeffs = out.attention.back().node_coefficients(u);
            std::stable_sort(coeffs.begin(), coeffs.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
            if (static_cast<int>(coeffs.size()) > top_k) coeffs.resize(top_k);
            ne.attention = std::move(coeffs);
        }

        os << "node=" << u << " id=" << table.ids[u] << "\n";
        os << "  topo: clustering=" << fmt_g17(ne.topo.clustering)
           << " degree=" << fmt_g17(ne.topo.degree_norm)
           << " label_agreement=" << fmt_g17(ne.topo.label_agreement) << "\n";
        os << "  predicted class " << ne.predicted_class << " p=" << fmt_g17(ne.probability) << "\n";
        if (ne.rules.empty()) {
            os << "  rules: (fuzzy module disabled)\n";
        } else {
            for (const auto& r : ne.rules)
                os << "  rule " << r.rule_id << " strength=" << fmt_g17(r.strength) << " " << r.text
                   << "\n";
        }
        if (ne.attention.empty()) {
            os << "  attention: (graph module disabled)\n";
        } else {
            for (const auto& [v, c] : ne.attention)
                os << "  attends " << v << " alpha=" << fmt_g17(c) << "\n";
        }
        s.nodes.push_back(std::move(ne));
    }
    s.report = os.str();
    return s;
}

// ------------------------------------------------------------ gradcheck ---

struct GradcheckSummary {
    GradcheckReport report;
    bool pass = false;
    std::string text;
};

// Full-model finite-difference validation on a small synthetic instance.
// The default step balances truncation against roundoff: rule activations
// can have ~1e-13 gradients where the FD quotient is pure noise below
// ~1e-4, while kinked activations punish steps above ~1e-3. sabotage
// perturbs one analytic gradient, a negative control that must turn the
// run red.
inline GradcheckSummary cmd_gradcheck(const TrainConfig& base, int nodes = 12, int dim = 5,
                                      int probe_count = 8, double step = 3e-4,
                                      double tolerance = 1e-4, bool sabotage = false) {
    TrainConfig cfg = base;
    cfg.validate();
    SynthSpec spec;
    spec.num_classes = 2;
    spec.samples_per_class = {(nodes + 1) / 2, nodes / 2};
    spec.dim = dim;
    spec.cluster_spread = 0.8;
    spec.cross_class_overlap = 0.1;
    spec.seed = cfg.seed;
    FeatureTable table = make_synthetic(spec);

    SampleGraph g = graph_for(table, cfg);
    std::vector<bool> train_mask = table.train_mask();
    Array2 topo = topo_matrix(topo_features(g, table.labels, train_mask));
    std::mt19937_64 rng(cfg.seed);
    ModelParams params = init_params(table.dim(), table.num_classes, cfg, rng);
    std::vector<Param*> registry = params.all();
    std::vector<double> weights =
        class_weights(table.labels, train_mask, table.num_classes, cfg.class_weighting);

    auto loss_fn = [&](bool with_grad) {
        Tape tape;
        ForwardResult fwd = model_forward(tape, table, g, topo, params, cfg);
        ValueId loss = nll_loss(tape, fwd.logits, table.labels, train_mask, weights);
        if (with_grad) {
            tape.backward(loss);
            if (sabotage && !registry.empty())
                for (double& v : registry.front()->grad.data) v += 1.0;
        }
        return tape.value(loss).at(0, 0);
    };

    GradcheckSummary s;
    s.report = gradcheck(loss_fn, registry, probe_count, step, tolerance, cfg.seed);
    s.pass = s.report.all_pass();
    std::ostringstream os;
    os << "gradcheck: " << nodes << " nodes, ablation=" << ablation_name(cfg.ablation)
       << ", fusion=" << fusion_mode_name(cfg.fusion_mode) << ", tolerance=" << fmt_g17(tolerance)
       << "\n";
    for (const auto& e : s.report.entries)
        os << (e.pass ? "  [pass] " : "  [FAIL] ") << e.param
           << " max_rel_err=" << fmt_g17(e.max_rel_err) << "\n";
    os << (s.pass ? "gradcheck PASSED" : "gradcheck FAILED") << "\n";
    s.text = os.str();
    return s;
}

}  // namespace gafr
