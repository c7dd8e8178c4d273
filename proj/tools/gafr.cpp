// Command-line harness for the GAFR-Net pipeline: dataset synthesis,
// training/evaluation, tau sweeps, ablations, rule/attention explanations
// and the full-model gradient check.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gafr/harness.hpp"

namespace {

struct CommonOpts {
    std::string data;
    std::string out;
    gafr::RunConfig rc;
    std::string ablation = "full";
    std::string fusion_mode = "additive";
    std::string class_weighting = "inverse-frequency";
    CLI::Option* fusion_opt = nullptr;
    CLI::Option* ablation_opt = nullptr;
};

void add_train_options(CLI::App* cmd, CommonOpts& o, bool needs_data = true) {
    auto* data = cmd->add_option("--data", o.data, "input CSV dataset");
    if (needs_data) data->required();
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--tau", o.rc.train.tau, "similarity threshold")->check(CLI::Range(-1.0, 1.0));
    cmd->add_option("--epochs", o.rc.train.epochs, "training epochs");
    cmd->add_option("--lr", o.rc.train.learning_rate, "learning rate");
    cmd->add_option("--seeds", o.rc.seeds, "seed list")->delimiter(',');
    o.ablation_opt = cmd->add_option("--ablation", o.ablation,
                                     "full|no_graph|no_attention|no_fuzzy");
    o.fusion_opt = cmd->add_option("--fusion-mode", o.fusion_mode,
                                   "additive|gated|scalar-broadcast");
    cmd->add_option("--heads", o.rc.train.gat_heads, "attention heads per layer");
    cmd->add_option("--layers", o.rc.train.gat_layers, "GAT layer count");
    cmd->add_option("--hidden", o.rc.train.gat_hidden, "per-head hidden width");
    cmd->add_option("--weight-decay", o.rc.train.weight_decay, "L2 coefficient");
    cmd->add_option("--class-weighting", o.class_weighting, "none|inverse-frequency");
    cmd->add_option("--patience", o.rc.train.early_stop_patience, "early stop patience (0=off)");
}

// Resolves string-valued flags and rejects conflicting combinations before
// any compute happens.
void finalize(CommonOpts& o) {
    o.rc.train.ablation = gafr::parse_ablation(o.ablation);
    o.rc.train.fusion_mode = gafr::parse_fusion_mode(o.fusion_mode);
    o.rc.train.class_weighting = gafr::parse_class_weighting(o.class_weighting);
    o.rc.out_dir = o.out;
    if (o.rc.train.ablation == gafr::Ablation::NoFuzzy && o.fusion_opt && o.fusion_opt->count() > 0)
        throw gafr::ConfigError("--fusion-mode conflicts with --ablation no_fuzzy (fusion is disabled)");
    o.rc.validate();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GAFR-Net: graph attention + fuzzy rule classification over feature tables"};
    app.require_subcommand(1);
    app.set_config("--config")->configurable(false);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset CSV");
    gafr::SynthSpec spec;
    std::string synth_out;
    synth->add_option("--classes", spec.num_classes, "number of classes");
    synth->add_option("--per-class", spec.samples_per_class, "samples per class (1 or per-class list)")
        ->delimiter(',');
    synth->add_option("--dim", spec.dim, "feature dimension");
    synth->add_option("--spread", spec.cluster_spread, "cluster standard deviation");
    synth->add_option("--overlap", spec.cross_class_overlap, "fraction resampled from wrong clusters");
    synth->add_option("--seed", spec.seed, "rng seed");
    synth->add_option("--out", synth_out, "output CSV path")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train across seeds and report test metrics");
    CommonOpts train_opts;
    add_train_options(train_cmd, train_opts);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    std::string eval_checkpoint_path;
    CommonOpts eval_opts;
    eval_cmd->add_option("checkpoint", eval_checkpoint_path, "checkpoint file")->required();
    eval_cmd->add_option("--data", eval_opts.data, "input CSV dataset")->required();

    // sweep-tau
    auto* sweep_cmd = app.add_subcommand("sweep-tau", "train at each tau in a grid");
    CommonOpts sweep_opts;
    std::vector<double> grid;
    add_train_options(sweep_cmd, sweep_opts);
    sweep_cmd->add_option("--grid", grid, "tau grid (default 0.0,0.25,0.5,0.65,0.75,0.85,0.95)")
        ->delimiter(',');

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "run the four-variant ablation table");
    CommonOpts ablate_opts;
    add_train_options(ablate_cmd, ablate_opts);

    // explain
    auto* explain_cmd = app.add_subcommand("explain", "per-node rule and attention report");
    std::string explain_checkpoint_path;
    CommonOpts explain_opts;
    std::vector<int> nodes;
    int top_k = 3;
    explain_cmd->add_option("checkpoint", explain_checkpoint_path, "checkpoint file")->required();
    explain_cmd->add_option("--data", explain_opts.data, "input CSV dataset")->required();
    explain_cmd->add_option("--nodes", nodes, "node ids (default: all)")->delimiter(',');
    explain_cmd->add_option("--top-k", top_k, "rules/neighbors per node");
    explain_cmd->add_option("--out", explain_opts.out, "output directory");

    // gradcheck
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of the full model");
    CommonOpts gc_opts;
    int gc_nodes = 12, gc_dim = 5, gc_probes = 8;
    double gc_step = 3e-4, gc_tolerance = 1e-4;
    uint64_t gc_seed = 0;
    bool sabotage = false;
    gc_cmd->add_option("--nodes", gc_nodes, "synthetic instance size");
    gc_cmd->add_option("--dim", gc_dim, "synthetic feature dimension");
    gc_cmd->add_option("--seed", gc_seed, "rng seed");
    gc_cmd->add_option("--probes", gc_probes, "coordinates probed per param");
    gc_cmd->add_option("--step", gc_step, "finite-difference step");
    gc_cmd->add_option("--tolerance", gc_tolerance, "max relative error to pass");
    gc_opts.ablation_opt = gc_cmd->add_option("--ablation", gc_opts.ablation,
                                              "full|no_graph|no_attention|no_fuzzy");
    gc_opts.fusion_opt = gc_cmd->add_option("--fusion-mode", gc_opts.fusion_mode,
                                            "additive|gated|scalar-broadcast");
    gc_cmd->add_option("--tau", gc_opts.rc.train.tau, "similarity threshold");
    gc_cmd->add_flag("--sabotage", sabotage, "perturb one analytic gradient (negative control)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            gafr::SynthSummary s = gafr::cmd_synth(spec, synth_out);
            std::cout << s.report;
            return 0;
        }
        if (*train_cmd) {
            finalize(train_opts);
            gafr::TrainSummary s = gafr::cmd_train(gafr::load_table(train_opts.data), train_opts.rc);
            std::cout << s.report;
            return 0;
        }
        if (*eval_cmd) {
            gafr::Checkpoint ck = gafr::load_checkpoint(eval_checkpoint_path);
            gafr::EvalSummary s = gafr::cmd_eval(ck, gafr::load_table(eval_opts.data));
            std::cout << s.text;
            return 0;
        }
        if (*sweep_cmd) {
            finalize(sweep_opts);
            gafr::SweepSummary s =
                gafr::cmd_sweep_tau(gafr::load_table(sweep_opts.data), sweep_opts.rc, grid);
            std::cout << s.report;
            return 0;
        }
        if (*ablate_cmd) {
            finalize(ablate_opts);
            gafr::AblateSummary s = gafr::cmd_ablate(gafr::load_table(ablate_opts.data), ablate_opts.rc);
            std::cout << s.report;
            return 0;
        }
        if (*explain_cmd) {
            gafr::Checkpoint ck = gafr::load_checkpoint(explain_checkpoint_path);
            gafr::ExplainSummary s =
                gafr::cmd_explain(ck, gafr::load_table(explain_opts.data), nodes, top_k);
            std::cout << s.report;
            if (!explain_opts.out.empty())
                gafr::write_text_file(explain_opts.out + "/explain_report.txt", s.report);
            return 0;
        }
        if (*gc_cmd) {
            gc_opts.rc.train.seed = gc_seed;
            gc_opts.rc.train.ablation = gafr::parse_ablation(gc_opts.ablation);
            gc_opts.rc.train.fusion_mode = gafr::parse_fusion_mode(gc_opts.fusion_mode);
            gafr::GradcheckSummary s = gafr::cmd_gradcheck(gc_opts.rc.train, gc_nodes, gc_dim,
                                                           gc_probes, gc_step, gc_tolerance, sabotage);
            std::cout << s.text;
            return s.pass ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
