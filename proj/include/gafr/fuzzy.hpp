#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gafr/errors.hpp"
#include "gafr/tape.hpp"
#include "gafr/text.hpp"
#include "gafr/topo.hpp"

namespace gafr {

inline constexpr int kNumDescriptors = 3;
inline constexpr int kNumTerms = 3;

inline const char* descriptor_name(int d) {
    static const char* names[] = {"clustering", "degree", "label_agreement"};
    return names[d];
}

inline const char* term_name(int t) {
    static const char* names[] = {"LOW", "MEDIUM", "HIGH"};
    return names[t];
}

// Gaussian membership parameters for 3 descriptors x 3 linguistic terms,
// stored flat as 1x9 in descriptor-major order (desc*3 + term). Widths are
// trained in log-space so the effective width stays positive.
struct MembershipParams {
    Param centers;
    Param log_widths;

    double center(int desc, int term) const { return centers.value.at(0, desc * 3 + term); }
    double width(int desc, int term) const { return std::exp(log_widths.value.at(0, desc * 3 + term)); }
};

inline MembershipParams default_membership_params() {
    MembershipParams mp;
    Array2 c(1, kNumDescriptors * kNumTerms);
    Array2 w(1, kNumDescriptors * kNumTerms);
    const double term_centers[] = {0.2, 0.5, 0.8};
    for (int d = 0; d < kNumDescriptors; ++d)
        for (int t = 0; t < kNumTerms; ++t) {
            c.at(0, d * 3 + t) = term_centers[t];
            w.at(0, d * 3 + t) = std::log(0.15);
        }
    mp.centers = Param("fuzzy.centers", std::move(c));
    mp.log_widths = Param("fuzzy.log_widths", std::move(w));
    return mp;
}

// One linguistic term per descriptor.
struct FuzzyRule {
    std::array<int, kNumDescriptors> antecedent;
};

// Rule set with learnable importance weights; conjunction is the product
// t-norm throughout.
struct RuleBase {
    std::vector<FuzzyRule> rules;
    Param rule_weights;  // 1 x K

    int rule_count() const { return static_cast<int>(rules.size()); }

    std::string rule_text(int k) const {
        std::ostringstream os;
        os << "IF ";
        for (int d = 0; d < kNumDescriptors; ++d) {
            if (d) os << " AND ";
            os << descriptor_name(d) << " is " << term_name(rules[k].antecedent[d]);
        }
        return os.str();
    }
};

// The complete 27-conjunction grid, rule k = (t0*9 + t1*3 + t2).
inline RuleBase full_rule_grid() {
    RuleBase rb;
    for (int t0 = 0; t0 < kNumTerms; ++t0)
        for (int t1 = 0; t1 < kNumTerms; ++t1)
            for (int t2 = 0; t2 < kNumTerms; ++t2)
                rb.rules.push_back(FuzzyRule{{t0, t1, t2}});
    rb.rule_weights = Param("fuzzy.alpha", Array2::ones(1, rb.rule_count()));
    return rb;
}

// exp(-(value - c)^2 / (2 s^2)), the Gaussian membership degree.
inline double membership(double value, double c, double s) {
    double d = value - c;
    return std::exp(-(d * d) / (2.0 * s * s));
}

// Raw and weight-scaled activations for a set of nodes.
struct RuleActivation {
    Array2 r;         // N x K, r_k(u) in (0,1]
    Array2 weighted;  // N x K, alpha_k * r_k(u)

    double aggregate(int u) const {  // scalar r(u) = sum_k alpha_k r_k(u)
        double s = 0.0;
        for (int k = 0; k < weighted.cols; ++k) s += weighted.at(u, k);
        return s;
    }
};

// Untaped per-node firing; the reference path for reports and tests.
inline std::vector<double> rule_fire(const TopoVector& f, const RuleBase& rb,
                                     const MembershipParams& mp) {
    const double fv[] = {f.clustering, f.degree_norm, f.label_agreement};
    std::vector<double> out(rb.rule_count());
    for (int k = 0; k < rb.rule_count(); ++k) {
        double r = 1.0;
        for (int d = 0; d < kNumDescriptors; ++d) {
            int t = rb.rules[k].antecedent[d];
            r *= membership(fv[d], mp.center(d, t), mp.width(d, t));
        }
        out[k] = r;
    }
    return out;
}

namespace detail {

// Column duplicator: topo N x 3 -> N x 9 with column (3d + t) = descriptor d.
inline Array2 descriptor_expander() {
    Array2 e(kNumDescriptors, kNumDescriptors * kNumTerms);
    for (int d = 0; d < kNumDescriptors; ++d)
        for (int t = 0; t < kNumTerms; ++t) e.at(d, d * 3 + t) = 1.0;
    return e;
}

// Per-descriptor membership selector: memberships N x 9 -> N x K picking
// each rule's term column for descriptor d.
inline Array2 rule_selector(const RuleBase& rb, int d) {
    Array2 p(kNumDescriptors * kNumTerms, rb.rule_count());
    for (int k = 0; k < rb.rule_count(); ++k) p.at(d * 3 + rb.rules[k].antecedent[d], k) = 1.0;
    return p;
}

}  // namespace detail

struct FuzzyForward {
    ValueId activations;  // N x K
    ValueId weighted;     // N x K
};

// Taped batch firing over all nodes: Gaussian memberships of the (constant)
// topo matrix, product t-norm per rule, then the alpha_k scaling. Gradients
// flow to centers, log-widths and rule weights.
inline FuzzyForward rule_fire_taped(Tape& tape, const Array2& topo, RuleBase& rb,
                                    MembershipParams& mp) {
    if (rb.rule_count() < 1) throw ConfigError("rule base must contain at least one rule");
    if (topo.cols != kNumDescriptors)
        throw DimensionError("rule_fire: topo matrix must be Nx3, got " + topo.shape_str());

    ValueId f = tape.leaf(topo);
    ValueId fe = tape.matmul(f, tape.leaf(detail::descriptor_expander()));
    ValueId c = tape.param(mp.centers);
    ValueId diff = tape.add(fe, tape.scalar_scale(c, -1.0));
    ValueId sq = tape.square(diff);
    ValueId logs = tape.param(mp.log_widths);
    // 1/(2 s^2) = 0.5 exp(-2 log s)
    ValueId inv2s2 = tape.scalar_scale(tape.exp(tape.scalar_scale(logs, -2.0)), 0.5);
    ValueId memb = tape.exp(tape.scalar_scale(tape.mul(sq, inv2s2), -1.0));

    ValueId r = -1;
    for (int d = 0; d < kNumDescriptors; ++d) {
        ValueId picked = tape.matmul(memb, tape.leaf(detail::rule_selector(rb, d)));
        r = d == 0 ? picked : tape.mul(r, picked);
    }
    ValueId alpha = tape.param(rb.rule_weights);
    ValueId weighted = tape.mul(r, alpha);
    return {r, weighted};
}

inline RuleActivation extract_activation(const Tape& tape, const FuzzyForward& fw) {
    RuleActivation act;
    act.r = tape.value(fw.activations);
    act.weighted = tape.value(fw.weighted);
    return act;
}

// Human-readable rule report: every rule with its learned parameters and
// mean train activation, then each node's top_k rules by weighted strength
// (descending, ties by rule index). Pure function of its inputs.
inline std::string export_rules(const RuleBase& rb, const MembershipParams& mp,
                                const RuleActivation& act, const std::vector<bool>& train_mask,
                                int top_k) {
    int K = rb.rule_count();
    int n = act.r.rows;
    if (top_k > K) top_k = K;
    if (top_k < 1) top_k = 1;

    std::ostringstream os;
    os << "rules " << K << "\n";
    for (int k = 0; k < K; ++k) {
        double mean_act = 0.0;
        int train_n = 0;
        for (int u = 0; u < n; ++u)
            if (train_mask[u]) {
                mean_act += act.r.at(u, k);
                ++train_n;
            }
        if (train_n) mean_act /= train_n;
        os << "rule_id=" << k << "\n";
        os << "  antecedent=" << rb.rule_text(k) << "\n";
        os << "  alpha=" << fmt_g17(rb.rule_weights.value.at(0, k)) << "\n";
        os << "  centers=";
        for (int d = 0; d < kNumDescriptors; ++d)
            os << (d ? "," : "") << fmt_g17(mp.center(d, rb.rules[k].antecedent[d]));
        os << "\n  widths=";
        for (int d = 0; d < kNumDescriptors; ++d)
            os << (d ? "," : "") << fmt_g17(mp.width(d, rb.rules[k].antecedent[d]));
        os << "\n  mean_activation=" << fmt_g17(mean_act) << "\n";
    }
    os << "nodes " << n << "\n";
    for (int u = 0; u < n; ++u) {
        std::vector<int> idx(K);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
            return act.weighted.at(u, a) > act.weighted.at(u, b);
        });
        os << "node=" << u << "\n";
        for (int t = 0; t < top_k; ++t) {
            int k = idx[t];
            os << "  strength=" << fmt_g17(act.weighted.at(u, k)) << " rule_id=" << k << " "
               << rb.rule_text(k) << "\n";
        }
    }
    return os.str();
}

}  // namespace gafr
