#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gafr/array.hpp"
#include "gafr/errors.hpp"
#include "gafr/text.hpp"

namespace gafr {

enum class Split { Train, Val, Test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        default: return "test";
    }
}

// N samples x D features with labels and fixed split masks. Features are
// always standardized: zero mean / unit variance per column over the train
// split, train statistics applied to val/test, constant columns zeroed.
struct FeatureTable {
    std::vector<std::string> ids;
    Array2 features;  // N x D
    std::vector<int> labels;
    std::vector<Split> splits;
    int num_classes = 0;

    int n() const { return features.rows; }
    int dim() const { return features.cols; }

    std::vector<bool> mask(Split s) const {
        std::vector<bool> m(splits.size());
        for (size_t i = 0; i < splits.size(); ++i) m[i] = splits[i] == s;
        return m;
    }

    std::vector<bool> train_mask() const { return mask(Split::Train); }
};

struct SynthSpec {
    int num_classes = 2;
    std::vector<int> samples_per_class = {50, 50};  // one entry per class, or a single shared count
    int dim = 8;
    double cluster_spread = 0.3;
    double cross_class_overlap = 0.0;
    uint64_t seed = 0;
};

namespace detail {

inline void validate_table(const FeatureTable& t) {
    int n = t.n();
    if (n < 2) throw ParseError("table must have at least 2 samples, got " + std::to_string(n));
    std::vector<int> train_count(t.num_classes, 0);
    bool any_train = false;
    for (int i = 0; i < n; ++i) {
        if (t.splits[i] == Split::Train) {
            any_train = true;
            ++train_count[t.labels[i]];
        }
    }
    if (!any_train) throw ParseError("empty train split");
    for (int c = 0; c < t.num_classes; ++c)
        if (train_count[c] == 0)
            throw ParseError("class " + std::to_string(c) + " absent from the train split");
}

// In-place column standardization over train rows; train-constant columns
// become all zeros.
inline void standardize(FeatureTable& t) {
    int n = t.n(), d = t.dim();
    std::vector<int> train_rows;
    for (int i = 0; i < n; ++i)
        if (t.splits[i] == Split::Train) train_rows.push_back(i);
    for (int j = 0; j < d; ++j) {
        double mean = 0.0;
        for (int i : train_rows) mean += t.features.at(i, j);
        mean /= static_cast<double>(train_rows.size());
        double var = 0.0;
        for (int i : train_rows) {
            double dv = t.features.at(i, j) - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(train_rows.size());
        double sd = std::sqrt(var);
        if (sd < 1e-12) {
            for (int i = 0; i < n; ++i) t.features.at(i, j) = 0.0;
        } else {
            for (int i = 0; i < n; ++i) t.features.at(i, j) = (t.features.at(i, j) - mean) / sd;
        }
    }
    if (!t.features.all_finite()) throw NumericError("non-finite feature after standardization");
}

}  // namespace detail

// CSV schema: header `id,label,split,f0,...,f{D-1}`, label a non-negative
// integer, split in {train,val,test}. LF or CRLF line endings.
inline FeatureTable load_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto header = split_on(line, ',');
    if (header.size() < 4 || header[0] != "id" || header[1] != "label" || header[2] != "split")
        throw ParseError(path + " line 1: header must be id,label,split,f0,...");
    int d = static_cast<int>(header.size()) - 3;
    for (int j = 0; j < d; ++j)
        if (header[3 + j] != "f" + std::to_string(j))
            throw ParseError(path + " line 1: feature column " + std::to_string(j) +
                             " must be named f" + std::to_string(j));

    FeatureTable t;
    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_on(line, ',');
        std::string where = path + " line " + std::to_string(line_no);
        if (static_cast<int>(cells.size()) != d + 3)
            throw ParseError(where + ": expected " + std::to_string(d + 3) + " columns, got " +
                             std::to_string(cells.size()));
        t.ids.push_back(cells[0]);
        try {
            size_t used = 0;
            long lab = std::stol(cells[1], &used);
            if (used != cells[1].size() || lab < 0) throw std::invalid_argument("");
            t.labels.push_back(static_cast<int>(lab));
        } catch (const std::exception&) {
            throw ParseError(where + ": label '" + cells[1] + "' must be a non-negative integer");
        }
        if (cells[2] == "train")
            t.splits.push_back(Split::Train);
        else if (cells[2] == "val")
            t.splits.push_back(Split::Val);
        else if (cells[2] == "test")
            t.splits.push_back(Split::Test);
        else
            throw ParseError(where + ": unknown split tag '" + cells[2] +
                             "', allowed set is {train,val,test}");
        std::vector<double> fv(d);
        for (int j = 0; j < d; ++j) {
            try {
                size_t used = 0;
                fv[j] = std::stod(cells[3 + j], &used);
                if (used != cells[3 + j].size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw ParseError(where + ": feature f" + std::to_string(j) + " value '" +
                                 cells[3 + j] + "' is not a number");
            }
            if (!std::isfinite(fv[j]))
                throw ParseError(where + ": feature f" + std::to_string(j) + " is not finite");
        }
        rows.push_back(std::move(fv));
    }
    int n = static_cast<int>(rows.size());
    t.features = Array2(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) t.features.at(i, j) = rows[i][j];
    t.num_classes = 0;
    for (int lab : t.labels) t.num_classes = std::max(t.num_classes, lab + 1);
    detail::validate_table(t);
    detail::standardize(t);
    return t;
}

inline void save_table(const FeatureTable& t, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path);
    out << "id,label,split";
    for (int j = 0; j < t.dim(); ++j) out << ",f" << j;
    out << "\n";
    for (int i = 0; i < t.n(); ++i) {
        out << t.ids[i] << ',' << t.labels[i] << ',' << split_name(t.splits[i]);
        for (int j = 0; j < t.dim(); ++j) out << ',' << fmt_g17(t.features.at(i, j));
        out << "\n";
    }
}

// Synthetic draw with its construction bookkeeping kept for auditing:
// raw (pre-standardization) features, the class centers, and the cluster
// each sample was actually drawn from (differs from the label for the
// cross_class_overlap fraction).
struct SynthDraw {
    FeatureTable table;
    Array2 raw_features;
    Array2 centers;  // num_classes x dim
    std::vector<int> cluster_of;
};

inline SynthDraw make_synthetic_draw(const SynthSpec& spec) {
    if (spec.num_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
    if (spec.dim < 1) throw ConfigError("synthetic dim must be >= 1");
    if (spec.cluster_spread <= 0.0) throw ConfigError("cluster_spread must be > 0");
    if (spec.cross_class_overlap < 0.0 || spec.cross_class_overlap >= 0.5)
        throw ConfigError("cross_class_overlap must be in [0, 0.5)");
    std::vector<int> per_class = spec.samples_per_class;
    if (per_class.size() == 1) per_class.assign(spec.num_classes, per_class[0]);
    if (static_cast<int>(per_class.size()) != spec.num_classes)
        throw ConfigError("samples_per_class must have 1 or num_classes entries");
    for (int c = 0; c < spec.num_classes; ++c)
        if (per_class[c] < 3)
            throw ConfigError("samples_per_class for class " + std::to_string(c) +
                              " is " + std::to_string(per_class[c]) + ", need >= 3 for a 60/20/20 split");

    std::mt19937_64 rng(spec.seed);
    SynthDraw out;

    // Mutually distinct centers, redrawn in the (measure-zero) collision case.
    while (true) {
        out.centers = random_normal(spec.num_classes, spec.dim, rng, 2.0);
        double min_d2 = 1e300;
        for (int a = 0; a < spec.num_classes; ++a)
            for (int b = a + 1; b < spec.num_classes; ++b) {
                double d2 = 0.0;
                for (int j = 0; j < spec.dim; ++j) {
                    double dv = out.centers.at(a, j) - out.centers.at(b, j);
                    d2 += dv * dv;
                }
                min_d2 = std::min(min_d2, d2);
            }
        if (min_d2 > 1e-12) break;
    }

    int n = std::accumulate(per_class.begin(), per_class.end(), 0);
    FeatureTable& t = out.table;
    t.num_classes = spec.num_classes;
    t.features = Array2(n, spec.dim);
    out.raw_features = Array2(n, spec.dim);
    t.labels.resize(n);
    t.splits.resize(n, Split::Train);
    out.cluster_of.resize(n);
    std::normal_distribution<double> noise(0.0, 1.0);

    int row = 0;
    for (int c = 0; c < spec.num_classes; ++c)
        for (int k = 0; k < per_class[c]; ++k, ++row) {
            t.labels[row] = c;
            out.cluster_of[row] = c;
            for (int j = 0; j < spec.dim; ++j)
                out.raw_features.at(row, j) =
                    out.centers.at(c, j) + spec.cluster_spread * noise(rng);
        }

    // Label noise: resample exactly floor(overlap * N) samples from a
    // wrong-class cluster, keeping their labels.
    int k_overlap = static_cast<int>(spec.cross_class_overlap * n);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int k = 0; k < k_overlap; ++k) {
        int i = order[k];
        std::uniform_int_distribution<int> pick(0, spec.num_classes - 2);
        int wrong = pick(rng);
        if (wrong >= t.labels[i]) ++wrong;
        out.cluster_of[i] = wrong;
        for (int j = 0; j < spec.dim; ++j)
            out.raw_features.at(i, j) = out.centers.at(wrong, j) + spec.cluster_spread * noise(rng);
    }

    // 60/20/20 stratified split per class.
    for (int c = 0; c < spec.num_classes; ++c) {
        std::vector<int> members;
        for (int i = 0; i < n; ++i)
            if (t.labels[i] == c) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        int nc = static_cast<int>(members.size());
        int n_train = std::max(1, static_cast<int>(std::llround(0.6 * nc)));
        int n_val = static_cast<int>(std::llround(0.2 * nc));
        if (n_train + n_val > nc) n_val = nc - n_train;
        for (int k = 0; k < nc; ++k) {
            Split s = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
            t.splits[members[k]] = s;
        }
    }

    t.ids.resize(n);
    for (int i = 0; i < n; ++i) t.ids[i] = "s" + std::to_string(i);
    t.features = out.raw_features;
    detail::validate_table(t);
    detail::standardize(t);
    return out;
}

inline FeatureTable make_synthetic(const SynthSpec& spec) {
    return make_synthetic_draw(spec).table;
}

}  // namespace gafr
