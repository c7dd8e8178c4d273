#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gafr/array.hpp"
#include "gafr/errors.hpp"

namespace gafr {

// Trainable array: value plus accumulated gradient of the same shape.
struct Param {
    std::string name;
    Array2 value;
    Array2 grad;

    Param() = default;
    Param(std::string n, Array2 v) : name(std::move(n)), value(std::move(v)) {
        grad = Array2::zeros(value.rows, value.cols);
    }

    void zero_grad() { grad.fill(0.0); }
};

using ValueId = int;

// Reverse-mode tape over a fixed primitive set. Every op records its output
// and enough context for an exact vector-Jacobian product; backward() replays
// the records in strict reverse order and accumulates into bound Param grads.
// Single-threaded per tape; recorded values are never mutated.
class Tape {
public:
    enum class Op {
        Leaf,
        Matmul,
        Add,
        Mul,
        Exp,
        Log,
        LeakyRelu,
        Elu,
        Sigmoid,
        SoftmaxGroups,
        GatherRows,
        ScatterSumRows,
        Square,
        ScalarScale,
    };

    ValueId leaf(Array2 v) {
        check_finite(v, "leaf");
        return push(Op::Leaf, -1, -1, std::move(v));
    }

    // Leaf bound to a trainable parameter; backward adds dLoss/dParam into p.grad.
    ValueId param(Param& p) {
        ValueId id = push(Op::Leaf, -1, -1, p.value);
        nodes_[id].param = &p;
        return id;
    }

    ValueId matmul(ValueId a, ValueId b) {
        const Array2& A = val(a);
        const Array2& B = val(b);
        if (A.cols != B.rows)
            throw DimensionError("matmul: " + A.shape_str() + " * " + B.shape_str());
        Array2 out(A.rows, B.cols);
        for (int i = 0; i < A.rows; ++i)
            for (int k = 0; k < A.cols; ++k) {
                double aik = A.at(i, k);
                if (aik == 0.0) continue;
                for (int j = 0; j < B.cols; ++j) out.at(i, j) += aik * B.at(k, j);
            }
        check_finite(out, "matmul");
        return push(Op::Matmul, a, b, std::move(out));
    }

    // Elementwise add. Second operand may be 1x1, Rx1 or 1xC and broadcasts.
    ValueId add(ValueId a, ValueId b) { return binary_broadcast(Op::Add, a, b); }

    // Elementwise multiply, same broadcast rules as add.
    ValueId mul(ValueId a, ValueId b) { return binary_broadcast(Op::Mul, a, b); }

    ValueId exp(ValueId a) {
        return unary(Op::Exp, a, [](double x) { return std::exp(x); });
    }

    ValueId log(ValueId a) {
        return unary(Op::Log, a, [](double x) { return std::log(x); });
    }

    ValueId leaky_relu(ValueId a, double slope) {
        ValueId id = unary(Op::LeakyRelu, a,
                           [slope](double x) { return x > 0.0 ? x : slope * x; });
        nodes_[id].scalar = slope;
        return id;
    }

    ValueId elu(ValueId a) {
        return unary(Op::Elu, a, [](double x) { return x > 0.0 ? x : std::expm1(x); });
    }

    ValueId sigmoid(ValueId a) {
        return unary(Op::Sigmoid, a, [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            double e = std::exp(x);
            return e / (1.0 + e);
        });
    }

    // Softmax within each contiguous group of a Mx1 column. offsets has
    // G+1 entries, offsets[0]=0, offsets[G]=M. Max-subtraction stabilized.
    ValueId softmax_groups(ValueId a, std::vector<int> offsets) {
        const Array2& X = val(a);
        if (X.cols != 1) throw DimensionError("softmax_groups: input must be Mx1, got " + X.shape_str());
        if (offsets.empty() || offsets.front() != 0 || offsets.back() != X.rows)
            throw DimensionError("softmax_groups: offsets must span 0.." + std::to_string(X.rows));
        Array2 out(X.rows, 1);
        for (size_t g = 0; g + 1 < offsets.size(); ++g) {
            int lo = offsets[g], hi = offsets[g + 1];
            if (lo > hi) throw DimensionError("softmax_groups: offsets not monotone");
            if (lo == hi) continue;
            double m = X.at(lo, 0);
            for (int i = lo + 1; i < hi; ++i) m = std::max(m, X.at(i, 0));
            double s = 0.0;
            for (int i = lo; i < hi; ++i) {
                double e = std::exp(X.at(i, 0) - m);
                out.at(i, 0) = e;
                s += e;
            }
            for (int i = lo; i < hi; ++i) out.at(i, 0) /= s;
        }
        check_finite(out, "softmax_groups");
        ValueId id = push(Op::SoftmaxGroups, a, -1, std::move(out));
        nodes_[id].index = std::move(offsets);
        return id;
    }

    // out[i,:] = x[index[i],:]
    ValueId gather_rows(ValueId a, std::vector<int> index) {
        const Array2& X = val(a);
        Array2 out(static_cast<int>(index.size()), X.cols);
        for (size_t i = 0; i < index.size(); ++i) {
            int r = index[i];
            if (r < 0 || r >= X.rows)
                throw DimensionError("gather_rows: index " + std::to_string(r) + " out of " + std::to_string(X.rows));
            for (int j = 0; j < X.cols; ++j) out.at(static_cast<int>(i), j) = X.at(r, j);
        }
        check_finite(out, "gather_rows");
        ValueId id = push(Op::GatherRows, a, -1, std::move(out));
        nodes_[id].index = std::move(index);
        return id;
    }

    // out[index[i],:] += x[i,:], out has out_rows rows.
    ValueId scatter_sum_rows(ValueId a, std::vector<int> index, int out_rows) {
        const Array2& X = val(a);
        if (static_cast<int>(index.size()) != X.rows)
            throw DimensionError("scatter_sum_rows: index size " + std::to_string(index.size()) +
                                 " != rows " + std::to_string(X.rows));
        Array2 out(out_rows, X.cols);
        for (size_t i = 0; i < index.size(); ++i) {
            int r = index[i];
            if (r < 0 || r >= out_rows)
                throw DimensionError("scatter_sum_rows: index " + std::to_string(r) + " out of " + std::to_string(out_rows));
            for (int j = 0; j < X.cols; ++j) out.at(r, j) += X.at(static_cast<int>(i), j);
        }
        check_finite(out, "scatter_sum_rows");
        ValueId id = push(Op::ScatterSumRows, a, -1, std::move(out));
        nodes_[id].index = std::move(index);
        return id;
    }

    ValueId square(ValueId a) {
        return unary(Op::Square, a, [](double x) { return x * x; });
    }

    ValueId scalar_scale(ValueId a, double s) {
        ValueId id = unary(Op::ScalarScale, a, [s](double x) { return s * x; });
        nodes_[id].scalar = s;
        return id;
    }

    const Array2& value(ValueId id) const { return nodes_[id].value; }

    size_t size() const { return nodes_.size(); }

    // Accumulates dLoss/dParam into every bound Param reachable from loss.
    // Internal adjoints are reset on every call, so calling twice without
    // zeroing the params doubles their grads.
    void backward(ValueId loss) {
        Array2& lv = nodes_[loss].value;
        if (lv.rows != 1 || lv.cols != 1)
            throw DimensionError("backward: loss must be 1x1, got " + lv.shape_str());
        for (auto& n : nodes_) {
            n.adj.rows = n.value.rows;
            n.adj.cols = n.value.cols;
            n.adj.data.assign(n.value.size(), 0.0);
        }
        nodes_[loss].adj.at(0, 0) = 1.0;
        for (int i = loss; i >= 0; --i) step_backward(i);
        for (auto& n : nodes_)
            if (n.param)
                for (size_t k = 0; k < n.adj.size(); ++k) n.param->grad.data[k] += n.adj.data[k];
    }

private:
    struct Node {
        Op op;
        int a = -1, b = -1;
        Array2 value;
        Array2 adj;
        double scalar = 0.0;          // leaky slope / scale factor
        std::vector<int> index;       // gather/scatter rows or softmax offsets
        Param* param = nullptr;
    };

    std::vector<Node> nodes_;

    static const char* op_name(Op op) {
        switch (op) {
            case Op::Leaf: return "leaf";
            case Op::Matmul: return "matmul";
            case Op::Add: return "add";
            case Op::Mul: return "elementwise-mul";
            case Op::Exp: return "exp";
            case Op::Log: return "log";
            case Op::LeakyRelu: return "leaky-relu";
            case Op::Elu: return "elu";
            case Op::Sigmoid: return "sigmoid";
            case Op::SoftmaxGroups: return "softmax-over-groups";
            case Op::GatherRows: return "gather-rows";
            case Op::ScatterSumRows: return "scatter-sum-rows";
            case Op::Square: return "square";
            case Op::ScalarScale: return "scalar-scale";
        }
        return "?";
    }

    static void check_finite(const Array2& a, const char* op) {
        if (!a.all_finite()) throw NumericError(std::string("non-finite output in ") + op);
    }

    const Array2& val(ValueId id) const { return nodes_[id].value; }

    ValueId push(Op op, int a, int b, Array2 v) {
        Node n;
        n.op = op;
        n.a = a;
        n.b = b;
        n.value = std::move(v);
        nodes_.push_back(std::move(n));
        return static_cast<ValueId>(nodes_.size() - 1);
    }

    template <class F>
    ValueId unary(Op op, ValueId a, F f) {
        const Array2& X = val(a);
        Array2 out(X.rows, X.cols);
        for (size_t i = 0; i < X.size(); ++i) out.data[i] = f(X.data[i]);
        check_finite(out, op_name(op));
        return push(op, a, -1, std::move(out));
    }

    enum class Bcast { None, Scalar, Col, Row };

    static Bcast bcast_mode(const Array2& a, const Array2& b, const char* op) {
        if (a.rows == b.rows && a.cols == b.cols) return Bcast::None;
        if (b.rows == 1 && b.cols == 1) return Bcast::Scalar;
        if (b.cols == 1 && b.rows == a.rows) return Bcast::Col;
        if (b.rows == 1 && b.cols == a.cols) return Bcast::Row;
        throw DimensionError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " + b.shape_str());
    }

    ValueId binary_broadcast(Op op, ValueId a, ValueId b) {
        const Array2& A = val(a);
        const Array2& B = val(b);
        Bcast m = bcast_mode(A, B, op_name(op));
        Array2 out(A.rows, A.cols);
        for (int i = 0; i < A.rows; ++i)
            for (int j = 0; j < A.cols; ++j) {
                double bv;
                switch (m) {
                    case Bcast::None: bv = B.at(i, j); break;
                    case Bcast::Scalar: bv = B.at(0, 0); break;
                    case Bcast::Col: bv = B.at(i, 0); break;
                    default: bv = B.at(0, j); break;
                }
                out.at(i, j) = (op == Op::Add) ? A.at(i, j) + bv : A.at(i, j) * bv;
            }
        check_finite(out, op_name(op));
        return push(op, a, b, std::move(out));
    }

    // Reduce a full-shape adjoint onto a (possibly broadcast) operand's shape.
    static void reduce_into(Array2& target, const Array2& full, Bcast m) {
        switch (m) {
            case Bcast::None:
                for (size_t k = 0; k < full.size(); ++k) target.data[k] += full.data[k];
                break;
            case Bcast::Scalar: {
                double s = 0.0;
                for (double v : full.data) s += v;
                target.at(0, 0) += s;
                break;
            }
            case Bcast::Col:
                for (int i = 0; i < full.rows; ++i) {
                    double s = 0.0;
                    for (int j = 0; j < full.cols; ++j) s += full.at(i, j);
                    target.at(i, 0) += s;
                }
                break;
            case Bcast::Row:
                for (int j = 0; j < full.cols; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < full.rows; ++i) s += full.at(i, j);
                    target.at(0, j) += s;
                }
                break;
        }
    }

    void step_backward(int i) {
        Node& n = nodes_[i];
        const Array2& d = n.adj;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Matmul: {
                const Array2& A = nodes_[n.a].value;
                const Array2& B = nodes_[n.b].value;
                Array2& dA = nodes_[n.a].adj;
                Array2& dB = nodes_[n.b].adj;
                // dA += d * B^T
                for (int i2 = 0; i2 < A.rows; ++i2)
                    for (int j = 0; j < d.cols; ++j) {
                        double dv = d.at(i2, j);
                        if (dv == 0.0) continue;
                        for (int k = 0; k < A.cols; ++k) dA.at(i2, k) += dv * B.at(k, j);
                    }
                // dB += A^T * d
                for (int k = 0; k < B.rows; ++k)
                    for (int i2 = 0; i2 < A.rows; ++i2) {
                        double av = A.at(i2, k);
                        if (av == 0.0) continue;
                        for (int j = 0; j < B.cols; ++j) dB.at(k, j) += av * d.at(i2, j);
                    }
                break;
            }
            case Op::Add: {
                const Array2& A = nodes_[n.a].value;
                const Array2& B = nodes_[n.b].value;
                Bcast m = bcast_mode(A, B, "add");
                for (size_t k = 0; k < d.size(); ++k) nodes_[n.a].adj.data[k] += d.data[k];
                reduce_into(nodes_[n.b].adj, d, m);
                break;
            }
            case Op::Mul: {
                const Array2& A = nodes_[n.a].value;
                const Array2& B = nodes_[n.b].value;
                Bcast m = bcast_mode(A, B, "mul");
                Array2& dA = nodes_[n.a].adj;
                // dA += d .* broadcast(B); dB += reduce(d .* A)
                Array2 dfull(A.rows, A.cols);
                for (int i2 = 0; i2 < A.rows; ++i2)
                    for (int j = 0; j < A.cols; ++j) {
                        double bv;
                        switch (m) {
                            case Bcast::None: bv = B.at(i2, j); break;
                            case Bcast::Scalar: bv = B.at(0, 0); break;
                            case Bcast::Col: bv = B.at(i2, 0); break;
                            default: bv = B.at(0, j); break;
                        }
                        dA.at(i2, j) += d.at(i2, j) * bv;
                        dfull.at(i2, j) = d.at(i2, j) * A.at(i2, j);
                    }
                reduce_into(nodes_[n.b].adj, dfull, m);
                break;
            }
            case Op::Exp:
                for (size_t k = 0; k < d.size(); ++k)
                    nodes_[n.a].adj.data[k] += d.data[k] * n.value.data[k];
                break;
            case Op::Log:
                for (size_t k = 0; k < d.size(); ++k)
                    nodes_[n.a].adj.data[k] += d.data[k] / nodes_[n.a].value.data[k];
                break;
            case Op::LeakyRelu:
                for (size_t k = 0; k < d.size(); ++k) {
                    double x = nodes_[n.a].value.data[k];
                    nodes_[n.a].adj.data[k] += d.data[k] * (x > 0.0 ? 1.0 : n.scalar);
                }
                break;
            case Op::Elu:
                for (size_t k = 0; k < d.size(); ++k) {
                    double x = nodes_[n.a].value.data[k];
                    nodes_[n.a].adj.data[k] += d.data[k] * (x > 0.0 ? 1.0 : n.value.data[k] + 1.0);
                }
                break;
            case Op::Sigmoid:
                for (size_t k = 0; k < d.size(); ++k) {
                    double s = n.value.data[k];
                    nodes_[n.a].adj.data[k] += d.data[k] * s * (1.0 - s);
                }
                break;
            case Op::SoftmaxGroups: {
                const std::vector<int>& off = n.index;
                Array2& dX = nodes_[n.a].adj;
                for (size_t g = 0; g + 1 < off.size(); ++g) {
                    int lo = off[g], hi = off[g + 1];
                    double dot = 0.0;
                    for (int r = lo; r < hi; ++r) dot += d.at(r, 0) * n.value.at(r, 0);
                    for (int r = lo; r < hi; ++r)
                        dX.at(r, 0) += n.value.at(r, 0) * (d.at(r, 0) - dot);
                }
                break;
            }
            case Op::GatherRows: {
                Array2& dX = nodes_[n.a].adj;
                for (size_t r = 0; r < n.index.size(); ++r)
                    for (int j = 0; j < d.cols; ++j)
                        dX.at(n.index[r], j) += d.at(static_cast<int>(r), j);
                break;
            }
            case Op::ScatterSumRows: {
                Array2& dX = nodes_[n.a].adj;
                for (size_t r = 0; r < n.index.size(); ++r)
                    for (int j = 0; j < d.cols; ++j)
                        dX.at(static_cast<int>(r), j) += d.at(n.index[r], j);
                break;
            }
            case Op::Square:
                for (size_t k = 0; k < d.size(); ++k)
                    nodes_[n.a].adj.data[k] += d.data[k] * 2.0 * nodes_[n.a].value.data[k];
                break;
            case Op::ScalarScale:
                for (size_t k = 0; k < d.size(); ++k)
                    nodes_[n.a].adj.data[k] += d.data[k] * n.scalar;
                break;
        }
    }
};

struct GradcheckEntry {
    std::string param;
    double max_rel_err = 0.0;
    int worst_row = -1;
    int worst_col = -1;
    double analytic = 0.0;
    double numeric = 0.0;
    bool pass = true;
};

struct GradcheckReport {
    double tolerance = 0.0;
    std::vector<GradcheckEntry> entries;

    bool all_pass() const {
        for (const auto& e : entries)
            if (!e.pass) return false;
        return true;
    }
};

// Central-difference check of a deterministic loss closure. loss_fn(true)
// must rebuild the forward pass from current param values and accumulate
// grads; loss_fn(false) must only return the loss value. Probes up to
// probe_count coordinates per param (all of them when the param is small).
inline GradcheckReport gradcheck(const std::function<double(bool)>& loss_fn,
                                 const std::vector<Param*>& params,
                                 int probe_count, double step, double tolerance,
                                 uint64_t seed = 0) {
    GradcheckReport report;
    report.tolerance = tolerance;
    for (Param* p : params) p->zero_grad();
    loss_fn(true);
    std::vector<Array2> analytic;
    analytic.reserve(params.size());
    for (Param* p : params) analytic.push_back(p->grad);

    std::mt19937_64 rng(seed);
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Param* p = params[pi];
        GradcheckEntry e;
        e.param = p->name;
        std::vector<int> coords(p->value.size());
        std::iota(coords.begin(), coords.end(), 0);
        if (static_cast<int>(coords.size()) > probe_count) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(probe_count);
        }
        for (int flat : coords) {
            double saved = p->value.data[flat];
            p->value.data[flat] = saved + step;
            double fp = loss_fn(false);
            p->value.data[flat] = saved - step;
            double fm = loss_fn(false);
            p->value.data[flat] = saved;
            double num = (fp - fm) / (2.0 * step);
            double ana = analytic[pi].data[flat];
            double rel = std::fabs(ana - num) / std::max({std::fabs(ana), std::fabs(num), 1e-8});
            if (rel >= e.max_rel_err) {
                e.max_rel_err = rel;
                e.worst_row = flat / p->value.cols;
                e.worst_col = flat % p->value.cols;
                e.analytic = ana;
                e.numeric = num;
            }
        }
        e.pass = e.max_rel_err < tolerance;
        report.entries.push_back(std::move(e));
    }
    return report;
}

}  // namespace gafr
