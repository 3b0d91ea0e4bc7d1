#include "aqc/numcore/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "aqc/errors.hpp"
#include "aqc/numcore/linalg.hpp"

namespace aqc::num {

using detail::Node;

struct VarAccess {
    static const std::shared_ptr<Node>& node(const Var& v) { return v.node_; }
    static Var make(std::shared_ptr<Node> n) { return Var(std::move(n)); }
};

namespace {

// Backward closures own their inputs: constants are not kept alive by the tape.
std::shared_ptr<Node> hold(const Var& v) {
    const auto& n = VarAccess::node(v);
    if (!n) throw ContractError("use of an undefined Var");
    return n;
}

Node* node_of(const Var& v) { return hold(v).get(); }

void accumulate(Node* n, Tensor g) {
    if (!n->requires_grad) return;
    if (n->grad.empty()) {
        n->grad = std::move(g);
    } else {
        n->grad += g;
    }
}

Tape* common_tape(std::initializer_list<const Var*> inputs) {
    Tape* tape = nullptr;
    for (const Var* v : inputs) {
        if (!v->requires_grad()) continue;
        if (tape && v->tape() != tape) throw ContractError("operands recorded on different tapes");
        tape = v->tape();
    }
    return tape;
}

// Records the result when any input carries history, otherwise wraps a constant.
template <typename Backward>
Var finish(Tensor value, std::initializer_list<const Var*> inputs, Backward&& backward) {
    Tape* tape = common_tape(inputs);
    if (!tape) return constant(std::move(value));
    return tape->record(std::move(value), std::forward<Backward>(backward));
}

enum class Broadcast { same, row, scalar };

struct BinaryLayout {
    Shape out;
    Broadcast a = Broadcast::same;
    Broadcast b = Broadcast::same;
    std::size_t cols = 1;
};

bool is_row_of(const Shape& small, const Shape& big) {
    return big.size() == 2 && small.size() == 2 && small[0] == 1 && small[1] == big[1];
}

BinaryLayout layout(const char* op, const Tensor& a, const Tensor& b) {
    BinaryLayout l;
    if (a.shape() == b.shape()) {
        l.out = a.shape();
    } else if (is_row_of(b.shape(), a.shape())) {
        l.out = a.shape();
        l.b = Broadcast::row;
    } else if (is_row_of(a.shape(), b.shape())) {
        l.out = b.shape();
        l.a = Broadcast::row;
    } else if (b.size() == 1) {
        l.out = a.shape();
        l.b = Broadcast::scalar;
    } else if (a.size() == 1) {
        l.out = b.shape();
        l.a = Broadcast::scalar;
    } else {
        throw DimensionError(std::string(op) + ": shapes " + to_string(a.shape()) + " and " +
                             to_string(b.shape()) + " are not broadcastable");
    }
    l.cols = l.out.size() == 2 ? l.out[1] : 1;
    return l;
}

inline std::size_t src_index(Broadcast kind, std::size_t i, std::size_t cols) {
    switch (kind) {
        case Broadcast::same: return i;
        case Broadcast::row: return i % cols;
        case Broadcast::scalar: return 0;
    }
    return i;
}

template <typename Fwd, typename DA, typename DB>
Var binary(const char* name, const Var& a, const Var& b, Fwd fwd, DA da, DB db) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const BinaryLayout l = layout(name, av, bv);
    const std::size_t n = element_count(l.out);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = fwd(av[src_index(l.a, i, l.cols)], bv[src_index(l.b, i, l.cols)]);
    }
    auto na = hold(a);
    auto nb = hold(b);
    return finish(Tensor(l.out, std::move(out)), {&a, &b}, [na, nb, l, da, db](const Tensor& g) {
        const Tensor& x = na->value;
        const Tensor& y = nb->value;
        if (na->requires_grad) {
            Tensor ga(x.shape(), 0.0);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const std::size_t ia = src_index(l.a, i, l.cols);
                ga[ia] += g[i] * da(x[ia], y[src_index(l.b, i, l.cols)]);
            }
            accumulate(na.get(), std::move(ga));
        }
        if (nb->requires_grad) {
            Tensor gb(y.shape(), 0.0);
            for (std::size_t i = 0; i < g.size(); ++i) {
                const std::size_t ib = src_index(l.b, i, l.cols);
                gb[ib] += g[i] * db(x[src_index(l.a, i, l.cols)], y[ib]);
            }
            accumulate(nb.get(), std::move(gb));
        }
    });
}

// `deriv(x)` is the derivative evaluated at the input.
template <typename Fwd, typename Deriv>
Var unary(const Var& a, Fwd fwd, Deriv deriv) {
    const Tensor& av = a.value();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
    auto na = hold(a);
    Tensor value(av.shape(), std::move(out));
    return finish(std::move(value), {&a}, [na, deriv](const Tensor& g) {
        const Tensor& x = na->value;
        Tensor gx(x.shape(), 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] = g[i] * deriv(x[i]);
        accumulate(na.get(), std::move(gx));
    });
}

double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus_scalar(double x) {
    // log(1 + e^x) without overflow
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

// ---- Parameter / Var / Tape ---------------------------------------------------

Parameter::Parameter(std::string name, Tensor value)
    : name_(std::move(name)), value_(std::move(value)), grad_(value_.shape(), 0.0) {}

void Parameter::zero_grad() { grad_ = Tensor(value_.shape(), 0.0); }

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return VarAccess::make(std::move(n));
}

Var Tape::watch(Parameter& p) {
    auto n = std::make_shared<Node>();
    n->value = p.value();
    n->requires_grad = true;
    n->tape = this;
    n->param = &p;
    nodes_.push_back(n);
    return Var(std::move(n));
}

Var Tape::leaf(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->tape = this;
    nodes_.push_back(n);
    return Var(std::move(n));
}

const Tensor& Tape::grad_of(const Var& v) const { return node_of(v)->grad; }

Var Tape::record(Tensor value, std::function<void(const Tensor&)> backward) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    n->tape = this;
    n->backward = std::move(backward);
    nodes_.push_back(n);
    return Var(std::move(n));
}

void Tape::backward(const Var& loss, double seed) {
    Node* root = node_of(loss);
    if (root->value.size() != 1) {
        throw ContractError("backward: loss must be a scalar, got shape " +
                            to_string(root->value.shape()));
    }
    if (nodes_.empty()) throw ContractError("backward: tape is empty");
    if (root->tape != this) throw ContractError("backward: loss was not recorded on this tape");

    for (auto& n : nodes_) n->grad = Tensor();
    root->grad = Tensor(root->value.shape(), seed);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (n.grad.empty()) continue;
        if (n.backward) n.backward(n.grad);
        if (n.param) n.param->grad() += n.grad;
    }
    clear();
}

void Tape::clear() {
    // Drop closures first: they hold raw pointers into sibling nodes.
    for (auto& n : nodes_) {
        n->backward = nullptr;
        n->tape = nullptr;
        n->requires_grad = false;
    }
    nodes_.clear();
}

Var use(Parameter& p, Tape* tape) { return tape ? tape->watch(p) : constant(p.value()); }

// ---- elementwise ----------------------------------------------------------------

Var add(const Var& a, const Var& b) {
    return binary(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
    return binary(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
    return binary(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var tanh(const Var& a) {
    return unary(
        a, [](double x) { return std::tanh(x); },
        [](double x) {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        });
}

Var sigmoid(const Var& a) {
    return unary(a, sigmoid_scalar, [](double x) {
        const double s = sigmoid_scalar(x);
        return s * (1.0 - s);
    });
}

Var exp(const Var& a) {
    return unary(
        a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var softplus(const Var& a) { return unary(a, softplus_scalar, sigmoid_scalar); }

Var abs(const Var& a) {
    return unary(
        a, [](double x) { return std::abs(x); },
        [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var neg(const Var& a) { return affine(a, -1.0, 0.0); }

Var affine(const Var& a, double scale, double shift) {
    return unary(
        a, [scale, shift](double x) { return scale * x + shift; },
        [scale](double) { return scale; });
}

Var elementwise(Elementwise op, const Var& a) {
    switch (op) {
        case Elementwise::tanh: return tanh(a);
        case Elementwise::sigmoid: return sigmoid(a);
        case Elementwise::exp: return exp(a);
        default: throw ContractError("elementwise: binary op called with one operand");
    }
}

Var elementwise(Elementwise op, const Var& a, const Var& b) {
    switch (op) {
        case Elementwise::add: return add(a, b);
        case Elementwise::mul: return mul(a, b);
        case Elementwise::sub: return sub(a, b);
        default: throw ContractError("elementwise: unary op called with two operands");
    }
}

// ---- linear algebra -------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
    Tensor out = matmul(a.value(), b.value());
    auto na = hold(a);
    auto nb = hold(b);
    return finish(std::move(out), {&a, &b}, [na, nb](const Tensor& g) {
        const Tensor& x = na->value;  // m x k
        const Tensor& y = nb->value;  // k x n
        const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
        const double* pg = g.data().data();
        const double* px = x.data().data();
        const double* py = y.data().data();
        if (na->requires_grad) {
            // g y^T
            std::vector<double> ga(m * k);
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = pg + i * n;
                for (std::size_t p = 0; p < k; ++p) {
                    const double* yrow = py + p * n;
                    double s = 0.0;
                    for (std::size_t j = 0; j < n; ++j) s += grow[j] * yrow[j];
                    ga[i * k + p] = s;
                }
            }
            accumulate(na.get(), Tensor(Shape{m, k}, std::move(ga)));
        }
        if (nb->requires_grad) {
            // x^T g
            std::vector<double> gb(k * n, 0.0);
            for (std::size_t i = 0; i < m; ++i) {
                const double* grow = pg + i * n;
                for (std::size_t p = 0; p < k; ++p) {
                    const double s = px[i * k + p];
                    if (s == 0.0) continue;
                    double* brow = gb.data() + p * n;
                    for (std::size_t j = 0; j < n; ++j) brow[j] += s * grow[j];
                }
            }
            accumulate(nb.get(), Tensor(Shape{k, n}, std::move(gb)));
        }
    });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
    const Tensor& av = a.value();
    const std::size_t m = av.rows(), n = av.cols();
    if (begin > end || end > n) {
        throw DimensionError("slice_cols: range [" + std::to_string(begin) + ", " +
                             std::to_string(end) + ") outside " + to_string(av.shape()));
    }
    const std::size_t w = end - begin;
    Tensor out = Tensor::zeros(m, w);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) out(i, j) = av(i, begin + j);
    auto na = hold(a);
    return finish(std::move(out), {&a}, [na, begin, w](const Tensor& g) {
        Tensor ga(na->value.shape(), 0.0);
        for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < w; ++j) ga(i, begin + j) = g(i, j);
        accumulate(na.get(), std::move(ga));
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const std::size_t cols = parts[0].value().cols();
    std::vector<double> out;
    std::vector<std::shared_ptr<Node>> held;
    Tape* tape = nullptr;
    for (const Var& v : parts) {
        if (v.value().rank() != 2 || v.value().cols() != cols) {
            throw DimensionError("concat_rows: part " + to_string(v.shape()) + " does not have " +
                                 std::to_string(cols) + " columns");
        }
        out.insert(out.end(), v.value().data().begin(), v.value().data().end());
        held.push_back(hold(v));
        if (v.requires_grad()) {
            if (tape && v.tape() != tape) throw ContractError("operands recorded on different tapes");
            tape = v.tape();
        }
    }
    const std::size_t rows = out.size() / cols;
    Tensor value(Shape{rows, cols}, std::move(out));
    if (!tape) return constant(std::move(value));
    return tape->record(std::move(value), [held = std::move(held), cols](const Tensor& g) {
        std::size_t offset = 0;
        for (const auto& n : held) {
            const std::size_t len = n->value.size();
            if (n->requires_grad) {
                std::vector<double> part(g.data().begin() + offset, g.data().begin() + offset + len);
                accumulate(n.get(), Tensor(Shape{len / cols, cols}, std::move(part)));
            }
            offset += len;
        }
    });
}

Var block_matmul(const Var& a, const Var& z) {
    const Tensor& av = a.value();
    const Tensor& zv = z.value();
    if (av.rank() != 2 || zv.rank() != 2 || av.cols() == 0 || av.rows() != zv.rows() ||
        av.rows() % av.cols() != 0) {
        throw DimensionError("block_matmul: incompatible shapes " + to_string(av.shape()) + " and " +
                             to_string(zv.shape()));
    }
    const std::size_t n = av.cols(), d = zv.cols(), blocks = av.rows() / n;
    std::vector<double> out(av.rows() * d, 0.0);
    for (std::size_t b = 0; b < blocks; ++b)
        for (std::size_t i = 0; i < n; ++i) {
            double* row = out.data() + (b * n + i) * d;
            for (std::size_t p = 0; p < n; ++p) {
                const double s = av(b * n + i, p);
                const double* zrow = zv.data().data() + (b * n + p) * d;
                for (std::size_t j = 0; j < d; ++j) row[j] += s * zrow[j];
            }
        }
    auto na = hold(a);
    auto nz = hold(z);
    return finish(Tensor(Shape{av.rows(), d}, std::move(out)), {&a, &z},
                  [na, nz, n, d, blocks](const Tensor& g) {
                      const Tensor& x = na->value;
                      const Tensor& y = nz->value;
                      if (na->requires_grad) {
                          Tensor ga(x.shape(), 0.0);
                          for (std::size_t b = 0; b < blocks; ++b)
                              for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t p = 0; p < n; ++p) {
                                      double s = 0.0;
                                      for (std::size_t j = 0; j < d; ++j) s += g(b * n + i, j) * y(b * n + p, j);
                                      ga(b * n + i, p) = s;
                                  }
                          accumulate(na.get(), std::move(ga));
                      }
                      if (nz->requires_grad) {
                          Tensor gz(y.shape(), 0.0);
                          for (std::size_t b = 0; b < blocks; ++b)
                              for (std::size_t i = 0; i < n; ++i)
                                  for (std::size_t p = 0; p < n; ++p) {
                                      const double s = x(b * n + i, p);
                                      for (std::size_t j = 0; j < d; ++j) gz(b * n + p, j) += s * g(b * n + i, j);
                                  }
                          accumulate(nz.get(), std::move(gz));
                      }
                  });
}

Var pairwise_difference(const Var& p) {
    const Tensor& pv = p.value();
    if (pv.rank() != 2 || pv.cols() != 1) {
        throw DimensionError("pairwise_difference: expected N x 1, got " + to_string(pv.shape()));
    }
    const std::size_t n = pv.rows();
    Tensor out = Tensor::zeros(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out(i, j) = pv[i] - pv[j];
    auto np = hold(p);
    return finish(std::move(out), {&p}, [np, n](const Tensor& g) {
        Tensor gp = Tensor::zeros(n, 1);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                gp[i] += g(i, j);
                gp[j] -= g(i, j);
            }
        accumulate(np.get(), std::move(gp));
    });
}

Var normalized_adjacency(const Var& w) {
    const Tensor& wv = w.value();
    if (wv.rank() != 2 || wv.rows() != wv.cols()) {
        throw DimensionError("normalized_adjacency: expected a square matrix, got " +
                             to_string(wv.shape()));
    }
    Tensor out = normalized_adjacency(wv);
    auto nw = hold(w);
    return finish(std::move(out), {&w}, [nw](const Tensor& g) {
        const Tensor& W = nw->value;
        const std::size_t n = W.rows();
        std::vector<double> s(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            for (std::size_t j = 0; j < n; ++j) d += std::abs(W(i, j));
            s[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
        }
        std::vector<double> gs(n, 0.0);
        Tensor gw = Tensor::zeros(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                gw(i, j) = g(i, j) * s[i] * s[j];
                gs[i] += g(i, j) * W(i, j) * s[j];
                gs[j] += g(i, j) * s[i] * W(i, j);
            }
        for (std::size_t i = 0; i < n; ++i) {
            if (s[i] == 0.0) continue;
            // ds/dd = -1/2 d^{-3/2} = -1/2 s^3
            const double gd = gs[i] * (-0.5 * s[i] * s[i] * s[i]);
            for (std::size_t j = 0; j < n; ++j) {
                const double x = W(i, j);
                gw(i, j) += gd * (x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0));
            }
        }
        accumulate(nw.get(), std::move(gw));
    });
}

// ---- reductions -----------------------------------------------------------------

Var sum(const Var& a) {
    const Tensor& av = a.value();
    double s = 0.0;
    for (double v : av.values()) s += v;
    auto na = hold(a);
    return finish(Tensor::scalar(s), {&a}, [na](const Tensor& g) {
        accumulate(na.get(), Tensor(na->value.shape(), g.item()));
    });
}

Var mean(const Var& a) {
    const std::size_t n = a.value().size();
    if (n == 0) throw DimensionError("mean of an empty tensor");
    return affine(sum(a), 1.0 / static_cast<double>(n));
}

namespace {
struct AxisSplit {
    std::size_t outer, len, inner;
    Shape out;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    if (axis >= shape.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " +
                             to_string(shape));
    }
    AxisSplit s{1, shape[axis], 1, {}};
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    for (std::size_t i = 0; i < shape.size(); ++i)
        if (i != axis) s.out.push_back(shape[i]);
    return s;
}
}  // namespace

Var sum(const Var& a, std::size_t axis) {
    const Tensor& av = a.value();
    const AxisSplit s = split_axis(av.shape(), axis);
    std::vector<double> out(s.outer * s.inner, 0.0);
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t l = 0; l < s.len; ++l)
            for (std::size_t i = 0; i < s.inner; ++i)
                out[o * s.inner + i] += av[(o * s.len + l) * s.inner + i];
    auto na = hold(a);
    return finish(Tensor(s.out, std::move(out)), {&a}, [na, s](const Tensor& g) {
        Tensor ga(na->value.shape(), 0.0);
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t l = 0; l < s.len; ++l)
                for (std::size_t i = 0; i < s.inner; ++i)
                    ga[(o * s.len + l) * s.inner + i] = g[o * s.inner + i];
        accumulate(na.get(), std::move(ga));
    });
}

Var mean(const Var& a, std::size_t axis) {
    const AxisSplit s = split_axis(a.value().shape(), axis);
    if (s.len == 0) throw DimensionError("mean over an empty axis");
    return affine(sum(a, axis), 1.0 / static_cast<double>(s.len));
}

// ---- gradient check -------------------------------------------------------------

std::vector<GradCheckEntry> finite_diff_report(const std::vector<Parameter*>& params,
                                               const std::function<Var(Tape*)>& f, double eps) {
    if (!(eps > 0.0)) throw ContractError("finite_diff_check: eps must be positive");
    for (Parameter* p : params) p->zero_grad();
    {
        Tape tape;
        Var loss = f(&tape);
        loss.value().check_finite("finite_diff_check loss");
        if (loss.requires_grad()) tape.backward(loss);
    }
    auto eval = [&]() {
        const Var v = f(nullptr);
        const double x = v.value().item();
        if (!std::isfinite(x)) throw NumericError("finite_diff_check: non-finite loss");
        return x;
    };
    std::vector<GradCheckEntry> report;
    for (Parameter* p : params) {
        double diff2 = 0.0, an2 = 0.0, nu2 = 0.0;
        Tensor& value = p->value();
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double orig = value[i];
            value[i] = orig + eps;
            const double up = eval();
            value[i] = orig - eps;
            const double down = eval();
            value[i] = orig;
            const double numeric = (up - down) / (2.0 * eps);
            const double analytic = p->grad()[i];
            diff2 += (analytic - numeric) * (analytic - numeric);
            an2 += analytic * analytic;
            nu2 += numeric * numeric;
        }
        report.push_back(
            {p->name(), std::sqrt(diff2) / (std::sqrt(an2) + std::sqrt(nu2) + 1e-12)});
    }
    return report;
}

double finite_diff_check(const std::vector<Parameter*>& params,
                         const std::function<Var(Tape*)>& f, double eps) {
    double worst = 0.0;
    for (const auto& e : finite_diff_report(params, f, eps)) worst = std::max(worst, e.relative_error);
    return worst;
}

}  // namespace aqc::num
