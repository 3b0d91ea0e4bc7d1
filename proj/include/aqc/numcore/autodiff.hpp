#pragma once

// Define-by-run reverse-mode differentiation.
//
// A Tape records every primitive whose inputs require gradients. Values
// produced without a tape (or from constant inputs only) carry no history, so
// the same model code serves both the training path and plain inference; the
// arithmetic is identical in both cases.
//
// A Tape and the Vars recorded on it belong to one thread. Parameters may be
// read concurrently by several tapes; gradient accumulation into a Parameter
// happens in Tape::backward and must be serialized by the caller.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aqc/numcore/tensor.hpp"

namespace aqc::num {

class Parameter {
public:
    Parameter(std::string name, Tensor value);

    const std::string& name() const { return name_; }
    const Tensor& value() const { return value_; }
    Tensor& value() { return value_; }
    const Tensor& grad() const { return grad_; }
    Tensor& grad() { return grad_; }
    void zero_grad();

private:
    std::string name_;
    Tensor value_;
    Tensor grad_;
};

class Tape;

namespace detail {
struct Node {
    Tensor value;
    Tensor grad;  // empty until something flows into it
    bool requires_grad = false;
    Tape* tape = nullptr;
    Parameter* param = nullptr;
    std::function<void(const Tensor&)> backward;
};
}  // namespace detail

class Var {
public:
    Var() = default;

    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    Tape* tape() const { return node_ ? node_->tape : nullptr; }
    bool defined() const { return static_cast<bool>(node_); }

private:
    friend class Tape;
    friend struct VarAccess;
    explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
};

/// Wraps a value that never receives a gradient.
Var constant(Tensor value);

class Tape {
public:
    Tape() = default;
    ~Tape() { clear(); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf bound to a Parameter; backward() adds into Parameter::grad().
    Var watch(Parameter& p);

    /// Leaf that requires a gradient but is not tied to a Parameter.
    Var leaf(Tensor value);

    /// Gradient of the last backward() with respect to a leaf created by leaf().
    const Tensor& grad_of(const Var& v) const;

    /// Propagates d(loss)/d(node) through the recorded operations, adds the
    /// result into every watched Parameter and clears the tape.
    void backward(const Var& loss, double seed = 1.0);

    std::size_t size() const { return nodes_.size(); }
    void clear();

    // Internal: used by the primitive ops.
    Var record(Tensor value, std::function<void(const Tensor&)> backward);

private:
    std::vector<std::shared_ptr<detail::Node>> nodes_;
};

/// Parameter as a Var: a watched leaf when `tape` is set, a constant otherwise.
Var use(Parameter& p, Tape* tape);

// ---- primitives -----------------------------------------------------------
//
// Binary elementwise ops accept equal shapes, a [1 x n] row broadcast against
// [m x n], or a single-element operand broadcast against anything.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);

Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var exp(const Var& a);
Var softplus(const Var& a);
Var abs(const Var& a);
Var neg(const Var& a);
/// scale * a + shift, elementwise.
Var affine(const Var& a, double scale, double shift = 0.0);

Var sum(const Var& a);
Var sum(const Var& a, std::size_t axis);
Var mean(const Var& a);
Var mean(const Var& a, std::size_t axis);

/// Columns [begin, end) of a matrix.
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);

/// Rows of equal-width matrices stacked top to bottom.
Var concat_rows(const std::vector<Var>& parts);

/// Block-diagonal product. `a` stacks B square n x n blocks as a (B n) x n
/// matrix and `z` is (B n) x d; block b of the result is A_b Z_b. With B = 1
/// this is the ordinary product.
Var block_matmul(const Var& a, const Var& z);

/// Elementwise op selector mirroring the named primitives above.
enum class Elementwise { tanh, sigmoid, exp, add, mul, sub };
Var elementwise(Elementwise op, const Var& a);
Var elementwise(Elementwise op, const Var& a, const Var& b);

/// N x N matrix W with W(i,j) = p(i) - p(j) for an N x 1 column p.
Var pairwise_difference(const Var& p);

/// D^{-1/2} W D^{-1/2} with D(i,i) = sum_j |W(i,j)|. Rows and columns whose
/// degree is zero come out as zero.
Var normalized_adjacency(const Var& w);

// ---- verification ---------------------------------------------------------

/// Compares reverse-mode gradients of `f` against central differences. `f`
/// must build its graph on the tape it is handed (nullptr means no
/// recording). Returns the largest per-Parameter relative error
/// |analytic - numeric| / (|analytic| + |numeric| + 1e-12) with |.| the
/// Euclidean norm over the Parameter's entries.
double finite_diff_check(const std::vector<Parameter*>& params,
                         const std::function<Var(Tape*)>& f, double eps = 1e-5);

struct GradCheckEntry {
    std::string name;
    double relative_error;
};

/// Same comparison, reported per Parameter.
std::vector<GradCheckEntry> finite_diff_report(const std::vector<Parameter*>& params,
                                               const std::function<Var(Tape*)>& f,
                                               double eps = 1e-5);

}  // namespace aqc::num
