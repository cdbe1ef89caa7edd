#ifndef PRB_TAPE_HPP
#define PRB_TAPE_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "prb/tensor.hpp"

namespace prb::nn {

/// Overflow-stable softplus ln(1+e^x); shared by tape ops and the
/// sampling decoders so both paths agree bit for bit.
inline double softplus_value(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

inline double sigmoid_value(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

class Tape;

/// Lightweight handle to a tape node.
struct Var {
    Tape* tape = nullptr;
    std::size_t idx = 0;

    const Tensor& value() const;
};

enum class Activation { identity, tanh, relu, softplus, sigmoid };

/**
 * Recorded-operation tape for reverse-mode differentiation. Forward ops
 * append nodes in topological order; backward() walks the tape in reverse
 * and calls each node's gradient closure. Scope is exactly the ops the
 * forecasting models need; this is not a general graph engine.
 *
 * A tape is confined to one thread. Parameters live outside the tape
 * (see ParameterSet) and are attached per forward pass via param(), so
 * clearing the tape between training steps costs nothing but the node
 * storage.
 */
class Tape {
public:
    struct Node {
        Tensor value;                 // owned unless ext_value is set
        Tensor* ext_value = nullptr;  // parameter leaves alias external storage
        Tensor grad;                  // allocated lazily during backward
        Tensor* ext_grad = nullptr;   // parameter gradient accumulation target
        bool requires_grad = false;
        std::function<void(Tape&)> backward;
    };

    /// When false, ops compute values but record no gradient closures.
    /// Used for prediction and finite-difference probes.
    bool recording = true;

    Var constant(Tensor t);
    Var param(Tensor& value, Tensor& grad);

    const Tensor& val(std::size_t idx) const {
        const Node& n = nodes_[idx];
        return n.ext_value ? *n.ext_value : n.value;
    }
    /// Gradient tensor for a node, allocated (zeroed) on first touch.
    Tensor& grad(std::size_t idx);
    bool grad_ready(std::size_t idx) const;

    /// Seeds d(loss)/d(loss) = 1 and runs the reverse sweep. The loss node
    /// must be a 1x1 tensor.
    void backward(Var loss);

    void clear() { nodes_.clear(); }
    std::size_t size() const { return nodes_.size(); }

    bool requires_grad(std::size_t idx) const;

    // Internal: append a computed node. Returns its handle.
    Var push(Tensor value, bool requires_grad, std::function<void(Tape&)> bw);
    // Internal: attach the gradient closure after the node index is known.
    void set_backward(std::size_t idx, std::function<void(Tape&)> bw) {
        nodes_[idx].backward = std::move(bw);
    }

private:
    std::vector<Node> nodes_;
};

inline const Tensor& Var::value() const { return tape->val(idx); }

// --- Elementwise and linear ops ---------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// Broadcasts a rank-1/1xN vector over every row of a.
Var add_rowvec(Var a, Var b);
Var matmul(Var a, Var b);
Var transpose(Var a);
/// m * a + c elementwise.
Var affine_const(Var a, double m, double c);
Var activate(Var a, Activation act);
/// Columns [c0, c1) of a.
Var slice_cols(Var a, std::size_t c0, std::size_t c1);
/// Row-wise softmax. With causal=true, row i only sees columns j <= i.
Var softmax_rows(Var a, bool causal = false);
/// Sum of all elements, as 1x1.
Var sum_all(Var a);

// --- Composite forward ops ---------------------------------------------------

/// Affine map x*W + b followed by an activation.
Var dense_forward(Var x, Var weights, Var bias, Activation act);

struct LstmVars {
    Var w_x;  // in_dim x 4H, gate order [i f g o]
    Var w_h;  // H x 4H
    Var b;    // 4H
};

/// One LSTM step. x: m x in_dim, h/c: m x H. Returns (h', c').
std::pair<Var, Var> lstm_cell_forward(Var x, Var h_prev, Var c_prev, const LstmVars& p);

/// Scaled dot-product attention softmax(QK^T/sqrt(d))V.
/// attention_weights, when non-null, receives the softmax node.
Var attention_forward(Var queries, Var keys, Var values, bool causal = false,
                      Var* attention_weights = nullptr);

/// Mean over elements of 0.5*ln(2*pi*sigma^2) + (x-mu)^2/(2*sigma^2), as 1x1.
Var gaussian_nll(Var mu, Var sigma, const Tensor& target);

/// Mean squared error against a constant target, as 1x1.
Var mse_loss(Var pred, const Tensor& target);

} // namespace prb::nn

#endif // PRB_TAPE_HPP
