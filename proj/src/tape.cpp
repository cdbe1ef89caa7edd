#include "prb/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace prb::nn {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

} // namespace

Var Tape::push(Tensor value, bool requires_grad, std::function<void(Tape&)> bw) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor t) { return push(std::move(t), false, nullptr); }

Var Tape::param(Tensor& value, Tensor& grad) {
    Node n;
    n.ext_value = &value;
    n.ext_grad = &grad;
    n.requires_grad = recording;
    nodes_.push_back(std::move(n));
    return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t idx) {
    Node& n = nodes_[idx];
    if (n.ext_grad) return *n.ext_grad;
    if (n.grad.empty()) n.grad = val(idx).zeros_like();
    return n.grad;
}

bool Tape::grad_ready(std::size_t idx) const {
    const Node& n = nodes_[idx];
    if (n.ext_grad) return true;
    return !n.grad.empty();
}

bool Tape::requires_grad(std::size_t idx) const { return nodes_[idx].requires_grad; }

void Tape::backward(Var loss) {
    if (loss.tape != this) throw std::invalid_argument("backward: loss from another tape");
    if (val(loss.idx).size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    grad(loss.idx)[0] = 1.0;
    for (std::size_t i = loss.idx + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backward) continue;
        if (!grad_ready(i)) continue; // never reached from the loss
        n.backward(*this);
    }
}

// --- Primitive ops -----------------------------------------------------------

Var add(Var a, Var b) {
    Tape& t = *a.tape;
    const Tensor& av = t.val(a.idx);
    const Tensor& bv = t.val(b.idx);
    check_same_shape(av, bv, "add");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    const bool rg = t.recording && (t.requires_grad(a.idx) || t.requires_grad(b.idx));
    if (!rg) return t.push(std::move(out), false, nullptr);
    const std::size_t ai = a.idx, bi = b.idx;
    Var y = t.push(std::move(out), true, nullptr);
    const std::size_t yi = y.idx;
    t.set_backward(yi, [ai, bi, yi](Tape& tp) {
        const Tensor& gy = tp.grad(yi);
        if (tp.requires_grad(ai)) {
            Tensor& ga = tp.grad(ai);
            for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        }
        if (tp.requires_grad(bi)) {
            Tensor& gb = tp.grad(bi);
            for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i];
        }
    });
    return y;
}

Var sub(Var a, Var b) {
    Tape& t = *a.tape;
    const Tensor& av = t.val(a.idx);
    const Tensor& bv = t.val(b.idx);
    check_same_shape(av, bv, "sub");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    const bool rg = t.recording && (t.requires_grad(a.idx) || t.requires_grad(b.idx));
    if (!rg) return t.push(std::move(out), false, nullptr);
    const std::size_t ai = a.idx, bi = b.idx;
    Var y = t.push(std::move(out), true, nullptr);
    const std::size_t yi = y.idx;
    t.set_backward(yi, [ai, bi, yi](Tape& tp) {
        const Tensor& gy = tp.grad(yi);
        if (tp.requires_grad(ai)) {
            Tensor& ga = tp.grad(ai);
            for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        }
        if (tp.requires_grad(bi)) {
            Tensor& gb = tp.grad(bi);
            for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
        }
    });
    return y;
}

Var mul(Var a, Var b) {
    Tape& t = *a.tape;
    const Tensor& av = t.val(a.idx);
    const Tensor& bv = t.val(b.idx);
    check_same_shape(av, bv, "mul");
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const bool rg = t.recording && (t.requires_grad(a.idx) || t.requires_grad(b.idx));
    if (!rg) return t.push(std::move(out), false, nullptr);
    const std::size_t ai = a.idx, bi = b.idx;
    Var y = t.push(std::move(out), true, nullptr);
    const std::size_t yi = y.idx;
    t.set_backward(yi, [ai, bi, yi](Tape& tp) {
        const Tensor& gy = tp.grad(yi);
        const Tensor& av2 = tp.val(ai);
        const Tensor& bv2 = tp.val(bi);
        if (tp.requires_grad(ai)) {
            Tensor& ga = tp.grad(ai);
            for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv2[i];
        }
        if (tp.requires_grad(bi)) {
            Tensor& gb = tp.grad(bi);
            for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av2[i];
        }
    });
    return y;
}

Var add_rowvec(Var a, Var b) {
    Tape& t = *a.tape;
    const Tensor& av = t.val(a.idx);
    const Tensor& bv = t.val(b.idx);
    if (bv.cols() != av.cols() || bv.rows() != 1)
        throw std::invalid_argument("add_rowvec: bias shape mismatch");
    Tensor out = av;
    const std::size_t m = av.rows(), n = av.cols();
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) out(r, c) += bv[c];
    const bool rg = t.recording && (t.requires_grad(a.idx) || t.requires_grad(b.idx));
    if (!rg) return t.push(std::move(out), false, nullptr);
    const std::size_t ai = a.idx, bi = b.idx;
    Var y = t.push(std::move(out), true, nullptr);
    const std::size_t yi = y.idx;
    t.set_backward(yi, [ai, bi, yi](Tape& tp) {
        const Tensor& gy = tp.grad(yi);
        if (tp.requires_grad(ai)) {
            Tensor& ga = tp.grad(ai);
            for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
        }
        if (tp.requires_grad(bi)) {
            Tensor& gb = tp.grad(bi);
            const std::size_t m2 = gy.rows(), n2 = gy.cols();
            for (std::size_t r = 0; r < m2; ++r)
                for (std::size_t c = 0; c < n2; ++c) gb[c] += gy(r, c);
        }
    });
    return y;
}

Var matmul(Var a, Var b) {
    Tape& t = *a.tape;
    const Tensor& av = t.val(a.idx);
    const Tensor& bv = t.val(b.idx);
    if (av.cols() != bv.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    Tensor out(m, n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = &av.data()[i * k];
        double* orow = &out.data()[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const double aval = arow[p];
            if (aval == 0.0) continue;
            const double* brow = &bv.data()[p * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += aval * brow[j];
        }
    }
    const bool rg = t.recording && (t.requires_grad(a.idx) || t.requires_grad(b.idx));
    if (!rg) return t.push(std::move(out), false, nullptr);
    const std::size_t ai = a.idx, bi = b.idx;
    Var y = t.push(std::move(out), true, nullptr);
    const std::size_t yi = y.idx;
    t.set_backward(yi, [ai, bi, yi](Tape& tp) {
        const Tensor& gy = tp.grad(yi);
        const Tensor& av2 = tp.val(ai);
        const Tensor& bv2 = tp.val(bi);
        const std::size_t m2 = av2.rows(), k2 = av2.cols(), n2 = bv2.cols();
        if (tp.requires_grad(ai)) {
            // dA[i][p] += sum_j dY[i][j] * B[p][j]
            Tensor& ga = tp.grad(ai);
            for (std::size_t i = 0; i < m2; ++i) {
                const double* gyrow = &gy.data()[i * n2];
                double* garow = &ga.data()[i * k2];
                for (std::size_t p = 0; p < k2; ++p) {
                    const double* brow = &bv2.data()[p * n2];
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n2; ++j) acc += gyrow[j] * brow[j];
                    garow[p] += acc;
                }
            }
        }
        if (tp.requires_grad(bi)) {
            // dB[p][j] += sum_i A[i][p] * dY[i][j]
            Tensor& gb = tp.grad(bi);
            for (std::size_t i = 0; i < m2; ++i) {
                const double* arow = &av2.data()[i * k2];
                const double* gyrow = &gy.data()[i * n2];
                for (std::size_t p = 0; p < k2; ++p) {
                    const double aval = arow[p];
                    if (aval == 0.0) continue;
                    double* gbrow = &gb.data()[p * n2];
                    for (std::size_t j = 0; j < n2; ++j) gbrow[j] += aval * gyrow[j];
                }
            }
        }
    });
    return y;
}

Var transpose(Var a) {
    Tape& t = *a.tape;
    const Tensor& av = t.val(a.idx);
    const std::size_t m = av.rows(), n = av.cols();
    Tensor out(n, m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out(j, i) = av(i, j);
    const bool rg = t.recording && t.requires_grad(a.idx);
    if (!rg) return t.push(std::move(out), false, nullptr);
    const std::size_t ai = a.idx;
    Var y = t.push(std::move(out), true, nullptr);
    const std::size_t yi = y.idx;
    t.set_backward(yi, [ai, yi](Tape& tp) {
        const Tensor& gy = tp.grad(yi);
        Tensor& ga = tp.grad(ai);
        const std::size_t m2 = ga.rows(), n2 = ga.cols();
        for (std::size_t i = 0; i < m2; ++i)
            for (std::size_t j = 0; j < n2; ++j) ga(i, j) += gy(j, i);
    });
    return y;
}

Var affine_const(Var a, double mconst, double cconst) {
    Tape& t = *a.tape;
    Tensor out = t.val(a.idx);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mconst * out[i] + cconst;
    const bool rg = t.recording && t.requires_grad(a.idx);
    if (!rg) return t.push(std::move(out), false, nullptr);
    const std::size_t ai = a.idx;
    Var y = t.push(std::move(out), true, nullptr);
    const std::size_t yi = y.idx;
    t.set_backward(yi, [ai, yi, mconst](Tape& tp) {
        const Tensor& gy = tp.grad(yi);
        Tensor& ga = tp.grad(ai);
        for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += mconst * gy[i];
    });
    return y;
}

Var activate(Var a, Activation act) {
    if (act == Activation::identity) return a;
    Tape& t = *a.tape;
    const Tensor& av = t.val(a.idx);
    Tensor out = av;
    switch (act) {
        case Activation::tanh:
            for (double& v : out.data()) v = std::tanh(v);
            break;
        case Activation::relu:
            for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::softplus:
            for (double& v : out.data()) v = softplus_value(v);
            break;
        case Activation::sigmoid:
            for (double& v : out.data()) v = sigmoid_value(v);
            break;
        case Activation::identity:
            break;
    }
    const bool rg = t.recording && t.requires_grad(a.idx);
    if (!rg) return t.push(std::move(out), false, nullptr);
    const std::size_t ai = a.idx;
    Var y = t.push(std::move(out), true, nullptr);
    const std::size_t yi = y.idx;
    t.set_backward(yi, [ai, yi, act](Tape& tp) {
        const Tensor& gy = tp.grad(yi);
        const Tensor& yv = tp.val(yi);
        const Tensor& xv = tp.val(ai);
        Tensor& ga = tp.grad(ai);
        switch (act) {
            case Activation::tanh:
                for (std::size_t i = 0; i < gy.size(); ++i)
                    ga[i] += gy[i] * (1.0 - yv[i] * yv[i]);
                break;
            case Activation::relu:
                for (std::size_t i = 0; i < gy.size(); ++i)
                    ga[i] += xv[i] > 0.0 ? gy[i] : 0.0;
                break;
            case Activation::softplus:
                for (std::size_t i = 0; i < gy.size(); ++i)
                    ga[i] += gy[i] * sigmoid_value(xv[i]);
                break;
            case Activation::sigmoid:
                for (std::size_t i = 0; i < gy.size(); ++i)
                    ga[i] += gy[i] * yv[i] * (1.0 - yv[i]);
                break;
            case Activation::identity:
                break;
        }
    });
    return y;
}

Var slice_cols(Var a, std::size_t c0, std::size_t c1) {
    Tape& t = *a.tape;
    const Tensor& av = t.val(a.idx);
    if (c0 >= c1 || c1 > av.cols()) throw std::invalid_argument("slice_cols: bad range");
    const std::size_t m = av.rows(), w = c1 - c0;
    Tensor out(m, w, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < w; ++c) out(r, c) = av(r, c0 + c);
    const bool rg = t.recording && t.requires_grad(a.idx);
    if (!rg) return t.push(std::move(out), false, nullptr);
    const std::size_t ai = a.idx;
    Var y = t.push(std::move(out), true, nullptr);
    const std::size_t yi = y.idx;
    t.set_backward(yi, [ai, yi, c0](Tape& tp) {
        const Tensor& gy = tp.grad(yi);
        Tensor& ga = tp.grad(ai);
        const std::size_t m2 = gy.rows(), w2 = gy.cols();
        for (std::size_t r = 0; r < m2; ++r)
            for (std::size_t c = 0; c < w2; ++c) ga(r, c0 + c) += gy(r, c);
    });
    return y;
}

Var softmax_rows(Var a, bool causal) {
    Tape& t = *a.tape;
    const Tensor& av = t.val(a.idx);
    const std::size_t m = av.rows(), n = av.cols();
    if (causal && m != n)
        throw std::invalid_argument("softmax_rows: causal mask requires square scores");
    Tensor out(m, n, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t valid = causal ? r + 1 : n;
        double mx = av(r, 0);
        for (std::size_t c = 1; c < valid; ++c) mx = std::max(mx, av(r, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < valid; ++c) {
            const double e = std::exp(av(r, c) - mx);
            out(r, c) = e;
            denom += e;
        }
        for (std::size_t c = 0; c < valid; ++c) out(r, c) /= denom;
    }
    const bool rg = t.recording && t.requires_grad(a.idx);
    if (!rg) return t.push(std::move(out), false, nullptr);
    const std::size_t ai = a.idx;
    Var y = t.push(std::move(out), true, nullptr);
    const std::size_t yi = y.idx;
    t.set_backward(yi, [ai, yi, causal](Tape& tp) {
        const Tensor& gy = tp.grad(yi);
        const Tensor& yv = tp.val(yi);
        Tensor& ga = tp.grad(ai);
        const std::size_t m2 = yv.rows(), n2 = yv.cols();
        for (std::size_t r = 0; r < m2; ++r) {
            const std::size_t valid = causal ? r + 1 : n2;
            double dot = 0.0;
            for (std::size_t c = 0; c < valid; ++c) dot += gy(r, c) * yv(r, c);
            for (std::size_t c = 0; c < valid; ++c)
                ga(r, c) += yv(r, c) * (gy(r, c) - dot);
        }
    });
    return y;
}

Var sum_all(Var a) {
    Tape& t = *a.tape;
    const Tensor& av = t.val(a.idx);
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += av[i];
    const bool rg = t.recording && t.requires_grad(a.idx);
    if (!rg) return t.push(Tensor::scalar(acc), false, nullptr);
    const std::size_t ai = a.idx;
    Var y = t.push(Tensor::scalar(acc), true, nullptr);
    const std::size_t yi = y.idx;
    t.set_backward(yi, [ai, yi](Tape& tp) {
        const double g = tp.grad(yi)[0];
        Tensor& ga = tp.grad(ai);
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
    return y;
}

// --- Composite ops -------------------------------------------------------------

Var dense_forward(Var x, Var weights, Var bias, Activation act) {
    return activate(add_rowvec(matmul(x, weights), bias), act);
}

std::pair<Var, Var> lstm_cell_forward(Var x, Var h_prev, Var c_prev, const LstmVars& p) {
    Tape& t = *x.tape;
    const std::size_t hidden = t.val(p.w_h.idx).rows();
    Var gates = add_rowvec(add(matmul(x, p.w_x), matmul(h_prev, p.w_h)), p.b);
    Var gi = activate(slice_cols(gates, 0, hidden), Activation::sigmoid);
    Var gf = activate(slice_cols(gates, hidden, 2 * hidden), Activation::sigmoid);
    Var gg = activate(slice_cols(gates, 2 * hidden, 3 * hidden), Activation::tanh);
    Var go = activate(slice_cols(gates, 3 * hidden, 4 * hidden), Activation::sigmoid);
    Var c_new = add(mul(gf, c_prev), mul(gi, gg));
    Var h_new = mul(go, activate(c_new, Activation::tanh));
    return {h_new, c_new};
}

Var attention_forward(Var queries, Var keys, Var values, bool causal, Var* attention_weights) {
    Tape& t = *queries.tape;
    const Tensor& qv = t.val(queries.idx);
    const Tensor& kv = t.val(keys.idx);
    const Tensor& vv = t.val(values.idx);
    if (qv.cols() != kv.cols())
        throw std::invalid_argument("attention: query/key feature dimensions differ");
    if (kv.rows() != vv.rows())
        throw std::invalid_argument("attention: key/value sequence lengths differ");
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(qv.cols()));
    Var scores = affine_const(matmul(queries, transpose(keys)), inv_sqrt_d, 0.0);
    Var weights = softmax_rows(scores, causal);
    if (attention_weights) *attention_weights = weights;
    return matmul(weights, values);
}

Var gaussian_nll(Var mu, Var sigma, const Tensor& target) {
    Tape& t = *mu.tape;
    const Tensor& mv = t.val(mu.idx);
    const Tensor& sv = t.val(sigma.idx);
    check_same_shape(mv, sv, "gaussian_nll");
    check_same_shape(mv, target, "gaussian_nll");
    const std::size_t n = mv.size();
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = target[i] - mv[i];
        acc += kHalfLog2Pi + std::log(sv[i]) + d * d / (2.0 * sv[i] * sv[i]);
    }
    acc /= static_cast<double>(n);
    const bool rg = t.recording && (t.requires_grad(mu.idx) || t.requires_grad(sigma.idx));
    if (!rg) return t.push(Tensor::scalar(acc), false, nullptr);
    const std::size_t mi = mu.idx, si = sigma.idx;
    Tensor tgt = target;
    Var y = t.push(Tensor::scalar(acc), true, nullptr);
    const std::size_t yi = y.idx;
    t.set_backward(yi, [mi, si, yi, tgt = std::move(tgt)](Tape& tp) {
        const double g = tp.grad(yi)[0];
        const Tensor& mv2 = tp.val(mi);
        const Tensor& sv2 = tp.val(si);
        const double invn = 1.0 / static_cast<double>(mv2.size());
        if (tp.requires_grad(mi)) {
            Tensor& gm = tp.grad(mi);
            for (std::size_t i = 0; i < mv2.size(); ++i) {
                const double s2 = sv2[i] * sv2[i];
                gm[i] += g * invn * (mv2[i] - tgt[i]) / s2;
            }
        }
        if (tp.requires_grad(si)) {
            Tensor& gs = tp.grad(si);
            for (std::size_t i = 0; i < mv2.size(); ++i) {
                const double d = tgt[i] - mv2[i];
                const double s = sv2[i];
                gs[i] += g * invn * (1.0 / s - d * d / (s * s * s));
            }
        }
    });
    return y;
}

Var mse_loss(Var pred, const Tensor& target) {
    Tape& t = *pred.tape;
    const Tensor& pv = t.val(pred.idx);
    check_same_shape(pv, target, "mse_loss");
    const std::size_t n = pv.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = pv[i] - target[i];
        acc += d * d;
    }
    acc /= static_cast<double>(n);
    const bool rg = t.recording && t.requires_grad(pred.idx);
    if (!rg) return t.push(Tensor::scalar(acc), false, nullptr);
    const std::size_t pi = pred.idx;
    Tensor tgt = target;
    Var y = t.push(Tensor::scalar(acc), true, nullptr);
    const std::size_t yi = y.idx;
    t.set_backward(yi, [pi, yi, tgt = std::move(tgt)](Tape& tp) {
        const double g = tp.grad(yi)[0];
        const Tensor& pv2 = tp.val(pi);
        Tensor& gp = tp.grad(pi);
        const double scale = 2.0 * g / static_cast<double>(pv2.size());
        for (std::size_t i = 0; i < pv2.size(); ++i) gp[i] += scale * (pv2[i] - tgt[i]);
    });
    return y;
}

} // namespace prb::nn
