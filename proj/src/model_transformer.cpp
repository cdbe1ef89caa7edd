#include <cmath>
#include <string>
#include <vector>

#include "models_internal.hpp"

// Encoder-decoder transformer, single attention head, one layer each side,
// sinusoidal position encoding over the context+target positions, residual
// connections around attention and feed-forward blocks. Training runs the
// teacher-forced decode on the tape; sampling uses an incremental decoder
// with per-path key/value caches over raw tensors (the quadratic
// recompute would otherwise dominate prediction). A regression test pins
// both paths to identical outputs.

namespace prb::models::detail {

using nn::Activation;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

Tensor pe_matrix(std::size_t first_pos, std::size_t count, std::size_t dim) {
    Tensor pe(count, dim);
    for (std::size_t r = 0; r < count; ++r) {
        const auto row = position_encoding(first_pos + r, dim);
        for (std::size_t c = 0; c < dim; ++c) pe(r, c) = row[c];
    }
    return pe;
}

Var embed_tokens(Tape& tape, const Attached& at, const std::string& prefix,
                 const std::vector<double>& values, const std::vector<double>& cov_hour,
                 const std::vector<double>& cov_dow, std::size_t cov_offset,
                 std::size_t first_pos, std::size_t dim) {
    const std::size_t n = values.size();
    Tensor tokens(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        tokens(i, 0) = values[i];
        tokens(i, 1) = cov_hour[cov_offset + i];
        tokens(i, 2) = cov_dow[cov_offset + i];
    }
    Var x = nn::dense_forward(tape.constant(std::move(tokens)), at(prefix + ".embed.w"),
                              at(prefix + ".embed.b"), Activation::identity);
    return nn::add(x, tape.constant(pe_matrix(first_pos, n, dim)));
}

Var attention_block(const Attached& at, const std::string& prefix, Var queries_in, Var kv_in,
                    bool causal) {
    Var q = nn::matmul(queries_in, at(prefix + ".wq"));
    Var k = nn::matmul(kv_in, at(prefix + ".wk"));
    Var v = nn::matmul(kv_in, at(prefix + ".wv"));
    Var a = nn::attention_forward(q, k, v, causal);
    return nn::add(queries_in, nn::matmul(a, at(prefix + ".wo")));
}

Var ffn_block(const Attached& at, const std::string& prefix, Var x) {
    Var f = nn::dense_forward(x, at(prefix + ".w1"), at(prefix + ".b1"), Activation::relu);
    f = nn::dense_forward(f, at(prefix + ".w2"), at(prefix + ".b2"), Activation::identity);
    return nn::add(x, f);
}

Var encode(Tape& tape, const Attached& at, const EstimatorConfig& cfg,
           const std::vector<double>& enc_values, const std::vector<double>& cov_hour,
           const std::vector<double>& cov_dow, std::size_t cov_offset) {
    const std::size_t dim = static_cast<std::size_t>(cfg.transformer_model_dim);
    Var x = embed_tokens(tape, at, "enc", enc_values, cov_hour, cov_dow, cov_offset, 0, dim);
    x = attention_block(at, "enc.attn", x, x, false);
    return ffn_block(at, "enc.ffn", x);
}

// Row-vector helpers for the incremental decoder.

std::vector<double> vecmat(const std::vector<double>& x, const Tensor& w) {
    std::vector<double> y(w.cols(), 0.0);
    for (std::size_t i = 0; i < w.rows(); ++i) {
        const double xv = x[i];
        if (xv == 0.0) continue;
        for (std::size_t j = 0; j < w.cols(); ++j) y[j] += xv * w(i, j);
    }
    return y;
}

void add_inplace(std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

} // namespace

nn::ParameterSet transformer_init(const EstimatorConfig& cfg, Rng& rng) {
    nn::ParameterSet params;
    const std::size_t d = static_cast<std::size_t>(cfg.transformer_model_dim);
    const std::size_t f = static_cast<std::size_t>(cfg.transformer_ffn_dim);

    auto add_attention = [&](const std::string& prefix) {
        params.add(prefix + ".wq", init_weight(d, d, rng));
        params.add(prefix + ".wk", init_weight(d, d, rng));
        params.add(prefix + ".wv", init_weight(d, d, rng));
        params.add(prefix + ".wo", init_weight(d, d, rng));
    };
    auto add_ffn = [&](const std::string& prefix) {
        params.add(prefix + ".w1", init_weight(d, f, rng));
        params.add(prefix + ".b1", init_weight_vec(f, d, rng));
        params.add(prefix + ".w2", init_weight(f, d, rng));
        params.add(prefix + ".b2", init_weight_vec(d, f, rng));
    };

    params.add("enc.embed.w", init_weight(3, d, rng));
    params.add("enc.embed.b", init_weight_vec(d, 3, rng));
    add_attention("enc.attn");
    add_ffn("enc.ffn");
    params.add("dec.embed.w", init_weight(3, d, rng));
    params.add("dec.embed.b", init_weight_vec(d, 3, rng));
    add_attention("dec.self");
    add_attention("dec.cross");
    add_ffn("dec.ffn");
    params.add("mu.w", init_weight(d, 1, rng));
    params.add("mu.b", init_weight_vec(1, d, rng));
    params.add("sigma.w", init_weight(d, 1, rng));
    params.add("sigma.b", init_weight_vec(1, d, rng));
    return params;
}

void transformer_forward_teacher(Tape& tape, const Attached& at,
                                 const std::vector<double>& enc_values,
                                 const std::vector<double>& dec_prev_values,
                                 const std::vector<double>& cov_hour,
                                 const std::vector<double>& cov_dow,
                                 const EstimatorConfig& cfg, Var& mu_out, Var& sigma_out) {
    const std::size_t ctx = enc_values.size();
    const std::size_t dim = static_cast<std::size_t>(cfg.transformer_model_dim);

    Var enc_out = encode(tape, at, cfg, enc_values, cov_hour, cov_dow, 0);

    Var y = embed_tokens(tape, at, "dec", dec_prev_values, cov_hour, cov_dow, ctx, ctx, dim);
    y = attention_block(at, "dec.self", y, y, true);
    y = attention_block(at, "dec.cross", y, enc_out, false);
    y = ffn_block(at, "dec.ffn", y);

    mu_out = nn::dense_forward(y, at("mu.w"), at("mu.b"), Activation::identity);
    sigma_out = nn::affine_const(
        nn::dense_forward(y, at("sigma.w"), at("sigma.b"), Activation::softplus), 1.0,
        kSigmaFloor);
}

Var transformer_window_loss(Tape& tape, const Attached& at, const TrainingWindow& w,
                            const EstimatorConfig& cfg) {
    std::vector<double> dec_prev(w.target.size());
    dec_prev[0] = w.context.back();
    for (std::size_t j = 1; j < w.target.size(); ++j) dec_prev[j] = w.target[j - 1];

    Var mu, sigma;
    transformer_forward_teacher(tape, at, w.context, dec_prev, w.cov_hour, w.cov_dow, cfg, mu,
                                sigma);
    Tensor target(w.target.size(), 1);
    for (std::size_t j = 0; j < w.target.size(); ++j) target(j, 0) = w.target[j];
    return nn::gaussian_nll(mu, sigma, target);
}

std::vector<std::vector<double>> transformer_predict_scaled(
    const Predictor& p, const std::vector<double>& scaled_context,
    const std::vector<double>& cov_hour, const std::vector<double>& cov_dow, Rng& rng) {
    const EstimatorConfig& cfg = p.config;
    const std::size_t ctx = static_cast<std::size_t>(cfg.context_length);
    const std::size_t hor = static_cast<std::size_t>(cfg.horizon);
    const std::size_t d = static_cast<std::size_t>(cfg.transformer_model_dim);
    const std::size_t num = static_cast<std::size_t>(cfg.num_eval_samples);
    const std::size_t len = scaled_context.size();
    const std::size_t base = len - ctx;
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

    nn::ParameterSet& params = const_cast<nn::ParameterSet&>(p.params);

    // Encoder output over the context window, via the same tape path as
    // training (trailing ctx entries of the provided history).
    Tensor enc_out;
    {
        Tape tape;
        tape.recording = false;
        Attached at = attach(tape, params);
        std::vector<double> enc_values(scaled_context.end() - static_cast<std::ptrdiff_t>(ctx),
                                       scaled_context.end());
        std::vector<double> ch(cov_hour.begin() + static_cast<std::ptrdiff_t>(base),
                               cov_hour.end());
        std::vector<double> cd(cov_dow.begin() + static_cast<std::ptrdiff_t>(base),
                               cov_dow.end());
        enc_out = encode(tape, at, cfg, enc_values, ch, cd, 0).value();
    }

    const Tensor& wq_self = params.at("dec.self.wq").value;
    const Tensor& wk_self = params.at("dec.self.wk").value;
    const Tensor& wv_self = params.at("dec.self.wv").value;
    const Tensor& wo_self = params.at("dec.self.wo").value;
    const Tensor& wq_cross = params.at("dec.cross.wq").value;
    const Tensor& wk_cross = params.at("dec.cross.wk").value;
    const Tensor& wv_cross = params.at("dec.cross.wv").value;
    const Tensor& wo_cross = params.at("dec.cross.wo").value;
    const Tensor& embed_w = params.at("dec.embed.w").value;
    const Tensor& embed_b = params.at("dec.embed.b").value;
    const Tensor& ffn_w1 = params.at("dec.ffn.w1").value;
    const Tensor& ffn_b1 = params.at("dec.ffn.b1").value;
    const Tensor& ffn_w2 = params.at("dec.ffn.w2").value;
    const Tensor& ffn_b2 = params.at("dec.ffn.b2").value;
    const Tensor& mu_w = params.at("mu.w").value;
    const Tensor& mu_b = params.at("mu.b").value;
    const Tensor& sigma_w = params.at("sigma.w").value;
    const Tensor& sigma_b = params.at("sigma.b").value;

    // Cross-attention keys/values from the encoder are shared by all paths.
    std::vector<std::vector<double>> cross_k(ctx), cross_v(ctx);
    for (std::size_t i = 0; i < ctx; ++i) {
        std::vector<double> row(enc_out.data().begin() + static_cast<std::ptrdiff_t>(i * d),
                                enc_out.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
        cross_k[i] = vecmat(row, wk_cross);
        cross_v[i] = vecmat(row, wv_cross);
    }

    std::vector<std::vector<std::vector<double>>> key_cache(num), value_cache(num);
    std::vector<std::vector<double>> paths(num, std::vector<double>(hor));
    std::vector<double> prev(num, scaled_context[len - 1]);

    std::vector<double> token(3), scores;
    for (std::size_t t = 0; t < hor; ++t) {
        const auto pe = position_encoding(ctx + t, d);
        for (std::size_t s = 0; s < num; ++s) {
            token[0] = prev[s];
            token[1] = cov_hour[len + t];
            token[2] = cov_dow[len + t];
            std::vector<double> e = vecmat(token, embed_w);
            for (std::size_t j = 0; j < d; ++j) e[j] += embed_b[j] + pe[j];

            // Causal self-attention over this path's decoded prefix.
            std::vector<double> q = vecmat(e, wq_self);
            key_cache[s].push_back(vecmat(e, wk_self));
            value_cache[s].push_back(vecmat(e, wv_self));
            const std::size_t steps = key_cache[s].size();
            scores.assign(steps, 0.0);
            double mx = -1e300;
            for (std::size_t i = 0; i < steps; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) acc += q[j] * key_cache[s][i][j];
                scores[i] = acc * inv_sqrt_d;
                mx = std::max(mx, scores[i]);
            }
            double denom = 0.0;
            for (double& sc : scores) {
                sc = std::exp(sc - mx);
                denom += sc;
            }
            std::vector<double> attn(d, 0.0);
            for (std::size_t i = 0; i < steps; ++i) {
                const double w = scores[i] / denom;
                for (std::size_t j = 0; j < d; ++j) attn[j] += w * value_cache[s][i][j];
            }
            std::vector<double> y1 = vecmat(attn, wo_self);
            add_inplace(y1, e);

            // Cross-attention against the encoder output.
            std::vector<double> qc = vecmat(y1, wq_cross);
            scores.assign(ctx, 0.0);
            mx = -1e300;
            for (std::size_t i = 0; i < ctx; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < d; ++j) acc += qc[j] * cross_k[i][j];
                scores[i] = acc * inv_sqrt_d;
                mx = std::max(mx, scores[i]);
            }
            denom = 0.0;
            for (double& sc : scores) {
                sc = std::exp(sc - mx);
                denom += sc;
            }
            std::vector<double> cattn(d, 0.0);
            for (std::size_t i = 0; i < ctx; ++i) {
                const double w = scores[i] / denom;
                for (std::size_t j = 0; j < d; ++j) cattn[j] += w * cross_v[i][j];
            }
            std::vector<double> y2 = vecmat(cattn, wo_cross);
            add_inplace(y2, y1);

            std::vector<double> f = vecmat(y2, ffn_w1);
            for (std::size_t j = 0; j < f.size(); ++j)
                f[j] = std::max(0.0, f[j] + ffn_b1[j]);
            std::vector<double> y3 = vecmat(f, ffn_w2);
            for (std::size_t j = 0; j < d; ++j) y3[j] += ffn_b2[j];
            add_inplace(y3, y2);

            double mu = mu_b[0], sig = sigma_b[0];
            for (std::size_t j = 0; j < d; ++j) {
                mu += y3[j] * mu_w(j, 0);
                sig += y3[j] * sigma_w(j, 0);
            }
            sig = nn::softplus_value(sig) + kSigmaFloor;

            const double y = mu + sig * rng.normal();
            paths[s][t] = y;
            prev[s] = y;
        }
    }
    return paths;
}

} // namespace prb::models::detail
