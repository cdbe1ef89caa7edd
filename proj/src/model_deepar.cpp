#include <string>

#include "models_internal.hpp"

// Autoregressive recurrent estimator: a stacked LSTM consumes the previous
// hour's (scaled) value plus calendar covariates at every step and a
// Gaussian head emits one distribution per step. Training teacher-forces
// the whole context+target range; prediction unrolls the context, then
// draws sample paths ancestrally with each sampled value fed back as the
// next input. The sample dimension rides the tensor row axis so all
// evaluation paths advance in lockstep.

namespace prb::models::detail {

using nn::Activation;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

constexpr const char* kMuW = "mu.w";
constexpr const char* kMuB = "mu.b";
constexpr const char* kSigmaW = "sigma.w";
constexpr const char* kSigmaB = "sigma.b";

std::string layer_name(int l, const char* part) {
    return "lstm" + std::to_string(l) + "." + part;
}

nn::LstmVars layer_vars(const Attached& at, int l) {
    return nn::LstmVars{at(layer_name(l, "wx")), at(layer_name(l, "wh")), at(layer_name(l, "b"))};
}

/// One stacked-LSTM step. states holds (h, c) per layer and is updated.
Var stacked_step(const Attached& at, const EstimatorConfig& cfg, Var x,
                 std::vector<std::pair<Var, Var>>& states) {
    Var input = x;
    for (int l = 0; l < cfg.deepar_rnn_layers; ++l) {
        auto [h, c] = nn::lstm_cell_forward(input, states[l].first, states[l].second,
                                            layer_vars(at, l));
        states[l] = {h, c};
        input = h;
    }
    return input;
}

void gaussian_head(const Attached& at, Var h, Var& mu, Var& sigma) {
    mu = nn::dense_forward(h, at(kMuW), at(kMuB), Activation::identity);
    sigma = nn::affine_const(nn::dense_forward(h, at(kSigmaW), at(kSigmaB), Activation::softplus),
                             1.0, kSigmaFloor);
}

} // namespace

nn::ParameterSet deepar_init(const EstimatorConfig& cfg, Rng& rng) {
    nn::ParameterSet params;
    const std::size_t hidden = static_cast<std::size_t>(cfg.deepar_cells_per_layer);
    for (int l = 0; l < cfg.deepar_rnn_layers; ++l) {
        const std::size_t in = l == 0 ? 3 : hidden; // value + 2 covariates
        params.add(layer_name(l, "wx"), init_weight(in, 4 * hidden, rng));
        params.add(layer_name(l, "wh"), init_weight(hidden, 4 * hidden, rng));
        params.add(layer_name(l, "b"), init_weight_vec(4 * hidden, in, rng));
    }
    params.add(kMuW, init_weight(hidden, 1, rng));
    params.add(kMuB, init_weight_vec(1, hidden, rng));
    params.add(kSigmaW, init_weight(hidden, 1, rng));
    params.add(kSigmaB, init_weight_vec(1, hidden, rng));
    return params;
}

Var deepar_window_loss(Tape& tape, const Attached& at, const TrainingWindow& w,
                       const EstimatorConfig& cfg) {
    const std::size_t hidden = static_cast<std::size_t>(cfg.deepar_cells_per_layer);

    // Observed range: context followed by target, predicted one step ahead.
    std::vector<double> obs = w.context;
    obs.insert(obs.end(), w.target.begin(), w.target.end());

    std::vector<std::pair<Var, Var>> states(
        static_cast<std::size_t>(cfg.deepar_rnn_layers),
        {tape.constant(Tensor(1, hidden)), tape.constant(Tensor(1, hidden))});

    Var total;
    bool first = true;
    for (std::size_t t = 1; t < obs.size(); ++t) {
        Var x = tape.constant(Tensor::matrix(1, 3, {obs[t - 1], w.cov_hour[t], w.cov_dow[t]}));
        Var h = stacked_step(at, cfg, x, states);
        Var mu, sigma;
        gaussian_head(at, h, mu, sigma);
        Var nll = nn::gaussian_nll(mu, sigma, Tensor::scalar(obs[t]));
        total = first ? nll : nn::add(total, nll);
        first = false;
    }
    return nn::affine_const(total, 1.0 / static_cast<double>(obs.size() - 1), 0.0);
}

std::vector<std::vector<double>> deepar_predict_scaled(const Predictor& p,
                                                       const std::vector<double>& scaled_context,
                                                       const std::vector<double>& cov_hour,
                                                       const std::vector<double>& cov_dow,
                                                       Rng& rng) {
    const EstimatorConfig& cfg = p.config;
    const std::size_t ctx = static_cast<std::size_t>(cfg.context_length);
    const std::size_t hor = static_cast<std::size_t>(cfg.horizon);
    const std::size_t hidden = static_cast<std::size_t>(cfg.deepar_cells_per_layer);
    const std::size_t num = static_cast<std::size_t>(cfg.num_eval_samples);
    const std::size_t len = scaled_context.size();
    const std::size_t base = len - ctx;
    const int layers = cfg.deepar_rnn_layers;

    // Warm-up over the observed context, single row. Raw state tensors are
    // carried across per-step tapes to keep peak memory flat.
    std::vector<Tensor> hs(static_cast<std::size_t>(layers), Tensor(1, hidden));
    std::vector<Tensor> cs(static_cast<std::size_t>(layers), Tensor(1, hidden));
    nn::ParameterSet& params = const_cast<nn::ParameterSet&>(p.params);
    for (std::size_t t = base + 1; t < len; ++t) {
        Tape tape;
        tape.recording = false;
        Attached at = attach(tape, params);
        std::vector<std::pair<Var, Var>> states;
        for (int l = 0; l < layers; ++l)
            states.push_back({tape.constant(hs[static_cast<std::size_t>(l)]),
                              tape.constant(cs[static_cast<std::size_t>(l)])});
        Var x = tape.constant(
            Tensor::matrix(1, 3, {scaled_context[t - 1], cov_hour[t], cov_dow[t]}));
        stacked_step(at, cfg, x, states);
        for (int l = 0; l < layers; ++l) {
            hs[static_cast<std::size_t>(l)] = states[static_cast<std::size_t>(l)].first.value();
            cs[static_cast<std::size_t>(l)] = states[static_cast<std::size_t>(l)].second.value();
        }
    }

    // Broadcast the warmed state across the sample rows.
    std::vector<Tensor> hs_s, cs_s;
    for (int l = 0; l < layers; ++l) {
        Tensor hrow(num, hidden), crow(num, hidden);
        for (std::size_t s = 0; s < num; ++s)
            for (std::size_t j = 0; j < hidden; ++j) {
                hrow(s, j) = hs[static_cast<std::size_t>(l)](0, j);
                crow(s, j) = cs[static_cast<std::size_t>(l)](0, j);
            }
        hs_s.push_back(std::move(hrow));
        cs_s.push_back(std::move(crow));
    }

    std::vector<std::vector<double>> paths(num, std::vector<double>(hor));
    std::vector<double> prev(num, scaled_context[len - 1]);
    for (std::size_t j = 0; j < hor; ++j) {
        Tape tape;
        tape.recording = false;
        Attached at = attach(tape, params);
        std::vector<std::pair<Var, Var>> states;
        for (int l = 0; l < layers; ++l)
            states.push_back({tape.constant(hs_s[static_cast<std::size_t>(l)]),
                              tape.constant(cs_s[static_cast<std::size_t>(l)])});
        Tensor x(num, 3);
        for (std::size_t s = 0; s < num; ++s) {
            x(s, 0) = prev[s];
            x(s, 1) = cov_hour[len + j];
            x(s, 2) = cov_dow[len + j];
        }
        Var h = stacked_step(at, cfg, tape.constant(std::move(x)), states);
        Var mu, sigma;
        gaussian_head(at, h, mu, sigma);
        const Tensor& mv = mu.value();
        const Tensor& sv = sigma.value();
        for (std::size_t s = 0; s < num; ++s) {
            const double y = mv(s, 0) + sv(s, 0) * rng.normal();
            paths[s][j] = y;
            prev[s] = y;
        }
        for (int l = 0; l < layers; ++l) {
            hs_s[static_cast<std::size_t>(l)] = states[static_cast<std::size_t>(l)].first.value();
            cs_s[static_cast<std::size_t>(l)] = states[static_cast<std::size_t>(l)].second.value();
        }
    }
    return paths;
}

} // namespace prb::models::detail
