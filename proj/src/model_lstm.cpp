#include <string>

#include "models_internal.hpp"

// Deterministic sequential baseline: a single-layer LSTM with the
// configured neuron count (1 in the benchmark configuration) trained
// one step ahead. At prediction time the recurrent state is rebuilt by
// replaying the entire provided history through the cell, and the
// 24-hour block comes from recursing that one-step primitive with each
// prediction appended to the history. This is the stateful sequential
// inference profile of the deterministic baseline: cost grows with the
// stored history, unlike the fixed-context probabilistic estimators.

namespace prb::models::detail {

using nn::Activation;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

nn::LstmVars cell_vars(const Attached& at) {
    return nn::LstmVars{at("lstm0.wx"), at("lstm0.wh"), at("lstm0.b")};
}

/// Runs the cell over all inputs and projects the final hidden state to
/// the next-hour value.
double one_step_ahead(nn::ParameterSet& params, const EstimatorConfig& cfg,
                      const std::vector<double>& values, const std::vector<double>& cov_hour,
                      const std::vector<double>& cov_dow) {
    const std::size_t hidden = static_cast<std::size_t>(cfg.lstm_neurons);
    Tape tape;
    tape.recording = false;
    Attached at = attach(tape, params);
    Var h = tape.constant(Tensor(1, hidden));
    Var c = tape.constant(Tensor(1, hidden));
    const nn::LstmVars cell = cell_vars(at);
    for (std::size_t t = 0; t < values.size(); ++t) {
        Var x = tape.constant(Tensor::matrix(1, 3, {values[t], cov_hour[t], cov_dow[t]}));
        auto [h2, c2] = nn::lstm_cell_forward(x, h, c, cell);
        h = h2;
        c = c2;
    }
    Var out = nn::dense_forward(h, at("out.w"), at("out.b"), Activation::identity);
    return out.value()[0];
}

} // namespace

nn::ParameterSet lstm_init(const EstimatorConfig& cfg, Rng& rng) {
    nn::ParameterSet params;
    const std::size_t hidden = static_cast<std::size_t>(cfg.lstm_neurons);
    params.add("lstm0.wx", init_weight(3, 4 * hidden, rng));
    params.add("lstm0.wh", init_weight(hidden, 4 * hidden, rng));
    params.add("lstm0.b", init_weight_vec(4 * hidden, 3, rng));
    params.add("out.w", init_weight(hidden, 1, rng));
    params.add("out.b", init_weight_vec(1, hidden, rng));
    return params;
}

Var lstm_window_loss(Tape& tape, const Attached& at, const TrainingWindow& w,
                     const EstimatorConfig& cfg) {
    const std::size_t hidden = static_cast<std::size_t>(cfg.lstm_neurons);
    Var h = tape.constant(Tensor(1, hidden));
    Var c = tape.constant(Tensor(1, hidden));
    const nn::LstmVars cell = cell_vars(at);
    for (std::size_t t = 0; t < w.context.size(); ++t) {
        Var x = tape.constant(
            Tensor::matrix(1, 3, {w.context[t], w.cov_hour[t], w.cov_dow[t]}));
        auto [h2, c2] = nn::lstm_cell_forward(x, h, c, cell);
        h = h2;
        c = c2;
    }
    Var out = nn::dense_forward(h, at("out.w"), at("out.b"), Activation::identity);
    return nn::mse_loss(out, Tensor::scalar(w.target[0]));
}

std::vector<std::vector<double>> lstm_predict_scaled(const Predictor& p,
                                                     const std::vector<double>& scaled_context,
                                                     const std::vector<double>& cov_hour,
                                                     const std::vector<double>& cov_dow,
                                                     Rng& rng) {
    (void)rng; // deterministic single path
    const EstimatorConfig& cfg = p.config;
    const std::size_t hor = static_cast<std::size_t>(cfg.horizon);
    nn::ParameterSet& params = const_cast<nn::ParameterSet&>(p.params);

    std::vector<double> history = scaled_context;
    history.reserve(history.size() + hor);
    std::vector<std::vector<double>> paths(1, std::vector<double>(hor));
    for (std::size_t k = 0; k < hor; ++k) {
        const double y = one_step_ahead(params, cfg, history, cov_hour, cov_dow);
        paths[0][k] = y;
        history.push_back(y);
    }
    return paths;
}

} // namespace prb::models::detail
