#include <string>

#include "models_internal.hpp"

// Simple feed-forward estimator: the scaled context window goes through the
// configured hidden layers and the output head is one (mu, sigma) pair per
// horizon step. The window is the model's only input; any temporal
// structure has to be read off the raw context, which is exactly the
// limitation the recurrent estimators are meant to overcome.

namespace prb::models::detail {

using nn::Activation;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

std::size_t sff_input_dim(const EstimatorConfig& cfg) {
    return static_cast<std::size_t>(cfg.context_length);
}

Tensor sff_input_row(const EstimatorConfig& cfg, const std::vector<double>& context_tail) {
    const std::size_t ctx = static_cast<std::size_t>(cfg.context_length);
    std::vector<double> row(context_tail.end() - static_cast<std::ptrdiff_t>(ctx),
                            context_tail.end());
    const std::size_t width = row.size();
    return Tensor::matrix(1, width, std::move(row));
}

/// Forward pass to the (mu, sigma) heads given a 1 x input_dim row.
void sff_heads(Tape& tape, const Attached& at, const EstimatorConfig& cfg, Var input,
               Var& mu, Var& sigma) {
    Var h = input;
    for (std::size_t l = 0; l < cfg.sff_hidden_dims.size(); ++l) {
        const std::string p = "h" + std::to_string(l);
        h = nn::dense_forward(h, at(p + ".w"), at(p + ".b"), Activation::tanh);
    }
    mu = nn::dense_forward(h, at("mu.w"), at("mu.b"), Activation::identity);
    sigma = nn::affine_const(
        nn::dense_forward(h, at("sigma.w"), at("sigma.b"), Activation::softplus), 1.0,
        kSigmaFloor);
    (void)tape;
}

} // namespace

nn::ParameterSet sff_init(const EstimatorConfig& cfg, Rng& rng) {
    nn::ParameterSet params;
    std::size_t in = sff_input_dim(cfg);
    for (std::size_t l = 0; l < cfg.sff_hidden_dims.size(); ++l) {
        const std::size_t out = static_cast<std::size_t>(cfg.sff_hidden_dims[l]);
        const std::string p = "h" + std::to_string(l);
        params.add(p + ".w", init_weight(in, out, rng));
        params.add(p + ".b", init_weight_vec(out, in, rng));
        in = out;
    }
    const std::size_t hor = static_cast<std::size_t>(cfg.horizon);
    params.add("mu.w", init_weight(in, hor, rng));
    params.add("mu.b", init_weight_vec(hor, in, rng));
    params.add("sigma.w", init_weight(in, hor, rng));
    params.add("sigma.b", init_weight_vec(hor, in, rng));
    return params;
}

Var sff_window_loss(Tape& tape, const Attached& at, const TrainingWindow& w,
                    const EstimatorConfig& cfg) {
    Var input = tape.constant(sff_input_row(cfg, w.context));
    Var mu, sigma;
    sff_heads(tape, at, cfg, input, mu, sigma);
    Tensor target = Tensor::matrix(1, w.target.size(), w.target);
    return nn::gaussian_nll(mu, sigma, target);
}

std::vector<std::vector<double>> sff_predict_scaled(const Predictor& p,
                                                    const std::vector<double>& scaled_context,
                                                    const std::vector<double>& cov_hour,
                                                    const std::vector<double>& cov_dow,
                                                    Rng& rng) {
    (void)cov_hour;
    (void)cov_dow;
    const EstimatorConfig& cfg = p.config;
    const std::size_t hor = static_cast<std::size_t>(cfg.horizon);

    Tape tape;
    tape.recording = false;
    Attached at = attach(tape, const_cast<nn::ParameterSet&>(p.params));
    Var input = tape.constant(sff_input_row(cfg, scaled_context));
    Var mu, sigma;
    sff_heads(tape, at, cfg, input, mu, sigma);
    const Tensor& mv = mu.value();
    const Tensor& sv = sigma.value();

    const std::size_t num = static_cast<std::size_t>(cfg.num_eval_samples);
    std::vector<std::vector<double>> paths(num, std::vector<double>(hor));
    for (std::size_t s = 0; s < num; ++s)
        for (std::size_t j = 0; j < hor; ++j) paths[s][j] = mv[j] + sv[j] * rng.normal();
    return paths;
}

} // namespace prb::models::detail
