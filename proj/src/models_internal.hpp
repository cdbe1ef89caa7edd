#ifndef PRB_MODELS_INTERNAL_HPP
#define PRB_MODELS_INTERNAL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "prb/models.hpp"
#include "prb/rng.hpp"
#include "prb/tape.hpp"

namespace prb::models::detail {

/// Parameter leaves attached to a tape for one forward pass, looked up by
/// registration name.
struct Attached {
    nn::Tape* tape = nullptr;
    std::vector<nn::Var> vars;
    const nn::ParameterSet* params = nullptr;

    nn::Var operator()(const std::string& name) const;
};

Attached attach(nn::Tape& tape, nn::ParameterSet& params);

/// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] weight init, zero biases.
nn::Tensor init_weight(std::size_t rows, std::size_t cols, Rng& rng);
nn::Tensor init_weight_vec(std::size_t n, std::size_t fan_in, Rng& rng);

/// Softplus floor keeping sigma strictly positive on near-deterministic data.
constexpr double kSigmaFloor = 1e-4;
constexpr double kGradClipNorm = 10.0;
constexpr double kAdamLearningRate = 1e-3;

// Per-model construction, training loss, and sampled prediction (scaled
// space). Prediction returns num_samples x horizon paths.

nn::ParameterSet sff_init(const EstimatorConfig& cfg, Rng& rng);
nn::Var sff_window_loss(nn::Tape& tape, const Attached& at, const TrainingWindow& w,
                        const EstimatorConfig& cfg);
std::vector<std::vector<double>> sff_predict_scaled(const Predictor& p,
                                                    const std::vector<double>& scaled_context,
                                                    const std::vector<double>& cov_hour,
                                                    const std::vector<double>& cov_dow,
                                                    Rng& rng);

nn::ParameterSet deepar_init(const EstimatorConfig& cfg, Rng& rng);
nn::Var deepar_window_loss(nn::Tape& tape, const Attached& at, const TrainingWindow& w,
                           const EstimatorConfig& cfg);
std::vector<std::vector<double>> deepar_predict_scaled(const Predictor& p,
                                                       const std::vector<double>& scaled_context,
                                                       const std::vector<double>& cov_hour,
                                                       const std::vector<double>& cov_dow,
                                                       Rng& rng);

nn::ParameterSet transformer_init(const EstimatorConfig& cfg, Rng& rng);
nn::Var transformer_window_loss(nn::Tape& tape, const Attached& at, const TrainingWindow& w,
                                const EstimatorConfig& cfg);
std::vector<std::vector<double>> transformer_predict_scaled(
    const Predictor& p, const std::vector<double>& scaled_context,
    const std::vector<double>& cov_hour, const std::vector<double>& cov_dow, Rng& rng);

/// Teacher-forced tape decode used by training; exposed so tests can pin
/// the incremental sampling decoder against it.
void transformer_forward_teacher(nn::Tape& tape, const Attached& at,
                                 const std::vector<double>& enc_values,
                                 const std::vector<double>& dec_prev_values,
                                 const std::vector<double>& cov_hour,
                                 const std::vector<double>& cov_dow,
                                 const EstimatorConfig& cfg, nn::Var& mu_out, nn::Var& sigma_out);

nn::ParameterSet lstm_init(const EstimatorConfig& cfg, Rng& rng);
nn::Var lstm_window_loss(nn::Tape& tape, const Attached& at, const TrainingWindow& w,
                         const EstimatorConfig& cfg);
std::vector<std::vector<double>> lstm_predict_scaled(const Predictor& p,
                                                     const std::vector<double>& scaled_context,
                                                     const std::vector<double>& cov_hour,
                                                     const std::vector<double>& cov_dow,
                                                     Rng& rng);

/// Sinusoidal position encoding row (dim entries) for one position.
std::vector<double> position_encoding(std::size_t pos, std::size_t dim);

} // namespace prb::models::detail

#endif // PRB_MODELS_INTERNAL_HPP
