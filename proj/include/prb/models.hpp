#ifndef PRB_MODELS_HPP
#define PRB_MODELS_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "prb/optimizer.hpp"
#include "prb/time_series.hpp"

namespace prb::models {

enum class ModelKind { lstm, sff, deepar, transformer };

std::string kind_name(ModelKind kind);
ModelKind kind_from_name(const std::string& name);

/**
 * Estimator hyperparameters. Defaults follow the benchmark configuration:
 * 5 epochs, batch size 1, context and prediction length 24 hours, 100
 * evaluation samples; per-kind blocks as listed. The LSTM baseline's
 * single hidden unit is its stated configuration, kept as-is.
 */
struct EstimatorConfig {
    ModelKind kind = ModelKind::deepar;
    int epochs = 5;
    int batch_size = 1;
    int context_length = 24;
    int horizon = 24;
    int num_eval_samples = 100;
    std::uint64_t seed = 1;

    std::vector<int> sff_hidden_dims = {40, 40};
    int deepar_rnn_layers = 2;
    int deepar_cells_per_layer = 40;
    int transformer_model_dim = 32;
    int transformer_ffn_dim = 4;
    int lstm_neurons = 1;

    void validate() const; // throws on non-positive dimensions
};

/**
 * One supervised slice: a scaled context window, the scaled target that
 * follows it, and calendar covariates (hour-of-day/24, day-of-week/7,
 * both in [0,1)) for every context+target step.
 */
struct TrainingWindow {
    std::vector<double> context;
    std::vector<double> target;
    std::vector<double> cov_hour; // context+target entries
    std::vector<double> cov_dow;
};

/// Every maximal stride-1 window: count = len - context - horizon + 1.
/// The series passed in is already scaled; timestamps drive the covariates.
std::vector<TrainingWindow> make_windows(const TimeSeries& scaled, int context_length,
                                         int horizon);

struct TrainingMeta {
    double wall_seconds = 0.0;
    double first_epoch_loss = 0.0;
    double final_epoch_loss = 0.0;
};

/**
 * An immutable trained model. Holds the snapshot of trained weights, the
 * scaler fitted on its training slice, and the training slice itself so
 * forecasts can roll forward from the end of training data.
 */
struct Predictor {
    ModelKind kind = ModelKind::deepar;
    EstimatorConfig config;
    Scaler scaler;
    nn::ParameterSet params;
    TrainingMeta meta;
    TimeSeries train_history;

    std::string fingerprint() const;
};

/// Trains one estimator on a demand series. Deterministic per (series, cfg).
Predictor train(const TimeSeries& series, const EstimatorConfig& cfg);

/**
 * Sample-based forecast of the next horizon hours following the given
 * context. Probabilistic kinds draw num_eval_samples paths; the LSTM
 * baseline returns a single deterministic path. Outputs are on the
 * original demand scale, clamped at zero.
 */
SampleForecast predict(const Predictor& p, const TimeSeries& context, std::uint64_t seed);

struct EvalResult {
    double mse = 0.0;
    double predict_seconds = 0.0;
    int blocks = 0;
};

/// Rolling evaluation over non-overlapping horizon-sized blocks of the
/// test slice, each predicted from all preceding data.
EvalResult evaluate(const Predictor& p, const TimeSeries& test, const EstimatorConfig& cfg);

/// Same protocol with an injectable forecast source (testing hook).
using ForecastFn = std::function<SampleForecast(const TimeSeries& context, std::uint64_t seed)>;
EvalResult evaluate_with(const ForecastFn& forecast, const TimeSeries& history,
                         const TimeSeries& test, const EstimatorConfig& cfg);

/// Writes <prefix>.prbm (binary weights) and <prefix>.json (config echo,
/// scaler, training metadata, training slice).
void save_predictor(const std::string& prefix, const Predictor& p);
Predictor load_predictor(const std::string& prefix);

/// Per-block prediction seed derivation used by evaluate().
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt);

} // namespace prb::models

#endif // PRB_MODELS_HPP
