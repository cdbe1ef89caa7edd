#include "prb/models.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "models_internal.hpp"
#include "prb/params_io.hpp"
#include "prb/rng.hpp"
#include "prb/time_util.hpp"

namespace prb::models {

using nn::Tape;
using nn::Tensor;
using nn::Var;

std::string kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::lstm: return "lstm";
        case ModelKind::sff: return "sff";
        case ModelKind::deepar: return "deepar";
        case ModelKind::transformer: return "transformer";
    }
    throw std::logic_error("unknown model kind");
}

ModelKind kind_from_name(const std::string& name) {
    if (name == "lstm") return ModelKind::lstm;
    if (name == "sff") return ModelKind::sff;
    if (name == "deepar") return ModelKind::deepar;
    if (name == "transformer") return ModelKind::transformer;
    throw std::invalid_argument("unknown model name: " + name);
}

void EstimatorConfig::validate() const {
    if (epochs < 1 || batch_size != 1 || context_length < 1 || horizon < 1 ||
        num_eval_samples < 1)
        throw std::invalid_argument("EstimatorConfig: non-positive dimension or batch size != 1");
    for (int d : sff_hidden_dims)
        if (d < 1) throw std::invalid_argument("EstimatorConfig: bad SFF hidden dim");
    if (sff_hidden_dims.empty()) throw std::invalid_argument("EstimatorConfig: SFF needs hidden dims");
    if (deepar_rnn_layers < 1 || deepar_cells_per_layer < 1 || transformer_model_dim < 2 ||
        transformer_ffn_dim < 1 || lstm_neurons < 1)
        throw std::invalid_argument("EstimatorConfig: bad kind-specific dimension");
    if (transformer_model_dim % 2 != 0)
        throw std::invalid_argument("EstimatorConfig: transformer model dim must be even");
}

std::vector<TrainingWindow> make_windows(const TimeSeries& scaled, int context_length,
                                         int horizon) {
    const std::size_t ctx = static_cast<std::size_t>(context_length);
    const std::size_t hor = static_cast<std::size_t>(horizon);
    const std::size_t len = scaled.size();
    if (len < ctx + hor)
        throw std::invalid_argument("make_windows: series shorter than context + horizon");
    const std::size_t count = len - ctx - hor + 1;
    std::vector<TrainingWindow> windows;
    windows.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        TrainingWindow win;
        win.context.assign(scaled.values().begin() + w, scaled.values().begin() + w + ctx);
        win.target.assign(scaled.values().begin() + w + ctx,
                          scaled.values().begin() + w + ctx + hor);
        win.cov_hour.resize(ctx + hor);
        win.cov_dow.resize(ctx + hor);
        for (std::size_t i = 0; i < ctx + hor; ++i) {
            const std::int64_t ts = scaled.time_at(w + i);
            win.cov_hour[i] = hour_of_day(ts) / 24.0;
            win.cov_dow[i] = day_of_week(ts) / 7.0;
        }
        windows.push_back(std::move(win));
    }
    return windows;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    return hash_u64(base ^ (0x517cc1b727220a95ULL + salt));
}

std::string Predictor::fingerprint() const { return nn::params_fingerprint(params); }

namespace {

using detail::Attached;

nn::ParameterSet init_for(const EstimatorConfig& cfg, Rng& rng) {
    switch (cfg.kind) {
        case ModelKind::sff: return detail::sff_init(cfg, rng);
        case ModelKind::deepar: return detail::deepar_init(cfg, rng);
        case ModelKind::transformer: return detail::transformer_init(cfg, rng);
        case ModelKind::lstm: return detail::lstm_init(cfg, rng);
    }
    throw std::logic_error("unknown model kind");
}

Var loss_for(Tape& tape, const Attached& at, const TrainingWindow& w,
             const EstimatorConfig& cfg) {
    switch (cfg.kind) {
        case ModelKind::sff: return detail::sff_window_loss(tape, at, w, cfg);
        case ModelKind::deepar: return detail::deepar_window_loss(tape, at, w, cfg);
        case ModelKind::transformer: return detail::transformer_window_loss(tape, at, w, cfg);
        case ModelKind::lstm: return detail::lstm_window_loss(tape, at, w, cfg);
    }
    throw std::logic_error("unknown model kind");
}

} // namespace

Predictor train(const TimeSeries& series, const EstimatorConfig& cfg) {
    cfg.validate();
    const int effective_horizon = cfg.kind == ModelKind::lstm ? 1 : cfg.horizon;
    const std::size_t min_len =
        static_cast<std::size_t>(cfg.context_length) + static_cast<std::size_t>(effective_horizon);
    if (series.size() < min_len)
        throw std::invalid_argument("train: series too short for one window (" +
                                    std::to_string(series.size()) + " < " +
                                    std::to_string(min_len) + ")");

    const auto t0 = std::chrono::steady_clock::now();

    auto [scaler, scaled] = standardize(series);
    auto windows = make_windows(scaled, cfg.context_length, effective_horizon);

    Rng rng(cfg.seed);
    nn::ParameterSet params = init_for(cfg, rng);
    nn::AdamState adam(detail::kAdamLearningRate);

    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainingMeta meta;
    Tape tape;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t idx : order) {
            tape.clear();
            Attached at = detail::attach(tape, params);
            Var loss = loss_for(tape, at, windows[idx], cfg);
            const double loss_value = loss.value()[0];
            if (!std::isfinite(loss_value))
                throw std::runtime_error("train: non-finite loss (" + kind_name(cfg.kind) +
                                         ", epoch " + std::to_string(epoch) + ")");
            params.zero_grads();
            tape.backward(loss);
            params.clip_global_norm(detail::kGradClipNorm);
            adam.step(params);
            epoch_loss += loss_value;
        }
        epoch_loss /= static_cast<double>(windows.size());
        if (epoch == 1) meta.first_epoch_loss = epoch_loss;
        meta.final_epoch_loss = epoch_loss;
    }

    meta.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    Predictor p{cfg.kind, cfg, scaler, std::move(params), meta, series};
    return p;
}

SampleForecast predict(const Predictor& p, const TimeSeries& context, std::uint64_t seed) {
    const std::size_t ctx = static_cast<std::size_t>(p.config.context_length);
    if (context.size() < ctx)
        throw std::invalid_argument("predict: context shorter than configured context length");

    const std::size_t len = context.size();
    const std::size_t hor = static_cast<std::size_t>(p.config.horizon);
    std::vector<double> scaled = p.scaler.scale(context.values());
    std::vector<double> cov_hour(len + hor), cov_dow(len + hor);
    for (std::size_t i = 0; i < len + hor; ++i) {
        const std::int64_t ts = context.time_at(i);
        cov_hour[i] = hour_of_day(ts) / 24.0;
        cov_dow[i] = day_of_week(ts) / 7.0;
    }

    Rng rng(seed);
    std::vector<std::vector<double>> paths;
    switch (p.kind) {
        case ModelKind::sff:
            paths = detail::sff_predict_scaled(p, scaled, cov_hour, cov_dow, rng);
            break;
        case ModelKind::deepar:
            paths = detail::deepar_predict_scaled(p, scaled, cov_hour, cov_dow, rng);
            break;
        case ModelKind::transformer:
            paths = detail::transformer_predict_scaled(p, scaled, cov_hour, cov_dow, rng);
            break;
        case ModelKind::lstm:
            paths = detail::lstm_predict_scaled(p, scaled, cov_hour, cov_dow, rng);
            break;
    }

    SampleForecast f;
    f.start = context.end();
    f.horizon = hor;
    f.samples = std::move(paths);
    for (auto& path : f.samples)
        for (double& v : path) {
            v = p.scaler.unscale(v);
            if (v < 0.0) v = 0.0;
        }
    f.validate();
    return f;
}

EvalResult evaluate_with(const ForecastFn& forecast, const TimeSeries& history,
                         const TimeSeries& test, const EstimatorConfig& cfg) {
    const std::size_t hor = static_cast<std::size_t>(cfg.horizon);
    const std::size_t blocks = test.size() / hor;
    if (blocks == 0) throw std::invalid_argument("evaluate: test shorter than one horizon");
    if (history.end() != test.start())
        throw std::invalid_argument("evaluate: test slice must immediately follow history");

    std::vector<double> ctx_values = history.values();
    double sq = 0.0;
    std::size_t n = 0;
    EvalResult result;
    for (std::size_t k = 0; k < blocks; ++k) {
        TimeSeries ctx = TimeSeries::allow_negative(history.tenant_id(), history.start(),
                                                    ctx_values);
        const auto t0 = std::chrono::steady_clock::now();
        SampleForecast f = forecast(ctx, derive_seed(cfg.seed, k));
        result.predict_seconds +=
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (f.horizon != hor) throw std::runtime_error("evaluate: forecast horizon mismatch");

        PointForecast point = mean_point(f);
        for (std::size_t i = 0; i < hor; ++i) {
            const double d = test[k * hor + i] - point.values[i];
            sq += d * d;
            ++n;
        }
        for (std::size_t i = 0; i < hor; ++i) ctx_values.push_back(test[k * hor + i]);
    }
    result.mse = sq / static_cast<double>(n);
    result.blocks = static_cast<int>(blocks);
    return result;
}

EvalResult evaluate(const Predictor& p, const TimeSeries& test, const EstimatorConfig& cfg) {
    return evaluate_with(
        [&p](const TimeSeries& ctx, std::uint64_t seed) { return predict(p, ctx, seed); },
        p.train_history, test, cfg);
}

// --- Serialization -----------------------------------------------------------

namespace {

nlohmann::json config_to_json(const EstimatorConfig& cfg) {
    return nlohmann::json{{"kind", kind_name(cfg.kind)},
                          {"epochs", cfg.epochs},
                          {"batch_size", cfg.batch_size},
                          {"context_length", cfg.context_length},
                          {"horizon", cfg.horizon},
                          {"num_eval_samples", cfg.num_eval_samples},
                          {"seed", cfg.seed},
                          {"sff_hidden_dims", cfg.sff_hidden_dims},
                          {"deepar_rnn_layers", cfg.deepar_rnn_layers},
                          {"deepar_cells_per_layer", cfg.deepar_cells_per_layer},
                          {"transformer_model_dim", cfg.transformer_model_dim},
                          {"transformer_ffn_dim", cfg.transformer_ffn_dim},
                          {"lstm_neurons", cfg.lstm_neurons}};
}

EstimatorConfig config_from_json(const nlohmann::json& j) {
    EstimatorConfig cfg;
    cfg.kind = kind_from_name(j.at("kind").get<std::string>());
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.context_length = j.value("context_length", cfg.context_length);
    cfg.horizon = j.value("horizon", cfg.horizon);
    cfg.num_eval_samples = j.value("num_eval_samples", cfg.num_eval_samples);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.sff_hidden_dims = j.value("sff_hidden_dims", cfg.sff_hidden_dims);
    cfg.deepar_rnn_layers = j.value("deepar_rnn_layers", cfg.deepar_rnn_layers);
    cfg.deepar_cells_per_layer = j.value("deepar_cells_per_layer", cfg.deepar_cells_per_layer);
    cfg.transformer_model_dim = j.value("transformer_model_dim", cfg.transformer_model_dim);
    cfg.transformer_ffn_dim = j.value("transformer_ffn_dim", cfg.transformer_ffn_dim);
    cfg.lstm_neurons = j.value("lstm_neurons", cfg.lstm_neurons);
    return cfg;
}

} // namespace

void save_predictor(const std::string& prefix, const Predictor& p) {
    nn::save_params_file(prefix + ".prbm", p.params);
    nlohmann::json j;
    j["kind"] = kind_name(p.kind);
    j["config"] = config_to_json(p.config);
    j["scaler"] = {{"mean", p.scaler.mean}, {"sd", p.scaler.sd}};
    j["training"] = {{"wall_seconds", p.meta.wall_seconds},
                     {"first_epoch_loss", p.meta.first_epoch_loss},
                     {"final_epoch_loss", p.meta.final_epoch_loss}};
    j["fingerprint"] = p.fingerprint();
    j["train_history"] = {{"tenant_id", p.train_history.tenant_id()},
                          {"start", format_iso8601(p.train_history.start())},
                          {"values", p.train_history.values()}};
    std::ofstream out(prefix + ".json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + prefix + ".json");
    out << j.dump(2) << '\n';
}

Predictor load_predictor(const std::string& prefix) {
    std::ifstream in(prefix + ".json");
    if (!in) throw std::runtime_error("cannot open for reading: " + prefix + ".json");
    nlohmann::json j;
    in >> j;

    EstimatorConfig cfg = config_from_json(j.at("config"));
    Scaler scaler{j.at("scaler").at("mean").get<double>(), j.at("scaler").at("sd").get<double>()};
    TrainingMeta meta{j.at("training").at("wall_seconds").get<double>(),
                      j.at("training").at("first_epoch_loss").get<double>(),
                      j.at("training").at("final_epoch_loss").get<double>()};
    const auto& h = j.at("train_history");
    TimeSeries history(h.at("tenant_id").get<std::string>(),
                       parse_iso8601(h.at("start").get<std::string>()),
                       h.at("values").get<std::vector<double>>());

    Predictor p{cfg.kind, cfg, scaler, nn::load_params_file(prefix + ".prbm"), meta,
                std::move(history)};
    return p;
}

} // namespace prb::models
