#include <cmath>
#include <stdexcept>

#include "models_internal.hpp"

namespace prb::models::detail {

nn::Var Attached::operator()(const std::string& name) const {
    const auto& entries = params->entries();
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (entries[i].name == name) return vars[i];
    throw std::out_of_range("Attached: no parameter " + name);
}

Attached attach(nn::Tape& tape, nn::ParameterSet& params) {
    Attached at;
    at.tape = &tape;
    at.params = &params;
    at.vars.reserve(params.count());
    for (auto& e : params.entries()) at.vars.push_back(tape.param(e.value, e.grad));
    return at;
}

nn::Tensor init_weight(std::size_t rows, std::size_t cols, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
    nn::Tensor t(rows, cols);
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
    return t;
}

nn::Tensor init_weight_vec(std::size_t n, std::size_t fan_in, Rng& rng) {
    (void)fan_in;
    (void)rng;
    return nn::Tensor::vec(n, 0.0); // biases start at zero
}

std::vector<double> position_encoding(std::size_t pos, std::size_t dim) {
    std::vector<double> pe(dim);
    for (std::size_t i = 0; i < dim / 2; ++i) {
        const double rate = std::pow(10000.0, 2.0 * static_cast<double>(i) /
                                                  static_cast<double>(dim));
        pe[2 * i] = std::sin(static_cast<double>(pos) / rate);
        pe[2 * i + 1] = std::cos(static_cast<double>(pos) / rate);
    }
    return pe;
}

} // namespace prb::models::detail
