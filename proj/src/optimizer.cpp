#include "prb/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "prb/rng.hpp"

namespace prb::nn {

Tensor& ParameterSet::add(const std::string& name, Tensor init) {
    if (contains(name)) throw std::invalid_argument("ParameterSet: duplicate name " + name);
    Entry e;
    e.name = name;
    e.grad = init.zeros_like();
    e.value = std::move(init);
    entries_.push_back(std::move(e));
    return entries_.back().value;
}

ParameterSet::Entry& ParameterSet::at(const std::string& name) {
    for (auto& e : entries_)
        if (e.name == name) return e;
    throw std::out_of_range("ParameterSet: no parameter " + name);
}

const ParameterSet::Entry& ParameterSet::at(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return e;
    throw std::out_of_range("ParameterSet: no parameter " + name);
}

bool ParameterSet::contains(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return true;
    return false;
}

std::size_t ParameterSet::total_values() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
}

void ParameterSet::zero_grads() {
    for (auto& e : entries_) e.grad.fill(0.0);
}

double ParameterSet::grad_norm() const {
    double acc = 0.0;
    for (const auto& e : entries_)
        for (double g : e.grad.data()) acc += g * g;
    return std::sqrt(acc);
}

void ParameterSet::clip_global_norm(double max_norm) {
    const double norm = grad_norm();
    if (norm <= max_norm || norm == 0.0) return;
    const double scale = max_norm / norm;
    for (auto& e : entries_)
        for (double& g : e.grad.data()) g *= scale;
}

void AdamState::step(ParameterSet& params) {
    auto& entries = params.entries();
    if (m.empty()) {
        for (const auto& e : entries) {
            m.push_back(e.value.zeros_like());
            v.push_back(e.value.zeros_like());
        }
    }
    if (m.size() != entries.size())
        throw std::invalid_argument("AdamState: parameter count changed after first step");
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t p = 0; p < entries.size(); ++p) {
        auto& value = entries[p].value;
        const auto& grad = entries[p].grad;
        auto& mp = m[p];
        auto& vp = v[p];
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            mp[i] = beta1 * mp[i] + (1.0 - beta1) * g;
            vp[i] = beta2 * vp[i] + (1.0 - beta2) * g * g;
            const double mhat = mp[i] / bc1;
            const double vhat = vp[i] / bc2;
            value[i] -= learning_rate * mhat / (std::sqrt(vhat) + epsilon);
        }
    }
}

double grad_check(const std::function<double(bool)>& loss_fn, ParameterSet& params,
                  int probe_count, double epsilon, std::uint64_t seed) {
    if (epsilon < 1e-6 || epsilon > 1e-3)
        throw std::invalid_argument("grad_check: epsilon outside [1e-6, 1e-3]");

    params.zero_grads();
    const double base = loss_fn(true);
    if (!std::isfinite(base)) throw std::runtime_error("grad_check: non-finite loss");

    // Snapshot analytic gradients before the probing passes disturb anything.
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.count());
    for (const auto& e : params.entries()) analytic.push_back(e.grad.data());

    Rng rng(seed);
    double worst = 0.0;
    for (int probe = 0; probe < probe_count; ++probe) {
        const std::size_t p = static_cast<std::size_t>(rng.uniform_index(params.count()));
        auto& value = params.entries()[p].value;
        const std::size_t i = static_cast<std::size_t>(rng.uniform_index(value.size()));

        const double saved = value[i];
        value[i] = saved + epsilon;
        const double up = loss_fn(false);
        value[i] = saved - epsilon;
        const double down = loss_fn(false);
        value[i] = saved;
        if (!std::isfinite(up) || !std::isfinite(down))
            throw std::runtime_error("grad_check: non-finite loss during probing");

        const double numeric = (up - down) / (2.0 * epsilon);
        const double a = analytic[p][i];
        const double rel = std::fabs(a - numeric) /
                           std::max({std::fabs(a), std::fabs(numeric), 1e-3});
        worst = std::max(worst, rel);
    }
    return worst;
}

} // namespace prb::nn
