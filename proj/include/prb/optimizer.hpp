#ifndef PRB_OPTIMIZER_HPP
#define PRB_OPTIMIZER_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "prb/tensor.hpp"

namespace prb::nn {

/**
 * Named trainable tensors with parallel gradient storage. Order of
 * registration is the canonical order for serialization and Adam state.
 */
class ParameterSet {
public:
    struct Entry {
        std::string name;
        Tensor value;
        Tensor grad;
    };

    /// Registers a parameter. Names must be unique.
    Tensor& add(const std::string& name, Tensor init);

    Entry& at(const std::string& name);
    const Entry& at(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t count() const { return entries_.size(); }
    std::size_t total_values() const;

    void zero_grads();
    double grad_norm() const;
    /// Scales all gradients so the global norm is at most max_norm.
    void clip_global_norm(double max_norm);

private:
    std::vector<Entry> entries_;
};

/// Standard Adam with bias correction. Moments are kept in registration order.
struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t t = 0;
    std::vector<Tensor> m;
    std::vector<Tensor> v;

    explicit AdamState(double lr = 1e-3) : learning_rate(lr) {}

    /// One update over all parameters using their current gradients.
    void step(ParameterSet& params);
};

/**
 * Compares analytic gradients against central finite differences at
 * probe_count randomly chosen parameter coordinates and returns the worst
 * relative error. loss_fn(true) must populate gradients (after the caller
 * or itself zeroes them); loss_fn(false) must only return the loss value.
 */
double grad_check(const std::function<double(bool)>& loss_fn, ParameterSet& params,
                  int probe_count, double epsilon, std::uint64_t seed);

} // namespace prb::nn

#endif // PRB_OPTIMIZER_HPP
