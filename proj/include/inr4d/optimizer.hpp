#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace inr4d {

/// Bias-corrected Adam moments for one parameter block.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_size(std::size_t n) {
        AdamState s;
        s.m.assign(n, 0.0);
        s.v.assign(n, 0.0);
        return s;
    }
    bool operator==(const AdamState&) const = default;
};

/// One Adam update in place. Non-finite gradients abort with "divergence"
/// before anything is modified.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr);

/// Step decay: base_lr * decay_factor^floor(epoch / decay_every).
struct LrSchedule {
    double base_lr = 1e-4;
    double decay_factor = 0.5;
    int decay_every = 100;

    void validate() const;
};

double lr_at(const LrSchedule& schedule, int epoch);

} // namespace inr4d
