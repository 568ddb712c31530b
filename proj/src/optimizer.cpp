#include "inr4d/optimizer.hpp"

#include "inr4d/error.hpp"

#include <cmath>
#include <string>

namespace inr4d {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, double lr) {
    require(params.size() == grads.size(), "shape mismatch: params and grads differ in length");
    require(state.m.size() == params.size() && state.v.size() == params.size(),
            "shape mismatch: optimizer state does not match parameters");
    for (double g : grads)
        if (!std::isfinite(g)) fail("divergence: non-finite gradient");

    ++state.step;
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

void LrSchedule::validate() const {
    require(base_lr > 0.0, "invalid schedule: base_lr must be positive");
    require(decay_factor > 0.0 && decay_factor <= 1.0, "invalid schedule: decay_factor must lie in (0, 1]");
    require(decay_every >= 1, "invalid schedule: decay_every must be >= 1");
}

double lr_at(const LrSchedule& schedule, int epoch) {
    schedule.validate();
    require(epoch >= 0, "lr_at: negative epoch " + std::to_string(epoch));
    return schedule.base_lr * std::pow(schedule.decay_factor, epoch / schedule.decay_every);
}

} // namespace inr4d
