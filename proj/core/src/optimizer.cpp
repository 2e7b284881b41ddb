#include "uxmc/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "uxmc/errors.hpp"

namespace uxmc {

template <typename T>
AdamState<T> AdamState<T>::for_params(std::span<const ParamBlock<T>> params) {
    AdamState state;
    state.blocks.reserve(params.size());
    for (const auto& p : params) {
        state.blocks.push_back({std::vector<T>(p.values.size(), T{0}), std::vector<T>(p.values.size(), T{0})});
    }
    return state;
}

template <typename T>
void adam_step(std::span<const ParamBlock<T>> params, std::span<const std::vector<T>> grads, AdamState<T>& state,
               double lr) {
    if (params.size() != grads.size() || params.size() != state.blocks.size()) {
        throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameter blocks, " +
                             std::to_string(grads.size()) + " gradients, " + std::to_string(state.blocks.size()) +
                             " moment blocks");
    }
    for (std::size_t b = 0; b < params.size(); ++b) {
        const auto n = params[b].values.size();
        if (grads[b].size() != n || state.blocks[b].m.size() != n || state.blocks[b].v.size() != n) {
            throw DimensionError("adam_step: block '" + params[b].name + "' size mismatch");
        }
        for (std::size_t k = 0; k < n; ++k) {
            if (!std::isfinite(grads[b][k])) {
                throw NumericError("adam_step: non-finite gradient in block '" + params[b].name + "' at element " +
                                   std::to_string(k));
            }
        }
    }

    ++state.step;
    const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
    const T one_minus_b1 = T{1} - b1, one_minus_b2 = T{1} - b2;
    const double t = static_cast<double>(state.step);
    const T correction1 = static_cast<T>(1.0 - std::pow(state.beta1, t));
    const T correction2 = static_cast<T>(1.0 - std::pow(state.beta2, t));
    const T eps = static_cast<T>(state.epsilon);
    const T rate = static_cast<T>(lr);

    for (std::size_t b = 0; b < params.size(); ++b) {
        auto p = params[b].values;
        const auto& g = grads[b];
        auto& m = state.blocks[b].m;
        auto& v = state.blocks[b].v;
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = b1 * m[k] + one_minus_b1 * g[k];
            v[k] = b2 * v[k] + one_minus_b2 * g[k] * g[k];
            const T m_hat = m[k] / correction1;
            const T v_hat = v[k] / correction2;
            p[k] -= rate * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

std::string_view to_string(ScheduleEvent e) {
    switch (e) {
        case ScheduleEvent::Continue: return "continue";
        case ScheduleEvent::Decayed: return "decayed";
        case ScheduleEvent::Stop: return "stop";
    }
    return "?";
}

void LrSchedule::validate() const {
    if (!(initial_lr > 0.0) || !(floor > 0.0) || floor > initial_lr) {
        throw ConfigError("lr schedule: need 0 < floor <= initial lr");
    }
    if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("lr schedule: decay factor must lie in (0, 1)");
    if (patience == 0) throw ConfigError("lr schedule: patience must be at least 1");
    if (!(min_delta >= 0.0)) throw ConfigError("lr schedule: min_delta must be non-negative");
}

ScheduleEvent LrSchedule::update(double val_p_at_3) {
    if (val_p_at_3 >= best + min_delta) {
        best = val_p_at_3;
        stale = 0;
        return ScheduleEvent::Continue;
    }
    if (++stale < patience) return ScheduleEvent::Continue;
    stale = 0;
    if (lr <= floor) return ScheduleEvent::Stop;
    lr = std::max(floor, lr * factor);
    return ScheduleEvent::Decayed;
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step(std::span<const ParamBlock<float>>, std::span<const std::vector<float>>, AdamState<float>&,
                        double);
template void adam_step(std::span<const ParamBlock<double>>, std::span<const std::vector<double>>,
                        AdamState<double>&, double);

}  // namespace uxmc
