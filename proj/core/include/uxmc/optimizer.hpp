#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uxmc {

/// A named, contiguous block of trainable values (sparse head weights,
/// dense weights, a bias). Gradients use the same layout.
template <typename T>
struct ParamBlock {
    std::string name;
    std::span<T> values;
};

/// First and second moments for one parameter block, element-aligned with
/// the block's values.
template <typename T>
struct AdamMoments {
    std::vector<T> m;
    std::vector<T> v;
};

/// Adam state holding moments for exactly the structural parameters: a
/// sparse block of s*L weights gets s*L moments, never d*L.
template <typename T>
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<AdamMoments<T>> blocks;

    /// Zero moments shaped like `params`.
    static AdamState for_params(std::span<const ParamBlock<T>> params);
};

/// One bias-corrected Adam update over all blocks; increments step once.
/// Throws NumericError naming the block if a gradient is NaN or infinite
/// (no parameter is modified in that case).
template <typename T>
void adam_step(std::span<const ParamBlock<T>> params, std::span<const std::vector<T>> grads, AdamState<T>& state,
               double lr);

enum class ScheduleEvent { Continue, Decayed, Stop };

std::string_view to_string(ScheduleEvent e);

/// Plateau-driven learning-rate halving on validation P@3, with early stop
/// once the rate sits at its floor and validation stops improving.
struct LrSchedule {
    double lr = 1e-3;
    double initial_lr = 1e-3;
    double floor = 1e-4;
    double factor = 0.5;
    std::size_t patience = 2;
    double min_delta = 1e-4;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t stale = 0;

    /// Throws ConfigError on an inconsistent configuration.
    void validate() const;

    /// Feed one validation P@3. An improvement of at least min_delta resets
    /// the stale counter. After `patience` stale rounds the rate is halved
    /// (clamped to the floor); if it already is at the floor, Stop.
    ScheduleEvent update(double val_p_at_3);
};

}  // namespace uxmc
