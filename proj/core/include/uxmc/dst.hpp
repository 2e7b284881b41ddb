#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "uxmc/optimizer.hpp"
#include "uxmc/rng.hpp"
#include "uxmc/uniform_sparse.hpp"

namespace uxmc {

enum class RegrowInit { Zero, Uniform };

std::string_view to_string(RegrowInit r);
RegrowInit parse_regrow_init(std::string_view s);

struct DstConfig {
    bool enabled = true;
    double prune_fraction = 0.1;
    std::size_t interval_steps = 1000;
    bool per_epoch = false;  // redistribute at the start of each epoch instead
    RegrowInit regrow_init = RegrowInit::Zero;

    /// Connections replaced per column: floor(prune_fraction * fan_in).
    std::size_t replaced_per_column(std::size_t fan_in) const;

    /// Rejects fractions outside (0,1), a zero interval, and fan-ins for
    /// which floor(prune_fraction * fan_in) == 0 or no structural zeros remain.
    void validate(std::size_t fan_in, std::size_t in_dim) const;
};

struct RedistributionReport {
    std::size_t per_column = 0;             // p, identical for every column
    std::vector<float> pruned_magnitudes;   // p entries per column, column-major
    std::uint64_t columns = 0;

    std::uint64_t pruned() const noexcept { return pruned_magnitudes.size(); }
    double mean_pruned_magnitude() const noexcept;
    double max_pruned_magnitude() const noexcept;
};

/// Per column: remove the p = floor(alpha * s) smallest-|w| connections
/// (ties: lower slot first), grow p new sources drawn uniformly without
/// replacement from the rows the column was not connected to, reset the
/// Adam moments of the new slots to zero and re-sort the column. Moments of
/// surviving slots move with their weights. Column j draws from a stream
/// keyed by j, so the result does not depend on the thread count.
template <typename T>
RedistributionReport prune_and_regrow(UniformSparseMatrix<T>& w, AdamMoments<T>& moments, const DstConfig& cfg,
                                      Rng& rng);

}  // namespace uxmc
