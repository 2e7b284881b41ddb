#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uxmc/data.hpp"
#include "uxmc/dst.hpp"
#include "uxmc/metrics.hpp"
#include "uxmc/model.hpp"
#include "uxmc/optimizer.hpp"
#include "uxmc/run_config.hpp"

namespace uxmc {

/// One metrics CSV row.
struct EpochRow {
    std::size_t epoch = 0;
    std::string split;
    double loss = 0.0;
    std::map<std::size_t, double> p_at;
    double lr = 0.0;
    double skip_fraction = 0.0;
    double epoch_seconds = 0.0;
    std::uint64_t head_bytes_uniform = 0;
    std::uint64_t head_bytes_dense = 0;
};

/// epoch,split,loss,p@1,p@3,p@5,lr,skip_fraction,epoch_seconds,head_bytes_uniform,head_bytes_dense
std::string metrics_csv_header();
std::string format_metrics_row(const EpochRow& row);
/// Parses a file written with the header above.
std::vector<EpochRow> read_metrics_csv(std::istream& in);

struct RedistributionRow {
    std::uint64_t step = 0;
    std::size_t epoch = 0;
    std::uint64_t pruned = 0;
    double mean_pruned_magnitude = 0.0;
    double max_pruned_magnitude = 0.0;
};

std::string redistribution_csv_header();
std::string format_redistribution_row(const RedistributionRow& row);

/// Head storage under the uniform and dense formats (bytes).
template <typename T>
std::pair<std::uint64_t, std::uint64_t> head_bytes(const Model<T>& model);

/// Extension points used by tests and the CLI. All are optional.
template <typename T>
struct TrainHooks {
    std::function<void(Model<T>&)> on_init;
    /// Called on every gradient set before the optimizer step.
    std::function<void(GradientSet<T>&)> on_gradients;
    /// Replaces the built-in uniform prune/regrow when set.
    std::function<std::optional<RedistributionReport>(Model<T>&, AdamState<T>&, Rng&)> redistribute;
    std::function<void(const EpochRow&, const Model<T>&, bool improved)> on_epoch;
    std::function<void(const RedistributionRow&)> on_redistribution;
};

template <typename T>
struct TrainResult {
    Model<T> best;
    Model<T> last;
    std::size_t best_epoch = 0;
    std::vector<EpochRow> rows;
    std::vector<RedistributionRow> redistributions;
    std::uint64_t steps = 0;
    ScheduleEvent last_event = ScheduleEvent::Continue;
};

/// Mini-batch training with validation after every epoch. `cfg.model` must be
/// bound to the data dimensions. Epoch 0 evaluates the initial model. The
/// best model is the one with the highest validation P@3 (first wins ties).
/// Throws NumericError on a non-finite training loss.
template <typename T>
TrainResult<T> train(const RunConfig& cfg, const Dataset& train_set, const Dataset& validation,
                     const TrainHooks<T>& hooks = {});

/// Builds the learning-rate schedule described by the optimizer section.
LrSchedule make_schedule(const OptimizerConfig& o);

}  // namespace uxmc
