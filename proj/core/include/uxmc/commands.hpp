#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "uxmc/data.hpp"
#include "uxmc/losses.hpp"
#include "uxmc/metrics.hpp"
#include "uxmc/run_config.hpp"
#include "uxmc/trainer.hpp"

namespace uxmc {

/// Training data split into train/validation plus the optional test set.
struct RunData {
    Dataset train;
    Dataset validation;
    std::optional<Dataset> test;

    /// The set final results are reported on: test if present, else validation.
    const Dataset& report_set() const { return test ? *test : validation; }
};

/// Loads data.train (required) and data.test, splits off the validation set
/// with the run seed and binds the model dimensions. When the validation
/// fraction is 0 the training set doubles as validation set.
RunData load_run_data(RunConfig& cfg);

/// The same split applied to datasets already in memory.
RunData make_run_data(RunConfig& cfg, Dataset full, std::optional<Dataset> test = std::nullopt);

/// Output files of a train run, relative to the output directory.
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kRedistributionFile = "redistribution.csv";
inline constexpr const char* kTimingsFile = "timings.csv";
inline constexpr const char* kCheckpointDir = "checkpoint";
inline constexpr const char* kResolvedConfigFile = "config.txt";
inline constexpr const char* kEvalFile = "eval.csv";

/// Train, write metrics CSVs and the best checkpoint; returns the final
/// report row (best checkpoint on the report set).
EpochRow cmd_train(RunConfig cfg, std::ostream& log);

/// Evaluates a checkpoint on the report set, prints P@k and writes eval.csv.
EpochRow cmd_eval(RunConfig cfg, const std::filesystem::path& checkpoint, std::ostream& log);

struct BenchRow {
    LossKind loss = LossKind::SquaredHinge;
    double forward_ms = 0.0;
    double backward_input_ms = 0.0;
    double backward_weights_ms = 0.0;
    double skip_fraction = 0.0;
    std::size_t timed_batches = 0;
};

/// Head kernel timings for squared hinge and Bce on the same trained model
/// and batches. Leading warmup batches are excluded from the means.
std::vector<BenchRow> cmd_bench(RunConfig cfg, std::ostream& log);

struct MachReport {
    std::map<std::size_t, double> mach_p_at;
    std::map<std::size_t, double> sparse_p_at;
};

/// Trains R dense meta-heads on hashed labels with Bce, decodes their
/// probabilities and compares P@k with an end-to-end run of the configured
/// model on the same data.
MachReport cmd_mach(RunConfig cfg, std::ostream& log);

/// Byte accounting for the configured head (if its dimensions are known)
/// and for fixed reference shapes.
void cmd_memreport(RunConfig cfg, std::ostream& out);

/// Writes a synthetic train/test split to the output directory.
void cmd_synth(RunConfig cfg, std::ostream& log);

}  // namespace uxmc
