#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "uxmc/data.hpp"
#include "uxmc/dst.hpp"
#include "uxmc/keyvalue.hpp"
#include "uxmc/losses.hpp"
#include "uxmc/model.hpp"

namespace uxmc {

/// Either a text file (data.train) or a feature blob + label file pair.
struct DataSource {
    std::filesystem::path text;
    std::filesystem::path features;
    std::filesystem::path labels;

    bool empty() const noexcept { return text.empty() && features.empty() && labels.empty(); }
    /// Throws ConfigError on a half-specified pair or a missing file.
    void validate(const std::string& what) const;
    Dataset load(const std::string& name) const;
};

struct OptimizerConfig {
    double lr = 1e-3;
    double lr_floor = 1e-4;
    double decay = 0.5;
    std::size_t patience = 2;
    double min_delta = 1e-4;
    std::size_t max_epochs = 200;
};

struct BenchConfig {
    std::size_t train_epochs = 2;   // epochs of training before timing
    std::size_t batches = 40;       // timed batches per loss
    std::size_t warmup = 5;         // leading batches excluded from the means
};

struct MachConfig {
    std::size_t repetitions = 4;
    std::size_t buckets = 64;
};

struct SynthConfig {
    SyntheticSpec spec;
    double test_fraction = 0.2;
    std::string format = "text";  // text | blob
};

struct RunConfig {
    DataSource train;
    DataSource test;
    double validation_fraction = 0.05;

    ModelConfig model;
    bool model_seed_set = false;  // otherwise the model seed follows `seed`
    DstConfig dst;
    OptimizerConfig optimizer;
    LossKind loss = LossKind::SquaredHinge;
    std::size_t batch_size = 32;
    std::vector<std::size_t> ks{1, 3, 5};
    std::size_t eval_chunk = 1024;

    std::filesystem::path output = "run";
    std::uint64_t seed = 0;
    std::size_t threads = 0;  // 0: hardware concurrency
    bool deterministic = false;

    BenchConfig bench;
    MachConfig mach;
    SynthConfig synth;

    /// Unknown keys are rejected.
    static RunConfig from_keys(const KeyValues& kv);
    /// Checks everything that can be checked without reading datasets.
    void validate() const;
    /// Fills feature_dim / num_labels from data when unset, then validates
    /// the model and dst sections against them.
    void bind_data(std::size_t feature_dim, std::size_t num_labels);

    std::size_t effective_threads() const;
    std::map<std::string, std::string> to_keys() const;
};

/// Reads the optional config file, applies key=value overrides in order.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

}  // namespace uxmc
