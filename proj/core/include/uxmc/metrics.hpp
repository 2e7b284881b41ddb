#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "uxmc/labels.hpp"
#include "uxmc/losses.hpp"
#include "uxmc/model.hpp"
#include "uxmc/tensor.hpp"

namespace uxmc {

/// Mean over instances of |top-k ∩ positives| / k, for every k in `ks`.
/// Uses top_k's tie-break (lower label id first). Throws ConfigError if any
/// k is 0 or exceeds the number of labels.
template <typename T>
std::map<std::size_t, double> precision_at_k(const DenseMatrix<T>& scores, const LabelMatrix& labels,
                                             const std::vector<std::size_t>& ks);

struct EvalReport {
    std::map<std::size_t, double> p_at;
    std::size_t n_instances = 0;
    double loss = 0.0;
    double wall_time = 0.0;
    double skip_fraction = 0.0;
};

/// Scores the dataset in fixed-size chunks (eval mode) and computes P@k and
/// the mean loss. skip_fraction is the share of exact zeros in the loss
/// gradient.
template <typename T>
EvalReport evaluate(const Model<T>& model, const DenseMatrix<T>& features, const LabelMatrix& labels,
                    const std::vector<std::size_t>& ks, LossKind loss, std::size_t chunk = 1024);

/// Shape of an output layer for byte accounting.
struct HeadShape {
    std::uint64_t rows = 0;      // input width
    std::uint64_t cols = 0;      // labels
    std::uint64_t fan_in = 0;    // 0 for a dense head
};

struct MemoryLine {
    std::string name;
    std::uint64_t bytes = 0;
};

/// Head bytes under DENSE/COO64/COO32/CSC32/UNIFORM (sparse formats use
/// nnz = fan_in * cols; for a dense head nnz = rows * cols), the dense
/// block bytes, the total for the active format, and the training footprint
/// (value, gradient, first and second moment per weight, indices once).
std::vector<MemoryLine> parameter_memory_report(const HeadShape& head, std::uint64_t dense_block_bytes);

template <typename T>
std::vector<MemoryLine> parameter_memory_report(const Model<T>& model);

/// Bytes as "<n> B (<x> MB, <y> GiB)".
std::string format_bytes(std::uint64_t bytes);

/// Peak resident set size of this process, if the platform reports it.
std::optional<std::uint64_t> peak_rss_bytes();

}  // namespace uxmc
