#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uxmc/labels.hpp"
#include "uxmc/rng.hpp"
#include "uxmc/tensor.hpp"

namespace uxmc {

/// Features are always dense (N x d, 32-bit); labels are sparse positives.
struct Dataset {
    std::string name;
    DenseMatrix<float> features;
    LabelMatrix labels;

    std::size_t size() const noexcept { return features.rows(); }
    std::size_t feature_dim() const noexcept { return features.cols(); }
    std::size_t num_labels() const noexcept { return labels.num_labels(); }

    /// Throws ValidationError when row counts disagree.
    void validate() const;

    /// Subset in the given row order.
    Dataset subset(std::span<const std::size_t> rows) const;
};

// Extreme-classification repository text format:
//   header   "N d L"
//   row      "l1,l2,... i1:v1 i2:v2 ..."   (label field may be empty)
// Sparse feature pairs are densified.
Dataset parse_xmc_text(std::istream& in, std::string name = "");
Dataset parse_xmc_text(const std::filesystem::path& path);
void write_xmc_text(std::ostream& out, const Dataset& ds);

// Feature blob: "XFEA", version u32, N u64, d u32, then N*d f32 row-major.
inline constexpr std::uint32_t kXfeaVersion = 1;
DenseMatrix<float> load_feature_blob(std::istream& in);
DenseMatrix<float> load_feature_blob(const std::filesystem::path& path);
void write_feature_blob(std::ostream& out, const DenseMatrix<float>& m);

// Label-only companion to the feature blob: header "N L", then one line of
// comma-separated label ids per instance (possibly empty).
LabelMatrix parse_label_text(std::istream& in);
LabelMatrix parse_label_text(const std::filesystem::path& path);
void write_label_text(std::ostream& out, const LabelMatrix& labels);

/// Gaussian-cluster generator. Labels are split into `clusters` contiguous
/// blocks; an instance drawn from cluster c sits at centroid_c + noise and is
/// tagged with the first `positives` labels of block c, each replaced by a
/// uniformly random label with probability `label_flip`.
struct SyntheticSpec {
    std::size_t n = 5000;
    std::size_t d = 64;
    std::size_t labels = 1000;
    std::size_t positives = 3;
    std::size_t clusters = 100;
    double noise = 0.5;        // feature noise standard deviation
    double label_flip = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    /// Label range [begin, end) of cluster c.
    std::pair<std::size_t, std::size_t> block(std::size_t c) const noexcept;
};

/// Also returns the cluster of every instance (useful for checks).
Dataset make_synthetic(const SyntheticSpec& spec, Rng& rng, std::vector<std::size_t>* clusters_out = nullptr);

/// One epoch of minibatch row indices. Every instance appears exactly once;
/// the last batch may be short.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, bool shuffle, Rng& rng);

template <typename T>
struct Batch {
    DenseMatrix<T> features;
    LabelMatrix labels;
};

template <typename T>
Batch<T> gather_batch(const Dataset& ds, std::span<const std::size_t> rows);

/// Random disjoint (train, validation) split with round(fraction * N)
/// validation rows. fraction 0 yields an empty validation set.
std::pair<Dataset, Dataset> split_validation(const Dataset& ds, double fraction, Rng& rng);

}  // namespace uxmc
