#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "uxmc/labels.hpp"
#include "uxmc/rng.hpp"
#include "uxmc/tensor.hpp"
#include "uxmc/uniform_sparse.hpp"

namespace uxmc {

/// h_r(l) = ((a_r * l + b_r) mod p) mod B, with p prime and p > L.
struct MachHash {
    std::uint64_t a = 1;
    std::uint64_t b = 0;
};

struct MachEnsembleSpec {
    std::size_t repetitions = 1;  // R
    std::size_t buckets = 2;      // B
    std::size_t num_labels = 0;   // L
    std::uint64_t prime = 2;      // p
    std::vector<MachHash> hashes; // one per repetition

    /// Draws R hash functions from the modular 2-universal family.
    static MachEnsembleSpec random(std::size_t repetitions, std::size_t buckets, std::size_t num_labels, Rng& rng);

    /// Throws ConfigError: B >= 2, p prime > L, a in [1,p), b in [0,p).
    void validate() const;
    std::uint32_t bucket(std::size_t r, std::uint64_t label) const noexcept;
};

std::uint64_t next_prime_above(std::uint64_t n);
bool is_prime(std::uint64_t n);

/// The label-to-bucket indicator matrices C^(r) in {0,1}^{L x B}, stored as
/// one bucket id per (r, label). Stacked horizontally they form an
/// L x (R*B) matrix with exactly R ones per row, i.e. a uniform sparse
/// matrix with fan-in R over R*B inputs.
class IndicatorMatrix {
public:
    /// bucket_of[r * L + l] = bucket of label l under repetition r.
    IndicatorMatrix(std::size_t repetitions, std::size_t buckets, std::size_t num_labels,
                    std::vector<std::uint32_t> bucket_of);

    std::size_t repetitions() const noexcept { return repetitions_; }
    std::size_t buckets() const noexcept { return buckets_; }
    std::size_t num_labels() const noexcept { return num_labels_; }
    std::size_t meta_dim() const noexcept { return repetitions_ * buckets_; }

    std::uint32_t bucket(std::size_t r, std::size_t label) const noexcept { return bucket_of_[r * num_labels_ + label]; }
    /// Column of the stacked matrix: r * B + bucket.
    std::uint32_t stacked_column(std::size_t r, std::size_t label) const noexcept {
        return static_cast<std::uint32_t>(r * buckets_ + bucket(r, label));
    }

    /// Row sums of the stacked matrix, computed from its sparse form.
    std::vector<std::size_t> stacked_row_sums() const;

    /// Stacked matrix as a (R*B) x L uniform sparse matrix with unit weights.
    template <typename T>
    UniformSparseMatrix<T> stacked() const;

private:
    std::size_t repetitions_;
    std::size_t buckets_;
    std::size_t num_labels_;
    std::vector<std::uint32_t> bucket_of_;
};

IndicatorMatrix build_indicators(const MachEnsembleSpec& spec);

/// Meta-label r*B + q is positive iff some positive label hashes to bucket q
/// under repetition r (binarised OR).
LabelMatrix meta_targets(const LabelMatrix& labels, const IndicatorMatrix& c);

/// Per-label decode: (B/(B-1)) * ((1/R) * sum_r meta[r*B + h_r(l)] - 1/B).
template <typename T>
DenseMatrix<T> mach_decode(const DenseMatrix<T>& meta_scores, const IndicatorMatrix& c);

/// Same estimate computed as one sparse product with the stacked indicator
/// matrix followed by the affine correction.
template <typename T>
DenseMatrix<T> mach_decode_stacked(const DenseMatrix<T>& meta_scores, const IndicatorMatrix& c);

}  // namespace uxmc
