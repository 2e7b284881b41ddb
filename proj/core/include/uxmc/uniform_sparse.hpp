#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "uxmc/tensor.hpp"

namespace uxmc {

using Index = std::uint32_t;

/// A d x L weight matrix in which every column (label) has exactly
/// `fan_in` structural non-zeros.
///
/// Storage is two s x L arrays laid out column-contiguous: slot w of
/// column j lives at offset j * s + w in both `indices` and `weights`.
/// Column offsets are implicit, so redistributing the connections of one
/// column never moves data belonging to another. Within a column the
/// source indices are distinct and kept in ascending order.
template <typename T>
class UniformSparseMatrix {
public:
    UniformSparseMatrix() = default;

    /// Validates ranges and distinctness, then sorts every column ascending
    /// by source index (weights travel with their index).
    UniformSparseMatrix(std::size_t in_dim, std::size_t num_labels, std::size_t fan_in, std::vector<Index> indices,
                        std::vector<T> weights);

    std::size_t in_dim() const noexcept { return in_dim_; }
    std::size_t num_labels() const noexcept { return num_labels_; }
    std::size_t fan_in() const noexcept { return fan_in_; }
    std::size_t nnz() const noexcept { return indices_.size(); }

    std::span<const Index> indices() const noexcept { return indices_; }
    std::span<const T> weights() const noexcept { return weights_; }
    std::span<T> weights() noexcept { return weights_; }

    std::span<const Index> column_indices(std::size_t j) const noexcept { return {indices_.data() + j * fan_in_, fan_in_}; }
    std::span<const T> column_weights(std::size_t j) const noexcept { return {weights_.data() + j * fan_in_, fan_in_}; }
    std::span<T> column_weights(std::size_t j) noexcept { return {weights_.data() + j * fan_in_, fan_in_}; }

    /// Direct structural access for connection redistribution. Callers are
    /// responsible for restoring the invariants; validate() re-checks them.
    std::span<Index> column_indices_mut(std::size_t j) noexcept { return {indices_.data() + j * fan_in_, fan_in_}; }

    /// Throws ValidationError on an out-of-range, duplicate or unsorted index.
    void validate() const;

    bool operator==(const UniformSparseMatrix&) const = default;

private:
    std::size_t in_dim_ = 0;
    std::size_t num_labels_ = 0;
    std::size_t fan_in_ = 0;
    std::vector<Index> indices_;
    std::vector<T> weights_;
};

template <typename To, typename From>
UniformSparseMatrix<To> cast_matrix(const UniformSparseMatrix<From>& m) {
    std::vector<To> w(m.weights().begin(), m.weights().end());
    return UniformSparseMatrix<To>(m.in_dim(), m.num_labels(), m.fan_in(),
                                   std::vector<Index>(m.indices().begin(), m.indices().end()), std::move(w));
}

/// Work skipped by the input-gradient kernel because the upstream signal
/// was exactly zero.
struct SkipStats {
    std::uint64_t skipped = 0;
    std::uint64_t total = 0;

    double fraction() const noexcept { return total == 0 ? 0.0 : static_cast<double>(skipped) / static_cast<double>(total); }
    SkipStats& operator+=(const SkipStats& o) noexcept {
        skipped += o.skipped;
        total += o.total;
        return *this;
    }
};

/// output[i,j] = sum_w features[i, indices[w,j]] * weights[w,j].
/// Each (instance, label) score is an independent unit of work.
template <typename T>
DenseMatrix<T> sparse_forward(const UniformSparseMatrix<T>& w, const DenseMatrix<T>& features);

template <typename T>
struct InputGradient {
    DenseMatrix<T> grad;
    SkipStats stats;
};

/// Gradient with respect to the features. (instance, label) pairs whose
/// upstream value is exactly zero are skipped before any index or weight is
/// loaded. Rows of the result are owned by one worker each when the batch
/// is large enough; otherwise labels are split across workers into private
/// buffers that are summed in chunk order.
template <typename T>
InputGradient<T> sparse_backward_input(const UniformSparseMatrix<T>& w, const DenseMatrix<T>& upstream);

/// grad[w,j] = sum_i features[i, indices[w,j]] * upstream[i,j], in the same
/// s x L layout as the weights. Zero upstream entries skip the feature load.
template <typename T>
std::vector<T> sparse_backward_weights(const UniformSparseMatrix<T>& w, const DenseMatrix<T>& features,
                                       const DenseMatrix<T>& upstream);

/// Scatter into a dense d x L matrix. Throws ValidationError on a duplicate
/// index within a column.
template <typename T>
DenseMatrix<T> to_dense(const UniformSparseMatrix<T>& w);

// Flat little-endian blob: "UFSM", version u32, d u32, L u32, s u32,
// then s*L u32 indices and s*L f32 weights, both column-major.
inline constexpr std::uint32_t kUfsmVersion = 1;

template <typename T>
void write_ufsm(std::ostream& out, const UniformSparseMatrix<T>& w);
template <typename T>
UniformSparseMatrix<T> read_ufsm(std::istream& in);

// ---------------------------------------------------------------------------
// Byte accounting for the storage formats a d x L sparse layer could use.

enum class StorageFormat { Dense, Coo64, Coo32, Csc32, Uniform };

std::string_view to_string(StorageFormat f);

struct MemoryModel {
    StorageFormat format;
    std::uint64_t nnz = 0;
    std::uint64_t rows = 0;
    std::uint64_t cols = 0;

    /// DENSE 4*rows*cols; COO64 20*nnz; COO32 12*nnz; CSC32 8*nnz + 4*(cols+1);
    /// UNIFORM 8*nnz. All values are 32-bit floats.
    std::uint64_t bytes() const;
    /// Bytes spent on structure (indices and offsets) only.
    std::uint64_t index_bytes() const;
};

inline std::uint64_t memory_bytes(const MemoryModel& m) { return m.bytes(); }

}  // namespace uxmc
