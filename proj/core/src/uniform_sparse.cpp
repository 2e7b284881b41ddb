#include "uxmc/uniform_sparse.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "uxmc/binary_io.hpp"
#include "uxmc/errors.hpp"
#include "uxmc/parallel.hpp"

namespace uxmc {

template <typename T>
UniformSparseMatrix<T>::UniformSparseMatrix(std::size_t in_dim, std::size_t num_labels, std::size_t fan_in,
                                            std::vector<Index> indices, std::vector<T> weights)
    : in_dim_(in_dim), num_labels_(num_labels), fan_in_(fan_in), indices_(std::move(indices)),
      weights_(std::move(weights)) {
    if (fan_in_ == 0) throw ValidationError("uniform sparse matrix: fan-in must be positive");
    if (fan_in_ > in_dim_) {
        throw ValidationError("uniform sparse matrix: fan-in " + std::to_string(fan_in_) + " exceeds input dimension " +
                              std::to_string(in_dim_));
    }
    if (in_dim_ > std::size_t{0xffffffffu}) throw ValidationError("uniform sparse matrix: input dimension exceeds 32-bit index range");
    const std::size_t n = fan_in_ * num_labels_;
    if (indices_.size() != n || weights_.size() != n) {
        throw ValidationError("uniform sparse matrix: expected " + std::to_string(n) + " indices and weights, got " +
                              std::to_string(indices_.size()) + " and " + std::to_string(weights_.size()));
    }

    std::vector<std::size_t> perm(fan_in_);
    std::vector<Index> idx_tmp(fan_in_);
    std::vector<T> w_tmp(fan_in_);
    for (std::size_t j = 0; j < num_labels_; ++j) {
        Index* idx = indices_.data() + j * fan_in_;
        T* w = weights_.data() + j * fan_in_;
        for (std::size_t s = 0; s < fan_in_; ++s) {
            if (idx[s] >= in_dim_) {
                throw ValidationError("uniform sparse matrix: column " + std::to_string(j) + " index " +
                                      std::to_string(idx[s]) + " out of range " + std::to_string(in_dim_));
            }
        }
        if (std::is_sorted(idx, idx + fan_in_)) continue;
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return idx[a] < idx[b]; });
        for (std::size_t s = 0; s < fan_in_; ++s) {
            idx_tmp[s] = idx[perm[s]];
            w_tmp[s] = w[perm[s]];
        }
        std::copy(idx_tmp.begin(), idx_tmp.end(), idx);
        std::copy(w_tmp.begin(), w_tmp.end(), w);
    }
    validate();
}

template <typename T>
void UniformSparseMatrix<T>::validate() const {
    for (std::size_t j = 0; j < num_labels_; ++j) {
        const Index* idx = indices_.data() + j * fan_in_;
        for (std::size_t s = 0; s < fan_in_; ++s) {
            if (idx[s] >= in_dim_) {
                throw ValidationError("column " + std::to_string(j) + ": index " + std::to_string(idx[s]) +
                                      " out of range " + std::to_string(in_dim_));
            }
            if (s > 0 && idx[s] <= idx[s - 1]) {
                throw ValidationError("column " + std::to_string(j) +
                                      (idx[s] == idx[s - 1] ? ": duplicate index " : ": unsorted index ") +
                                      std::to_string(idx[s]));
            }
        }
    }
}

template <typename T>
DenseMatrix<T> sparse_forward(const UniformSparseMatrix<T>& w, const DenseMatrix<T>& features) {
    if (features.cols() != w.in_dim()) {
        throw DimensionError("sparse_forward: features have " + std::to_string(features.cols()) +
                             " columns, matrix expects " + std::to_string(w.in_dim()));
    }
    const std::size_t b = features.rows(), s = w.fan_in();
    DenseMatrix<T> out(b, w.num_labels());
    parallel_for(w.num_labels(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t label = begin; label < end; ++label) {
            const Index* idx = w.indices().data() + label * s;
            const T* wt = w.weights().data() + label * s;
            for (std::size_t i = 0; i < b; ++i) {
                const T* x = features.row(i).data();
                T value{0};
                for (std::size_t k = 0; k < s; ++k) value += x[idx[k]] * wt[k];
                out(i, label) = value;
            }
        }
    });
    return out;
}

template <typename T>
InputGradient<T> sparse_backward_input(const UniformSparseMatrix<T>& w, const DenseMatrix<T>& upstream) {
    if (upstream.cols() != w.num_labels()) {
        throw DimensionError("sparse_backward_input: upstream has " + std::to_string(upstream.cols()) +
                             " columns, matrix has " + std::to_string(w.num_labels()) + " labels");
    }
    const std::size_t b = upstream.rows(), d = w.in_dim(), L = w.num_labels(), s = w.fan_in();
    InputGradient<T> result{DenseMatrix<T>(b, d), SkipStats{0, static_cast<std::uint64_t>(b) * L}};

    auto accumulate = [&](std::size_t i, std::size_t label_begin, std::size_t label_end, T* grad_row) {
        std::uint64_t skipped = 0;
        const T* up = upstream.row(i).data();
        for (std::size_t label = label_begin; label < label_end; ++label) {
            const T out = up[label];
            if (out == T{0}) {
                ++skipped;
                continue;
            }
            const Index* idx = w.indices().data() + label * s;
            const T* wt = w.weights().data() + label * s;
            for (std::size_t k = 0; k < s; ++k) grad_row[idx[k]] += wt[k] * out;
        }
        return skipped;
    };

    const std::size_t workers = num_threads();
    if (b >= workers) {
        std::vector<std::uint64_t> skipped(parallel_chunks(b), 0);
        parallel_for_chunks(b, [&](std::size_t c, std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) skipped[c] += accumulate(i, 0, L, result.grad.row(i).data());
        });
        for (auto v : skipped) result.stats.skipped += v;
        return result;
    }

    // Small batch: split labels, reduce private buffers in chunk order.
    const std::size_t chunks = parallel_chunks(L);
    std::vector<DenseMatrix<T>> partial(chunks);
    std::vector<std::uint64_t> skipped(chunks, 0);
    parallel_for_chunks(L, [&](std::size_t c, std::size_t begin, std::size_t end) {
        partial[c] = DenseMatrix<T>(b, d);
        for (std::size_t i = 0; i < b; ++i) skipped[c] += accumulate(i, begin, end, partial[c].row(i).data());
    });
    auto g = result.grad.values();
    for (std::size_t c = 0; c < chunks; ++c) {
        result.stats.skipped += skipped[c];
        if (partial[c].empty()) continue;
        auto p = partial[c].values();
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += p[k];
    }
    return result;
}

template <typename T>
std::vector<T> sparse_backward_weights(const UniformSparseMatrix<T>& w, const DenseMatrix<T>& features,
                                       const DenseMatrix<T>& upstream) {
    if (features.cols() != w.in_dim() || upstream.cols() != w.num_labels() || features.rows() != upstream.rows()) {
        throw DimensionError("sparse_backward_weights: features " + std::to_string(features.rows()) + "x" +
                             std::to_string(features.cols()) + ", upstream " + std::to_string(upstream.rows()) + "x" +
                             std::to_string(upstream.cols()) + ", matrix " + std::to_string(w.in_dim()) + "x" +
                             std::to_string(w.num_labels()));
    }
    const std::size_t b = features.rows(), s = w.fan_in();
    std::vector<T> grad(w.nnz(), T{0});
    parallel_for(w.num_labels(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t label = begin; label < end; ++label) {
            const Index* idx = w.indices().data() + label * s;
            T* g = grad.data() + label * s;
            for (std::size_t i = 0; i < b; ++i) {
                const T out = upstream(i, label);
                if (out == T{0}) continue;
                const T* x = features.row(i).data();
                for (std::size_t k = 0; k < s; ++k) g[k] += x[idx[k]] * out;
            }
        }
    });
    return grad;
}

template <typename T>
DenseMatrix<T> to_dense(const UniformSparseMatrix<T>& w) {
    DenseMatrix<T> out(w.in_dim(), w.num_labels());
    std::vector<std::size_t> seen(w.in_dim(), static_cast<std::size_t>(-1));
    for (std::size_t j = 0; j < w.num_labels(); ++j) {
        auto idx = w.column_indices(j);
        auto wt = w.column_weights(j);
        for (std::size_t k = 0; k < idx.size(); ++k) {
            if (idx[k] >= w.in_dim()) {
                throw ValidationError("to_dense: column " + std::to_string(j) + " index out of range");
            }
            if (seen[idx[k]] == j) {
                throw ValidationError("to_dense: duplicate index " + std::to_string(idx[k]) + " in column " +
                                      std::to_string(j));
            }
            seen[idx[k]] = j;
            out(idx[k], j) = wt[k];
        }
    }
    return out;
}

template <typename T>
void write_ufsm(std::ostream& out, const UniformSparseMatrix<T>& w) {
    binary::write_magic(out, "UFSM");
    binary::write_u32(out, kUfsmVersion);
    binary::write_u32(out, static_cast<std::uint32_t>(w.in_dim()));
    binary::write_u32(out, static_cast<std::uint32_t>(w.num_labels()));
    binary::write_u32(out, static_cast<std::uint32_t>(w.fan_in()));
    for (Index i : w.indices()) binary::write_u32(out, i);
    for (T v : w.weights()) binary::write_f32(out, static_cast<float>(v));
    if (!out) throw FormatError("UFSM: write failed");
}

template <typename T>
UniformSparseMatrix<T> read_ufsm(std::istream& in) {
    binary::expect_magic(in, "UFSM", "UFSM");
    const auto version = binary::read_u32(in, "UFSM");
    if (version != kUfsmVersion) throw FormatError("UFSM: unsupported version " + std::to_string(version));
    const std::size_t d = binary::read_u32(in, "UFSM");
    const std::size_t L = binary::read_u32(in, "UFSM");
    const std::size_t s = binary::read_u32(in, "UFSM");
    std::vector<Index> indices(s * L);
    std::vector<T> weights(s * L);
    for (auto& i : indices) i = binary::read_u32(in, "UFSM");
    for (auto& v : weights) v = static_cast<T>(binary::read_f32(in, "UFSM"));
    try {
        return UniformSparseMatrix<T>(d, L, s, std::move(indices), std::move(weights));
    } catch (const ValidationError& e) {
        throw FormatError(std::string("UFSM: ") + e.what());
    }
}

std::string_view to_string(StorageFormat f) {
    switch (f) {
        case StorageFormat::Dense: return "DENSE";
        case StorageFormat::Coo64: return "COO64";
        case StorageFormat::Coo32: return "COO32";
        case StorageFormat::Csc32: return "CSC32";
        case StorageFormat::Uniform: return "UNIFORM";
    }
    return "?";
}

std::uint64_t MemoryModel::bytes() const {
    switch (format) {
        case StorageFormat::Dense: return 4 * rows * cols;
        case StorageFormat::Coo64: return 20 * nnz;  // 2 x i64 + f32
        case StorageFormat::Coo32: return 12 * nnz;  // 2 x i32 + f32
        case StorageFormat::Csc32: return 8 * nnz + 4 * (cols + 1);
        case StorageFormat::Uniform: return 8 * nnz;  // i32 row + f32, column implicit
    }
    return 0;
}

std::uint64_t MemoryModel::index_bytes() const {
    switch (format) {
        case StorageFormat::Dense: return 0;
        case StorageFormat::Coo64: return 16 * nnz;
        case StorageFormat::Coo32: return 8 * nnz;
        case StorageFormat::Csc32: return 4 * nnz + 4 * (cols + 1);
        case StorageFormat::Uniform: return 4 * nnz;
    }
    return 0;
}

#define UXMC_INSTANTIATE(T)                                                                                     \
    template class UniformSparseMatrix<T>;                                                                      \
    template DenseMatrix<T> sparse_forward(const UniformSparseMatrix<T>&, const DenseMatrix<T>&);               \
    template InputGradient<T> sparse_backward_input(const UniformSparseMatrix<T>&, const DenseMatrix<T>&);      \
    template std::vector<T> sparse_backward_weights(const UniformSparseMatrix<T>&, const DenseMatrix<T>&,       \
                                                    const DenseMatrix<T>&);                                     \
    template DenseMatrix<T> to_dense(const UniformSparseMatrix<T>&);                                            \
    template void write_ufsm(std::ostream&, const UniformSparseMatrix<T>&);                                     \
    template UniformSparseMatrix<T> read_ufsm(std::istream&);

UXMC_INSTANTIATE(float)
UXMC_INSTANTIATE(double)

}  // namespace uxmc
