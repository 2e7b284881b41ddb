#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "uxmc/rng.hpp"

namespace uxmc {

/// Row-major dense matrix. float is the working precision; double is used
/// for gradient checks and the deterministic reference mode.
template <typename T>
class DenseMatrix {
public:
    using value_type = T;

    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, T fill = T{0})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<T> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<T> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const T> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::span<T> values() noexcept { return data_; }
    std::span<const T> values() const noexcept { return data_; }
    std::vector<T>& storage() noexcept { return data_; }
    const std::vector<T>& storage() const noexcept { return data_; }

    void fill(T v);

    /// Throws NumericError naming `what` if any entry is NaN or infinite.
    void check_finite(const char* what) const;

    bool operator==(const DenseMatrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

template <typename To, typename From>
DenseMatrix<To> cast_matrix(const DenseMatrix<From>& m) {
    DenseMatrix<To> out(m.rows(), m.cols());
    for (std::size_t k = 0; k < m.size(); ++k) out.values()[k] = static_cast<To>(m.values()[k]);
    return out;
}

/// out[i,j] = sum_k input[i,k] * weights[k,j] (+ bias[j]).
/// weights is d_in x d_out, input is b x d_in; pass an empty bias to omit it.
template <typename T>
DenseMatrix<T> dense_forward(const DenseMatrix<T>& weights, const DenseMatrix<T>& input,
                             std::span<const T> bias = {});

/// upstream * weights^T : gradient with respect to the layer input.
template <typename T>
DenseMatrix<T> dense_backward_input(const DenseMatrix<T>& weights, const DenseMatrix<T>& upstream);

/// input^T * upstream : gradient with respect to the weights (d_in x d_out).
template <typename T>
DenseMatrix<T> dense_backward_weights(const DenseMatrix<T>& input, const DenseMatrix<T>& upstream);

/// Column sums of upstream: gradient with respect to a bias vector.
template <typename T>
std::vector<T> column_sums(const DenseMatrix<T>& upstream);

template <typename T>
DenseMatrix<T> relu(const DenseMatrix<T>& x);

/// Passes upstream where x > 0; the subgradient at exactly 0 is 0.
template <typename T>
DenseMatrix<T> relu_backward(const DenseMatrix<T>& x, const DenseMatrix<T>& upstream);

struct DropoutMask {
    std::vector<std::uint8_t> keep;  // empty when dropout was a no-op
};

/// Inverted dropout: in training mode each element is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate). Eval mode (or rate 0) is
/// the identity and leaves the mask empty.
template <typename T>
std::pair<DenseMatrix<T>, DropoutMask> dropout(const DenseMatrix<T>& x, double rate, Rng& rng, bool training);

/// Indices of the k largest scores, descending; equal scores keep the lower
/// index first.
template <typename T>
std::vector<std::uint32_t> top_k(std::span<const T> scores, std::size_t k);

}  // namespace uxmc
