#include "uxmc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "uxmc/errors.hpp"
#include "uxmc/parallel.hpp"

namespace uxmc {

namespace {

std::string shape(std::size_t r, std::size_t c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

template <typename T>
DenseMatrix<T>::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw DimensionError("dense matrix " + shape(rows, cols) + " given " + std::to_string(data_.size()) +
                             " values");
    }
}

template <typename T>
void DenseMatrix<T>::fill(T v) {
    std::fill(data_.begin(), data_.end(), v);
}

template <typename T>
void DenseMatrix<T>::check_finite(const char* what) const {
    for (std::size_t k = 0; k < data_.size(); ++k) {
        if (!std::isfinite(data_[k])) {
            throw NumericError(std::string(what) + ": non-finite value at (" + std::to_string(k / cols_) + ", " +
                               std::to_string(k % cols_) + ")");
        }
    }
}

template <typename T>
DenseMatrix<T> dense_forward(const DenseMatrix<T>& weights, const DenseMatrix<T>& input, std::span<const T> bias) {
    if (input.cols() != weights.rows()) {
        throw DimensionError("dense_forward: input " + shape(input.rows(), input.cols()) + " vs weights " +
                             shape(weights.rows(), weights.cols()));
    }
    if (!bias.empty() && bias.size() != weights.cols()) {
        throw DimensionError("dense_forward: bias length " + std::to_string(bias.size()) + " vs " +
                             std::to_string(weights.cols()) + " outputs");
    }
    const std::size_t d_in = weights.rows(), d_out = weights.cols();
    DenseMatrix<T> out(input.rows(), d_out);
    parallel_for(input.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto o = out.row(i);
            auto x = input.row(i);
            for (std::size_t k = 0; k < d_in; ++k) {
                const T xk = x[k];
                auto w = weights.row(k);
                for (std::size_t j = 0; j < d_out; ++j) o[j] += xk * w[j];
            }
            if (!bias.empty()) {
                for (std::size_t j = 0; j < d_out; ++j) o[j] += bias[j];
            }
        }
    });
    return out;
}

template <typename T>
DenseMatrix<T> dense_backward_input(const DenseMatrix<T>& weights, const DenseMatrix<T>& upstream) {
    if (upstream.cols() != weights.cols()) {
        throw DimensionError("dense_backward_input: upstream " + shape(upstream.rows(), upstream.cols()) +
                             " vs weights " + shape(weights.rows(), weights.cols()));
    }
    const std::size_t d_in = weights.rows(), d_out = weights.cols();
    DenseMatrix<T> grad(upstream.rows(), d_in);
    parallel_for(upstream.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto g = upstream.row(i);
            auto o = grad.row(i);
            for (std::size_t k = 0; k < d_in; ++k) {
                auto w = weights.row(k);
                T acc{0};
                for (std::size_t j = 0; j < d_out; ++j) acc += g[j] * w[j];
                o[k] = acc;
            }
        }
    });
    return grad;
}

template <typename T>
DenseMatrix<T> dense_backward_weights(const DenseMatrix<T>& input, const DenseMatrix<T>& upstream) {
    if (input.rows() != upstream.rows()) {
        throw DimensionError("dense_backward_weights: input " + shape(input.rows(), input.cols()) +
                             " vs upstream " + shape(upstream.rows(), upstream.cols()));
    }
    const std::size_t b = input.rows(), d_in = input.cols(), d_out = upstream.cols();
    DenseMatrix<T> grad(d_in, d_out);
    parallel_for(d_in, [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            auto o = grad.row(k);
            for (std::size_t i = 0; i < b; ++i) {
                const T xk = input(i, k);
                if (xk == T{0}) continue;
                auto g = upstream.row(i);
                for (std::size_t j = 0; j < d_out; ++j) o[j] += xk * g[j];
            }
        }
    });
    return grad;
}

template <typename T>
std::vector<T> column_sums(const DenseMatrix<T>& upstream) {
    std::vector<T> out(upstream.cols(), T{0});
    for (std::size_t i = 0; i < upstream.rows(); ++i) {
        auto g = upstream.row(i);
        for (std::size_t j = 0; j < g.size(); ++j) out[j] += g[j];
    }
    return out;
}

template <typename T>
DenseMatrix<T> relu(const DenseMatrix<T>& x) {
    DenseMatrix<T> out(x.rows(), x.cols());
    auto in = x.values();
    auto o = out.values();
    for (std::size_t k = 0; k < in.size(); ++k) o[k] = in[k] > T{0} ? in[k] : T{0};
    return out;
}

template <typename T>
DenseMatrix<T> relu_backward(const DenseMatrix<T>& x, const DenseMatrix<T>& upstream) {
    if (x.rows() != upstream.rows() || x.cols() != upstream.cols()) {
        throw DimensionError("relu_backward: " + shape(x.rows(), x.cols()) + " vs " +
                             shape(upstream.rows(), upstream.cols()));
    }
    DenseMatrix<T> out(x.rows(), x.cols());
    auto in = x.values();
    auto g = upstream.values();
    auto o = out.values();
    for (std::size_t k = 0; k < in.size(); ++k) o[k] = in[k] > T{0} ? g[k] : T{0};
    return out;
}

template <typename T>
std::pair<DenseMatrix<T>, DropoutMask> dropout(const DenseMatrix<T>& x, double rate, Rng& rng, bool training) {
    if (!(rate >= 0.0 && rate < 1.0)) {
        throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
    }
    if (!training || rate == 0.0) return {x, DropoutMask{}};

    DropoutMask mask;
    mask.keep.resize(x.size());
    DenseMatrix<T> out(x.rows(), x.cols());
    const T scale = static_cast<T>(1.0 / (1.0 - rate));
    auto in = x.values();
    auto o = out.values();
    for (std::size_t k = 0; k < in.size(); ++k) {
        const bool keep = !rng.bernoulli(rate);
        mask.keep[k] = keep ? 1 : 0;
        o[k] = keep ? in[k] * scale : T{0};
    }
    return {std::move(out), std::move(mask)};
}

template <typename T>
std::vector<std::uint32_t> top_k(std::span<const T> scores, std::size_t k) {
    if (k > scores.size()) {
        throw ConfigError("top_k: k=" + std::to_string(k) + " exceeds " + std::to_string(scores.size()) + " scores");
    }
    std::vector<std::uint32_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0u);
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    };
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
    idx.resize(k);
    return idx;
}

#define UXMC_INSTANTIATE(T)                                                                                    \
    template class DenseMatrix<T>;                                                                             \
    template DenseMatrix<T> dense_forward(const DenseMatrix<T>&, const DenseMatrix<T>&, std::span<const T>);   \
    template DenseMatrix<T> dense_backward_input(const DenseMatrix<T>&, const DenseMatrix<T>&);                \
    template DenseMatrix<T> dense_backward_weights(const DenseMatrix<T>&, const DenseMatrix<T>&);              \
    template std::vector<T> column_sums(const DenseMatrix<T>&);                                                \
    template DenseMatrix<T> relu(const DenseMatrix<T>&);                                                       \
    template DenseMatrix<T> relu_backward(const DenseMatrix<T>&, const DenseMatrix<T>&);                       \
    template std::pair<DenseMatrix<T>, DropoutMask> dropout(const DenseMatrix<T>&, double, Rng&, bool);        \
    template std::vector<std::uint32_t> top_k(std::span<const T>, std::size_t);

UXMC_INSTANTIATE(float)
UXMC_INSTANTIATE(double)

}  // namespace uxmc
