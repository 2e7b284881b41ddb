#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uxmc/optimizer.hpp"
#include "uxmc/rng.hpp"
#include "uxmc/tensor.hpp"
#include "uxmc/uniform_sparse.hpp"

namespace uxmc {

enum class HeadKind { Dense, UniformSparse };
enum class Activation { Relu, None };

std::string_view to_string(HeadKind h);  // "dense" | "uniform"
HeadKind parse_head(std::string_view s);
std::string_view to_string(Activation a);  // "relu" | "none"
Activation parse_activation(std::string_view s);

/// features (b x d) -> [dropout] -> [dense d x m + bias, activation] -> head (-> L scores)
struct ModelConfig {
    std::size_t feature_dim = 0;
    std::size_t intermediate_dim = 0;  // 0: no intermediate layer
    HeadKind head = HeadKind::UniformSparse;
    std::size_t fan_in = 32;           // uniform head only
    std::size_t num_labels = 0;
    double input_dropout = 0.0;
    Activation activation = Activation::Relu;
    bool head_bias = false;
    std::uint64_t seed = 0;

    bool has_intermediate() const noexcept { return intermediate_dim > 0; }
    std::size_t head_input_dim() const noexcept { return has_intermediate() ? intermediate_dim : feature_dim; }

    /// Throws ConfigError. A uniform head needs 2 <= fan_in <= head input width.
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct DenseLayer {
    DenseMatrix<T> weights;  // d_in x d_out
    std::vector<T> bias;     // d_out
};

/// Activations retained by forward() for the matching backward() call.
template <typename T>
struct ForwardTrace {
    DenseMatrix<T> input;           // features after dropout
    DenseMatrix<T> pre_activation;  // intermediate layer only
    DenseMatrix<T> hidden;          // head input when an intermediate layer exists
    DenseMatrix<T> scores;
    std::uint64_t generation = 0;
};

/// Gradients aligned block-for-block with Model::parameters().
template <typename T>
struct GradientSet {
    std::vector<std::vector<T>> blocks;
    SkipStats skip;
};

template <typename T>
class Model {
public:
    /// Random initialization. Sparse columns get `fan_in` distinct sources
    /// drawn uniformly (then sorted) and weights U(+-1/sqrt(fan_in)); dense
    /// weights are U(+-1/sqrt(d_in)); biases start at zero.
    static Model init(const ModelConfig& cfg, Rng& rng);

    /// Assemble from existing parameters (checkpoint loading, tests).
    /// Exactly one of `dense_head` / `sparse_head` must be set, matching cfg.head.
    Model(ModelConfig cfg, std::optional<DenseLayer<T>> intermediate, std::optional<DenseMatrix<T>> dense_head,
          std::optional<UniformSparseMatrix<T>> sparse_head, std::vector<T> head_bias);

    const ModelConfig& config() const noexcept { return cfg_; }
    const std::optional<DenseLayer<T>>& intermediate() const noexcept { return intermediate_; }
    const DenseMatrix<T>* dense_head() const noexcept { return dense_head_ ? &*dense_head_ : nullptr; }
    const UniformSparseMatrix<T>* sparse_head() const noexcept { return sparse_head_ ? &*sparse_head_ : nullptr; }
    const std::vector<T>& head_bias() const noexcept { return head_bias_; }

    /// Mutable structural access for connection redistribution.
    UniformSparseMatrix<T>* sparse_head_mut() noexcept;

    ForwardTrace<T> forward(const DenseMatrix<T>& features, bool training, Rng& rng) const;
    /// Eval-mode scores (no dropout).
    DenseMatrix<T> predict(const DenseMatrix<T>& features) const;

    /// Throws ValidationError if the trace was produced before the last
    /// parameter mutation or by a differently shaped model.
    GradientSet<T> backward(const ForwardTrace<T>& trace, const DenseMatrix<T>& grad_scores) const;

    /// Trainable blocks in a fixed order. Invalidates outstanding traces.
    std::vector<ParamBlock<T>> parameters();
    std::vector<std::string> parameter_names() const;
    /// Position of the head weight block within parameters().
    std::size_t head_block() const noexcept { return cfg_.has_intermediate() ? 2 : 0; }

    std::uint64_t generation() const noexcept { return generation_; }

private:
    Model() = default;
    void touch() noexcept;

    ModelConfig cfg_;
    std::optional<DenseLayer<T>> intermediate_;
    std::optional<DenseMatrix<T>> dense_head_;
    std::optional<UniformSparseMatrix<T>> sparse_head_;
    std::vector<T> head_bias_;
    std::uint64_t generation_ = 0;
};

}  // namespace uxmc
