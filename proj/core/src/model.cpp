#include "uxmc/model.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "uxmc/errors.hpp"

namespace uxmc {

namespace {

std::atomic<std::uint64_t> g_generation{1};

std::uint64_t next_generation() noexcept { return g_generation.fetch_add(1, std::memory_order_relaxed); }

template <typename T>
DenseMatrix<T> uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
    DenseMatrix<T> m(rows, cols);
    for (auto& v : m.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    return m;
}

// k distinct values from [0, n), sorted.
std::vector<Index> sample_sources(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<Index> out;
    out.reserve(k);
    if (n < 4 * k) {
        std::vector<Index> pool(n);
        for (std::size_t r = 0; r < n; ++r) pool[r] = static_cast<Index>(r);
        for (std::size_t q = 0; q < k; ++q) {
            std::swap(pool[q], pool[q + rng.below(n - q)]);
            out.push_back(pool[q]);
        }
    } else {
        while (out.size() < k) {
            const auto r = static_cast<Index>(rng.below(n));
            if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

template <typename T>
void add_bias(DenseMatrix<T>& m, std::span<const T> bias) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
    }
}

}  // namespace

std::string_view to_string(HeadKind h) { return h == HeadKind::Dense ? "dense" : "uniform"; }

HeadKind parse_head(std::string_view s) {
    if (s == "dense") return HeadKind::Dense;
    if (s == "uniform" || s == "uniform_sparse" || s == "sparse") return HeadKind::UniformSparse;
    throw ConfigError("model.head must be 'dense' or 'uniform', got '" + std::string(s) + "'");
}

std::string_view to_string(Activation a) { return a == Activation::Relu ? "relu" : "none"; }

Activation parse_activation(std::string_view s) {
    if (s == "relu") return Activation::Relu;
    if (s == "none") return Activation::None;
    throw ConfigError("model.activation must be 'relu' or 'none', got '" + std::string(s) + "'");
}

void ModelConfig::validate() const {
    if (feature_dim == 0) throw ConfigError("model.feature_dim must be positive");
    if (num_labels == 0) throw ConfigError("model.num_labels must be positive");
    if (!(input_dropout >= 0.0 && input_dropout < 1.0)) throw ConfigError("model.input_dropout must lie in [0, 1)");
    if (head == HeadKind::UniformSparse) {
        const std::size_t width = head_input_dim();
        if (fan_in < 2 || fan_in > width) {
            throw ConfigError("model.fan_in must satisfy 2 <= fan_in <= " + std::to_string(width) + ", got " +
                              std::to_string(fan_in));
        }
    }
}

template <typename T>
Model<T> Model<T>::init(const ModelConfig& cfg, Rng& rng) {
    cfg.validate();
    Model m;
    m.cfg_ = cfg;
    const Rng base(rng.next_u64());
    const std::size_t width = cfg.head_input_dim();
    if (cfg.has_intermediate()) {
        Rng r = base.split(1);
        m.intermediate_ = DenseLayer<T>{
            uniform_matrix<T>(cfg.feature_dim, cfg.intermediate_dim,
                              1.0 / std::sqrt(static_cast<double>(cfg.feature_dim)), r),
            std::vector<T>(cfg.intermediate_dim, T{0})};
    }
    Rng head_rng = base.split(2);
    if (cfg.head == HeadKind::Dense) {
        m.dense_head_ = uniform_matrix<T>(width, cfg.num_labels, 1.0 / std::sqrt(static_cast<double>(width)), head_rng);
    } else {
        const std::size_t s = cfg.fan_in, L = cfg.num_labels;
        const double bound = 1.0 / std::sqrt(static_cast<double>(s));
        std::vector<Index> indices(s * L);
        std::vector<T> weights(s * L);
        for (std::size_t j = 0; j < L; ++j) {
            Rng col = head_rng.split(j);
            auto src = sample_sources(width, s, col);
            std::copy(src.begin(), src.end(), indices.begin() + static_cast<std::ptrdiff_t>(j * s));
            for (std::size_t k = 0; k < s; ++k) weights[j * s + k] = static_cast<T>(col.uniform(-bound, bound));
        }
        m.sparse_head_ = UniformSparseMatrix<T>(width, L, s, std::move(indices), std::move(weights));
    }
    if (cfg.head_bias) m.head_bias_.assign(cfg.num_labels, T{0});
    m.touch();
    return m;
}

template <typename T>
Model<T>::Model(ModelConfig cfg, std::optional<DenseLayer<T>> intermediate, std::optional<DenseMatrix<T>> dense_head,
                std::optional<UniformSparseMatrix<T>> sparse_head, std::vector<T> head_bias)
    : cfg_(std::move(cfg)), intermediate_(std::move(intermediate)), dense_head_(std::move(dense_head)),
      sparse_head_(std::move(sparse_head)), head_bias_(std::move(head_bias)) {
    cfg_.validate();
    const std::size_t width = cfg_.head_input_dim();
    if (cfg_.has_intermediate() != intermediate_.has_value()) {
        throw ConfigError("model: intermediate layer presence does not match configuration");
    }
    if (intermediate_) {
        if (intermediate_->weights.rows() != cfg_.feature_dim || intermediate_->weights.cols() != cfg_.intermediate_dim ||
            intermediate_->bias.size() != cfg_.intermediate_dim) {
            throw DimensionError("model: intermediate layer shape does not match configuration");
        }
    }
    if (cfg_.head == HeadKind::Dense) {
        if (!dense_head_ || sparse_head_) throw ConfigError("model: expected a dense head");
        if (dense_head_->rows() != width || dense_head_->cols() != cfg_.num_labels) {
            throw DimensionError("model: dense head shape does not match configuration");
        }
    } else {
        if (!sparse_head_ || dense_head_) throw ConfigError("model: expected a uniform sparse head");
        if (sparse_head_->in_dim() != width || sparse_head_->num_labels() != cfg_.num_labels ||
            sparse_head_->fan_in() != cfg_.fan_in) {
            throw DimensionError("model: sparse head shape does not match configuration");
        }
    }
    if (head_bias_.size() != (cfg_.head_bias ? cfg_.num_labels : 0)) {
        throw DimensionError("model: head bias length does not match configuration");
    }
    touch();
}

template <typename T>
void Model<T>::touch() noexcept {
    generation_ = next_generation();
}

template <typename T>
UniformSparseMatrix<T>* Model<T>::sparse_head_mut() noexcept {
    touch();
    return sparse_head_ ? &*sparse_head_ : nullptr;
}

template <typename T>
ForwardTrace<T> Model<T>::forward(const DenseMatrix<T>& features, bool training, Rng& rng) const {
    if (features.cols() != cfg_.feature_dim) {
        throw DimensionError("model forward: features have " + std::to_string(features.cols()) +
                             " columns, model expects " + std::to_string(cfg_.feature_dim));
    }
    ForwardTrace<T> trace;
    trace.generation = generation_;
    trace.input = dropout(features, cfg_.input_dropout, rng, training).first;

    const DenseMatrix<T>* head_in = &trace.input;
    if (intermediate_) {
        trace.pre_activation = dense_forward(intermediate_->weights, trace.input, std::span<const T>(intermediate_->bias));
        trace.hidden = cfg_.activation == Activation::Relu ? relu(trace.pre_activation) : trace.pre_activation;
        head_in = &trace.hidden;
    }
    trace.scores = dense_head_ ? dense_forward(*dense_head_, *head_in) : sparse_forward(*sparse_head_, *head_in);
    if (!head_bias_.empty()) add_bias(trace.scores, std::span<const T>(head_bias_));
    return trace;
}

template <typename T>
DenseMatrix<T> Model<T>::predict(const DenseMatrix<T>& features) const {
    Rng unused(0);
    return forward(features, false, unused).scores;
}

template <typename T>
GradientSet<T> Model<T>::backward(const ForwardTrace<T>& trace, const DenseMatrix<T>& grad_scores) const {
    if (trace.generation != generation_) {
        throw ValidationError("model backward: trace is stale (parameters changed since forward)");
    }
    const DenseMatrix<T>& head_in = intermediate_ ? trace.hidden : trace.input;
    if (grad_scores.rows() != trace.scores.rows() || grad_scores.cols() != cfg_.num_labels ||
        head_in.cols() != cfg_.head_input_dim()) {
        throw DimensionError("model backward: gradient or trace shape mismatch");
    }

    GradientSet<T> out;
    DenseMatrix<T> grad_hidden;
    std::vector<T> head_grad;
    if (dense_head_) {
        head_grad = std::move(dense_backward_weights(head_in, grad_scores).storage());
        if (intermediate_) grad_hidden = dense_backward_input(*dense_head_, grad_scores);
        out.skip.total = static_cast<std::uint64_t>(grad_scores.size());
    } else {
        head_grad = sparse_backward_weights(*sparse_head_, head_in, grad_scores);
        if (intermediate_) {
            auto input_grad = sparse_backward_input(*sparse_head_, grad_scores);
            out.skip = input_grad.stats;
            grad_hidden = std::move(input_grad.grad);
        } else {
            // Fixed input features need no gradient; only count the zeros.
            out.skip.total = static_cast<std::uint64_t>(grad_scores.size());
            for (T g : grad_scores.values()) out.skip.skipped += g == T{0} ? 1 : 0;
        }
    }

    if (intermediate_) {
        const DenseMatrix<T> grad_pre =
            cfg_.activation == Activation::Relu ? relu_backward(trace.pre_activation, grad_hidden) : grad_hidden;
        out.blocks.push_back(std::move(dense_backward_weights(trace.input, grad_pre).storage()));
        out.blocks.push_back(column_sums(grad_pre));
    }
    out.blocks.push_back(std::move(head_grad));
    if (!head_bias_.empty()) out.blocks.push_back(column_sums(grad_scores));
    return out;
}

template <typename T>
std::vector<ParamBlock<T>> Model<T>::parameters() {
    touch();
    std::vector<ParamBlock<T>> blocks;
    if (intermediate_) {
        blocks.push_back({"intermediate.weights", intermediate_->weights.values()});
        blocks.push_back({"intermediate.bias", std::span<T>(intermediate_->bias)});
    }
    if (dense_head_) {
        blocks.push_back({"head.weights", dense_head_->values()});
    } else {
        blocks.push_back({"head.weights", sparse_head_->weights()});
    }
    if (!head_bias_.empty()) blocks.push_back({"head.bias", std::span<T>(head_bias_)});
    return blocks;
}

template <typename T>
std::vector<std::string> Model<T>::parameter_names() const {
    std::vector<std::string> names;
    if (intermediate_) {
        names.emplace_back("intermediate.weights");
        names.emplace_back("intermediate.bias");
    }
    names.emplace_back("head.weights");
    if (!head_bias_.empty()) names.emplace_back("head.bias");
    return names;
}

template class Model<float>;
template class Model<double>;

}  // namespace uxmc
