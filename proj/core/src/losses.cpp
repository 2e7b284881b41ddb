#include "uxmc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "uxmc/errors.hpp"
#include "uxmc/parallel.hpp"

namespace uxmc {

LabelMatrix LabelMatrix::from_lists(std::size_t num_labels, const std::vector<std::vector<std::uint32_t>>& lists) {
    LabelMatrix out(num_labels);
    std::vector<std::uint32_t> row;
    for (std::size_t i = 0; i < lists.size(); ++i) {
        row = lists[i];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        if (!row.empty() && row.back() >= num_labels) {
            throw ValidationError("instance " + std::to_string(i) + ": label " + std::to_string(row.back()) +
                                  " >= " + std::to_string(num_labels));
        }
        out.push_back(row);
    }
    return out;
}

bool LabelMatrix::contains(std::size_t i, std::uint32_t label) const noexcept {
    auto p = positives(i);
    return std::binary_search(p.begin(), p.end(), label);
}

void LabelMatrix::push_back(std::span<const std::uint32_t> labels) {
    ids_.insert(ids_.end(), labels.begin(), labels.end());
    offsets_.push_back(ids_.size());
}

LabelMatrix LabelMatrix::gather(std::span<const std::size_t> rows) const {
    LabelMatrix out(num_labels_);
    for (std::size_t r : rows) out.push_back(positives(r));
    return out;
}

std::string_view to_string(LossKind k) { return k == LossKind::SquaredHinge ? "sqh" : "bce"; }

LossKind parse_loss(std::string_view s) {
    if (s == "sqh") return LossKind::SquaredHinge;
    if (s == "bce") return LossKind::Bce;
    throw ConfigError("loss must be 'sqh' or 'bce', got '" + std::string(s) + "'");
}

namespace {

template <typename T>
void check_shapes(const DenseMatrix<T>& scores, const LabelMatrix& labels, const char* what) {
    if (scores.rows() != labels.num_instances() || scores.cols() != labels.num_labels()) {
        throw DimensionError(std::string(what) + ": scores " + std::to_string(scores.rows()) + "x" +
                             std::to_string(scores.cols()) + " vs labels " + std::to_string(labels.num_instances()) +
                             "x" + std::to_string(labels.num_labels()));
    }
}

// Row-wise partial losses are summed in row order so the scalar does not
// depend on the thread count.
template <typename T, typename RowFn>
LossResult<T> elementwise_loss(const DenseMatrix<T>& scores, const LabelMatrix& labels, RowFn per_element) {
    const std::size_t b = scores.rows(), L = scores.cols();
    LossResult<T> result{0.0, DenseMatrix<T>(b, L)};
    if (b == 0) return result;
    const double inv_b = 1.0 / static_cast<double>(b);
    std::vector<double> row_loss(b, 0.0);
    parallel_for(b, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto pos = labels.positives(i);
            auto s = scores.row(i);
            auto g = result.grad.row(i);
            std::size_t next = 0;
            double acc = 0.0;
            for (std::size_t j = 0; j < L; ++j) {
                const bool positive = next < pos.size() && pos[next] == j;
                if (positive) ++next;
                double grad = 0.0;
                acc += per_element(static_cast<double>(s[j]), positive, grad);
                g[j] = static_cast<T>(grad * inv_b);
            }
            row_loss[i] = acc;
        }
    });
    double total = 0.0;
    for (double v : row_loss) total += v;
    result.loss = total * inv_b;
    return result;
}

}  // namespace

template <typename T>
LossResult<T> squared_hinge(const DenseMatrix<T>& scores, const LabelMatrix& labels) {
    check_shapes(scores, labels, "squared_hinge");
    return elementwise_loss(scores, labels, [](double s, bool positive, double& grad) {
        const double y = positive ? 1.0 : -1.0;
        const double slack = 1.0 - y * s;
        if (slack <= 0.0) {
            grad = 0.0;
            return 0.0;
        }
        grad = -2.0 * y * slack;
        return slack * slack;
    });
}

template <typename T>
LossResult<T> bce_with_logits(const DenseMatrix<T>& scores, const LabelMatrix& labels) {
    check_shapes(scores, labels, "bce_with_logits");
    auto result = elementwise_loss(scores, labels, [](double s, bool positive, double& grad) {
        // softplus(s) - y*s, written to avoid overflow for large |s|.
        const double loss = std::max(s, 0.0) - (positive ? s : 0.0) + std::log1p(std::exp(-std::abs(s)));
        // sigma(s) - 1 = -sigma(-s) avoids cancellation for positives.
        grad = positive ? -1.0 / (1.0 + std::exp(s)) : 1.0 / (1.0 + std::exp(-s));
        return loss;
    });
    constexpr T tiny = std::numeric_limits<T>::denorm_min();
    for (std::size_t i = 0; i < labels.num_instances(); ++i) {
        auto pos = labels.positives(i);
        auto row = result.grad.row(i);
        std::size_t next = 0;
        for (std::size_t j = 0; j < row.size(); ++j) {
            const bool positive = next < pos.size() && pos[next] == j;
            if (positive) ++next;
            if (row[j] == T{0}) row[j] = positive ? -tiny : tiny;
        }
    }
    return result;
}

template LossResult<float> squared_hinge(const DenseMatrix<float>&, const LabelMatrix&);
template LossResult<double> squared_hinge(const DenseMatrix<double>&, const LabelMatrix&);
template LossResult<float> bce_with_logits(const DenseMatrix<float>&, const LabelMatrix&);
template LossResult<double> bce_with_logits(const DenseMatrix<double>&, const LabelMatrix&);

}  // namespace uxmc
