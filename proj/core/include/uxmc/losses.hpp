#pragma once

#include <string_view>

#include "uxmc/labels.hpp"
#include "uxmc/tensor.hpp"

namespace uxmc {

enum class LossKind { SquaredHinge, Bce };

std::string_view to_string(LossKind k);  // "sqh" | "bce"
LossKind parse_loss(std::string_view s);

template <typename T>
struct LossResult {
    double loss = 0.0;       // mean over the batch, summed over labels
    DenseMatrix<T> grad;     // d loss / d scores
};

/// One-vs-all squared hinge, y in {-1,+1}: max(0, 1 - y*score)^2.
/// Gradient entries are exact zeros wherever y*score >= 1.
template <typename T>
LossResult<T> squared_hinge(const DenseMatrix<T>& scores, const LabelMatrix& labels);

/// One-vs-all binary cross-entropy on logits, y in {0,1}. The gradient
/// sigma(score) - y is never exactly zero for finite scores: values that
/// underflow the working precision are kept at the smallest subnormal of
/// the correct sign.
template <typename T>
LossResult<T> bce_with_logits(const DenseMatrix<T>& scores, const LabelMatrix& labels);

template <typename T>
LossResult<T> compute_loss(LossKind kind, const DenseMatrix<T>& scores, const LabelMatrix& labels) {
    return kind == LossKind::SquaredHinge ? squared_hinge(scores, labels) : bce_with_logits(scores, labels);
}

}  // namespace uxmc
