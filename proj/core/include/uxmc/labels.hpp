#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace uxmc {

/// Binary label vectors stored as per-instance sorted, duplicate-free lists
/// of positive label ids (CSR layout).
class LabelMatrix {
public:
    LabelMatrix() : offsets_{0} {}
    explicit LabelMatrix(std::size_t num_labels) : num_labels_(num_labels), offsets_{0} {}

    /// Builds from per-instance lists; each list is sorted and deduplicated.
    /// Throws ValidationError on a label id >= num_labels.
    static LabelMatrix from_lists(std::size_t num_labels, const std::vector<std::vector<std::uint32_t>>& lists);

    std::size_t num_instances() const noexcept { return offsets_.size() - 1; }
    std::size_t num_labels() const noexcept { return num_labels_; }
    std::size_t nnz() const noexcept { return ids_.size(); }

    std::span<const std::uint32_t> positives(std::size_t i) const noexcept {
        return {ids_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }
    bool contains(std::size_t i, std::uint32_t label) const noexcept;

    /// Appends one instance; `labels` must already be sorted and unique.
    void push_back(std::span<const std::uint32_t> labels);

    /// Rows in the given order.
    LabelMatrix gather(std::span<const std::size_t> rows) const;

    bool operator==(const LabelMatrix&) const = default;

private:
    std::size_t num_labels_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<std::uint32_t> ids_;
};

}  // namespace uxmc
