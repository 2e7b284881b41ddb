#include "uxmc/mach.hpp"

#include <algorithm>
#include <string>

#include "uxmc/errors.hpp"
#include "uxmc/parallel.hpp"

namespace uxmc {

bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    if (n % 2 == 0) return n == 2;
    for (std::uint64_t f = 3; f * f <= n; f += 2) {
        if (n % f == 0) return false;
    }
    return true;
}

std::uint64_t next_prime_above(std::uint64_t n) {
    std::uint64_t c = n + 1;
    while (!is_prime(c)) ++c;
    return c;
}

MachEnsembleSpec MachEnsembleSpec::random(std::size_t repetitions, std::size_t buckets, std::size_t num_labels,
                                          Rng& rng) {
    MachEnsembleSpec spec;
    spec.repetitions = repetitions;
    spec.buckets = buckets;
    spec.num_labels = num_labels;
    spec.prime = next_prime_above(std::max<std::uint64_t>(num_labels, buckets));
    for (std::size_t r = 0; r < repetitions; ++r) {
        spec.hashes.push_back({1 + rng.below(spec.prime - 1), rng.below(spec.prime)});
    }
    spec.validate();
    return spec;
}

void MachEnsembleSpec::validate() const {
    if (buckets < 2) throw ConfigError("mach: need at least 2 buckets, got " + std::to_string(buckets));
    if (repetitions == 0) throw ConfigError("mach: need at least 1 repetition");
    if (num_labels == 0) throw ConfigError("mach: need at least 1 label");
    if (!is_prime(prime) || prime <= num_labels) throw ConfigError("mach: hash modulus must be a prime > L");
    if (hashes.size() != repetitions) throw ConfigError("mach: one hash function per repetition required");
    for (const auto& h : hashes) {
        if (h.a == 0 || h.a >= prime || h.b >= prime) throw ConfigError("mach: hash parameters out of range");
    }
}

std::uint32_t MachEnsembleSpec::bucket(std::size_t r, std::uint64_t label) const noexcept {
    const auto& h = hashes[r];
    // a, l < p < 2^32 for any realistic label count, so a*l fits in 64 bits.
    return static_cast<std::uint32_t>(((h.a * label + h.b) % prime) % buckets);
}

IndicatorMatrix::IndicatorMatrix(std::size_t repetitions, std::size_t buckets, std::size_t num_labels,
                                 std::vector<std::uint32_t> bucket_of)
    : repetitions_(repetitions), buckets_(buckets), num_labels_(num_labels), bucket_of_(std::move(bucket_of)) {
    if (buckets_ < 2) throw ConfigError("indicator matrix: need at least 2 buckets");
    if (repetitions_ == 0) throw ConfigError("indicator matrix: need at least 1 repetition");
    if (bucket_of_.size() != repetitions_ * num_labels_) {
        throw ConfigError("indicator matrix: expected R*L bucket assignments");
    }
    for (auto q : bucket_of_) {
        if (q >= buckets_) throw ConfigError("indicator matrix: bucket id out of range");
    }
}

std::vector<std::size_t> IndicatorMatrix::stacked_row_sums() const {
    // Build the stacked matrix in CSR form (one row per label) and sum rows.
    std::vector<std::size_t> row_ptr(num_labels_ + 1, 0);
    std::vector<std::uint32_t> cols;
    std::vector<std::uint8_t> vals;
    for (std::size_t l = 0; l < num_labels_; ++l) {
        for (std::size_t r = 0; r < repetitions_; ++r) {
            cols.push_back(stacked_column(r, l));
            vals.push_back(1);
        }
        row_ptr[l + 1] = cols.size();
    }
    std::vector<std::size_t> sums(num_labels_, 0);
    for (std::size_t l = 0; l < num_labels_; ++l) {
        for (std::size_t k = row_ptr[l]; k < row_ptr[l + 1]; ++k) sums[l] += vals[k];
    }
    return sums;
}

template <typename T>
UniformSparseMatrix<T> IndicatorMatrix::stacked() const {
    std::vector<Index> idx(repetitions_ * num_labels_);
    for (std::size_t l = 0; l < num_labels_; ++l) {
        for (std::size_t r = 0; r < repetitions_; ++r) idx[l * repetitions_ + r] = stacked_column(r, l);
    }
    return UniformSparseMatrix<T>(meta_dim(), num_labels_, repetitions_, std::move(idx),
                                  std::vector<T>(repetitions_ * num_labels_, T{1}));
}

IndicatorMatrix build_indicators(const MachEnsembleSpec& spec) {
    spec.validate();
    std::vector<std::uint32_t> bucket_of(spec.repetitions * spec.num_labels);
    for (std::size_t r = 0; r < spec.repetitions; ++r) {
        for (std::size_t l = 0; l < spec.num_labels; ++l) bucket_of[r * spec.num_labels + l] = spec.bucket(r, l);
    }
    return IndicatorMatrix(spec.repetitions, spec.buckets, spec.num_labels, std::move(bucket_of));
}

LabelMatrix meta_targets(const LabelMatrix& labels, const IndicatorMatrix& c) {
    if (labels.num_labels() != c.num_labels()) {
        throw DimensionError("meta_targets: labels have " + std::to_string(labels.num_labels()) +
                             " columns, indicators " + std::to_string(c.num_labels()));
    }
    LabelMatrix out(c.meta_dim());
    std::vector<std::uint32_t> ids;
    for (std::size_t i = 0; i < labels.num_instances(); ++i) {
        ids.clear();
        for (std::uint32_t l : labels.positives(i)) {
            for (std::size_t r = 0; r < c.repetitions(); ++r) ids.push_back(c.stacked_column(r, l));
        }
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        out.push_back(ids);
    }
    return out;
}

namespace {

template <typename T>
void check_meta(const DenseMatrix<T>& meta, const IndicatorMatrix& c) {
    if (meta.cols() != c.meta_dim()) {
        throw DimensionError("mach_decode: meta scores have " + std::to_string(meta.cols()) + " columns, expected R*B=" +
                             std::to_string(c.meta_dim()));
    }
}

}  // namespace

template <typename T>
DenseMatrix<T> mach_decode(const DenseMatrix<T>& meta_scores, const IndicatorMatrix& c) {
    check_meta(meta_scores, c);
    const double B = static_cast<double>(c.buckets()), R = static_cast<double>(c.repetitions());
    const double scale = B / (B - 1.0);
    DenseMatrix<T> out(meta_scores.rows(), c.num_labels());
    parallel_for(meta_scores.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto meta = meta_scores.row(i);
            for (std::size_t l = 0; l < c.num_labels(); ++l) {
                double sum = 0.0;
                for (std::size_t r = 0; r < c.repetitions(); ++r) sum += static_cast<double>(meta[r * c.buckets() + c.bucket(r, l)]);
                out(i, l) = static_cast<T>(scale * (sum / R - 1.0 / B));
            }
        }
    });
    return out;
}

template <typename T>
DenseMatrix<T> mach_decode_stacked(const DenseMatrix<T>& meta_scores, const IndicatorMatrix& c) {
    check_meta(meta_scores, c);
    const double B = static_cast<double>(c.buckets()), R = static_cast<double>(c.repetitions());
    const double scale = B / (B - 1.0);
    DenseMatrix<T> out = sparse_forward(c.stacked<T>(), meta_scores);
    for (auto& v : out.values()) v = static_cast<T>(scale * (static_cast<double>(v) / R - 1.0 / B));
    return out;
}

template UniformSparseMatrix<float> IndicatorMatrix::stacked<float>() const;
template UniformSparseMatrix<double> IndicatorMatrix::stacked<double>() const;
template DenseMatrix<float> mach_decode(const DenseMatrix<float>&, const IndicatorMatrix&);
template DenseMatrix<double> mach_decode(const DenseMatrix<double>&, const IndicatorMatrix&);
template DenseMatrix<float> mach_decode_stacked(const DenseMatrix<float>&, const IndicatorMatrix&);
template DenseMatrix<double> mach_decode_stacked(const DenseMatrix<double>&, const IndicatorMatrix&);

}  // namespace uxmc
