#include "uxmc/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "uxmc/errors.hpp"
#include "uxmc/losses.hpp"
#include "uxmc/parallel.hpp"

namespace uxmc {

template <typename T>
std::map<std::size_t, double> precision_at_k(const DenseMatrix<T>& scores, const LabelMatrix& labels,
                                             const std::vector<std::size_t>& ks) {
    if (scores.rows() != labels.num_instances() || scores.cols() != labels.num_labels()) {
        throw DimensionError("precision_at_k: scores " + std::to_string(scores.rows()) + "x" +
                             std::to_string(scores.cols()) + " vs labels " + std::to_string(labels.num_instances()) +
                             "x" + std::to_string(labels.num_labels()));
    }
    std::size_t kmax = 0;
    for (std::size_t k : ks) {
        if (k == 0 || k > scores.cols()) {
            throw ConfigError("precision_at_k: k=" + std::to_string(k) + " outside [1, " +
                              std::to_string(scores.cols()) + "]");
        }
        kmax = std::max(kmax, k);
    }
    const std::size_t n = scores.rows();
    // hits[i][r] = number of positives among the first r+1 predictions.
    std::vector<std::uint32_t> hits(n * kmax, 0);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const auto top = top_k(scores.row(i), kmax);
            std::uint32_t h = 0;
            for (std::size_t r = 0; r < kmax; ++r) {
                h += labels.contains(i, top[r]) ? 1 : 0;
                hits[i * kmax + r] = h;
            }
        }
    });
    std::map<std::size_t, double> out;
    for (std::size_t k : ks) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += static_cast<double>(hits[i * kmax + k - 1]) / static_cast<double>(k);
        out[k] = n == 0 ? 0.0 : sum / static_cast<double>(n);
    }
    return out;
}

template <typename T>
EvalReport evaluate(const Model<T>& model, const DenseMatrix<T>& features, const LabelMatrix& labels,
                    const std::vector<std::size_t>& ks, LossKind loss, std::size_t chunk) {
    const auto start = std::chrono::steady_clock::now();
    const std::size_t n = features.rows();
    if (labels.num_instances() != n) throw DimensionError("evaluate: feature and label row counts differ");
    if (chunk == 0) chunk = 1024;

    EvalReport report;
    report.n_instances = n;
    std::map<std::size_t, double> sums;
    for (std::size_t k : ks) sums[k] = 0.0;
    double loss_sum = 0.0;
    std::uint64_t zeros = 0, total = 0;
    for (std::size_t begin = 0; begin < n; begin += chunk) {
        const std::size_t end = std::min(n, begin + chunk);
        std::vector<std::size_t> rows(end - begin);
        std::iota(rows.begin(), rows.end(), begin);
        DenseMatrix<T> x(rows.size(), features.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            std::copy(features.row(rows[r]).begin(), features.row(rows[r]).end(), x.row(r).begin());
        }
        const LabelMatrix y = labels.gather(rows);
        const auto scores = model.predict(x);
        for (const auto& [k, p] : precision_at_k(scores, y, ks)) sums[k] += p * static_cast<double>(rows.size());
        const auto lr = compute_loss(loss, scores, y);
        loss_sum += lr.loss * static_cast<double>(rows.size());
        for (T g : lr.grad.values()) zeros += g == T{0} ? 1 : 0;
        total += lr.grad.size();
    }
    for (std::size_t k : ks) report.p_at[k] = n == 0 ? 0.0 : sums[k] / static_cast<double>(n);
    report.loss = n == 0 ? 0.0 : loss_sum / static_cast<double>(n);
    report.skip_fraction = total == 0 ? 0.0 : static_cast<double>(zeros) / static_cast<double>(total);
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::vector<MemoryLine> parameter_memory_report(const HeadShape& head, std::uint64_t dense_block_bytes) {
    const bool sparse = head.fan_in > 0;
    const std::uint64_t nnz = sparse ? head.fan_in * head.cols : head.rows * head.cols;
    std::vector<MemoryLine> lines;
    StorageFormat active = sparse ? StorageFormat::Uniform : StorageFormat::Dense;
    std::uint64_t active_bytes = 0, active_index = 0;
    for (auto f : {StorageFormat::Dense, StorageFormat::Coo64, StorageFormat::Coo32, StorageFormat::Csc32,
                   StorageFormat::Uniform}) {
        const MemoryModel m{f, nnz, head.rows, head.cols};
        lines.push_back({"head." + std::string(to_string(f)), m.bytes()});
        if (f == active) {
            active_bytes = m.bytes();
            active_index = m.index_bytes();
        }
    }
    lines.push_back({"dense_blocks", dense_block_bytes});
    const std::uint64_t total = active_bytes + dense_block_bytes;
    lines.push_back({"total." + std::string(to_string(active)), total});
    lines.push_back({"adam_training", active_index + 4 * (total - active_index)});
    return lines;
}

template <typename T>
std::vector<MemoryLine> parameter_memory_report(const Model<T>& model) {
    const auto& cfg = model.config();
    HeadShape shape{cfg.head_input_dim(), cfg.num_labels, cfg.head == HeadKind::UniformSparse ? cfg.fan_in : 0};
    std::uint64_t dense = 0;
    if (cfg.has_intermediate()) dense += 4 * (cfg.feature_dim * cfg.intermediate_dim + cfg.intermediate_dim);
    if (cfg.head_bias) dense += 4 * cfg.num_labels;
    return parameter_memory_report(shape, dense);
}

std::string format_bytes(std::uint64_t bytes) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%llu B (%.1f MB, %.2f GiB)", static_cast<unsigned long long>(bytes),
                  static_cast<double>(bytes) / 1e6, static_cast<double>(bytes) / (1024.0 * 1024.0 * 1024.0));
    return buf;
}

std::optional<std::uint64_t> peak_rss_bytes() {
    std::ifstream status("/proc/self/status");
    std::string line;
    while (std::getline(status, line)) {
        if (line.rfind("VmHWM:", 0) == 0) {
            std::uint64_t kb = 0;
            if (std::sscanf(line.c_str(), "VmHWM: %llu", reinterpret_cast<unsigned long long*>(&kb)) == 1) {
                return kb * 1024;
            }
        }
    }
    return std::nullopt;
}

template std::map<std::size_t, double> precision_at_k(const DenseMatrix<float>&, const LabelMatrix&,
                                                      const std::vector<std::size_t>&);
template std::map<std::size_t, double> precision_at_k(const DenseMatrix<double>&, const LabelMatrix&,
                                                      const std::vector<std::size_t>&);
template EvalReport evaluate(const Model<float>&, const DenseMatrix<float>&, const LabelMatrix&,
                             const std::vector<std::size_t>&, LossKind, std::size_t);
template EvalReport evaluate(const Model<double>&, const DenseMatrix<double>&, const LabelMatrix&,
                             const std::vector<std::size_t>&, LossKind, std::size_t);
template std::vector<MemoryLine> parameter_memory_report(const Model<float>&);
template std::vector<MemoryLine> parameter_memory_report(const Model<double>&);

}  // namespace uxmc
