// Kernel microbenchmarks: fixed fan-in head vs dense head, the zero-skip
// path of the input gradient, redistribution and top-k evaluation.
#include <benchmark/benchmark.h>

#include "uxmc/dst.hpp"
#include "uxmc/metrics.hpp"
#include "uxmc/parallel.hpp"
#include "uxmc/tensor.hpp"
#include "uxmc/uniform_sparse.hpp"

using namespace uxmc;

namespace {

constexpr std::size_t kIn = 256;
constexpr std::size_t kBatch = 32;

UniformSparseMatrix<float> random_head(std::size_t labels, std::size_t s, Rng& rng) {
    std::vector<Index> idx;
    std::vector<float> val;
    std::vector<Index> rows(kIn);
    for (std::size_t j = 0; j < labels; ++j) {
        for (std::size_t r = 0; r < kIn; ++r) rows[r] = static_cast<Index>(r);
        for (std::size_t k = 0; k < s; ++k) {
            const auto pick = k + static_cast<std::size_t>(rng.uniform() * (kIn - k));
            std::swap(rows[k], rows[std::min(pick, kIn - 1)]);
        }
        std::sort(rows.begin(), rows.begin() + static_cast<long>(s));
        for (std::size_t k = 0; k < s; ++k) {
            idx.push_back(rows[k]);
            val.push_back(static_cast<float>(rng.uniform(-1, 1)));
        }
    }
    return UniformSparseMatrix<float>(kIn, labels, s, std::move(idx), std::move(val));
}

DenseMatrix<float> random_dense(std::size_t rows, std::size_t cols, Rng& rng, double zero_fraction = 0.0) {
    DenseMatrix<float> m(rows, cols);
    for (auto& v : m.values()) v = rng.uniform() < zero_fraction ? 0.0f : static_cast<float>(rng.uniform(-1, 1));
    return m;
}

void BM_SparseForward(benchmark::State& state) {
    set_num_threads(1);
    Rng rng(1);
    const auto w = random_head(state.range(0), state.range(1), rng);
    const auto x = random_dense(kBatch, kIn, rng);
    for (auto _ : state) benchmark::DoNotOptimize(sparse_forward(w, x));
    state.SetItemsProcessed(state.iterations() * kBatch * w.nnz());
}

void BM_DenseForward(benchmark::State& state) {
    set_num_threads(1);
    Rng rng(2);
    const auto w = random_dense(kIn, state.range(0), rng);
    const auto x = random_dense(kBatch, kIn, rng);
    for (auto _ : state) benchmark::DoNotOptimize(dense_forward(w, x));
    state.SetItemsProcessed(state.iterations() * kBatch * kIn * state.range(0));
}

// range(2): percentage of exactly-zero upstream entries.
void BM_SparseBackwardInput(benchmark::State& state) {
    set_num_threads(1);
    Rng rng(3);
    const auto w = random_head(state.range(0), state.range(1), rng);
    const auto up = random_dense(kBatch, state.range(0), rng, state.range(2) / 100.0);
    for (auto _ : state) benchmark::DoNotOptimize(sparse_backward_input(w, up));
}

void BM_SparseBackwardWeights(benchmark::State& state) {
    set_num_threads(1);
    Rng rng(4);
    const auto w = random_head(state.range(0), state.range(1), rng);
    const auto x = random_dense(kBatch, kIn, rng);
    const auto up = random_dense(kBatch, state.range(0), rng, state.range(2) / 100.0);
    for (auto _ : state) benchmark::DoNotOptimize(sparse_backward_weights(w, x, up));
}

void BM_PruneAndRegrow(benchmark::State& state) {
    set_num_threads(1);
    Rng rng(5);
    auto w = random_head(state.range(0), 32, rng);
    AdamMoments<float> mom{std::vector<float>(w.nnz(), 0.0f), std::vector<float>(w.nnz(), 0.0f)};
    DstConfig cfg;
    Rng dst_rng(6);
    for (auto _ : state) benchmark::DoNotOptimize(prune_and_regrow(w, mom, cfg, dst_rng));
}

void BM_PrecisionAtK(benchmark::State& state) {
    set_num_threads(1);
    Rng rng(7);
    const auto scores = random_dense(1024, state.range(0), rng);
    std::vector<std::vector<std::uint32_t>> lists(1024);
    for (auto& l : lists) l = {static_cast<std::uint32_t>(rng.next_u64() % state.range(0))};
    const auto labels = LabelMatrix::from_lists(state.range(0), lists);
    for (auto _ : state) benchmark::DoNotOptimize(precision_at_k(scores, labels, {1, 3, 5}));
}

}  // namespace

BENCHMARK(BM_SparseForward)->Args({10000, 32})->Args({10000, 64})->Args({50000, 32});
BENCHMARK(BM_DenseForward)->Arg(10000);
BENCHMARK(BM_SparseBackwardInput)->Args({10000, 32, 0})->Args({10000, 32, 50})->Args({10000, 32, 90})->Args({10000, 32, 99});
BENCHMARK(BM_SparseBackwardWeights)->Args({10000, 32, 0})->Args({10000, 32, 90});
BENCHMARK(BM_PruneAndRegrow)->Arg(10000);
BENCHMARK(BM_PrecisionAtK)->Arg(1000)->Arg(10000);
BENCHMARK_MAIN();
