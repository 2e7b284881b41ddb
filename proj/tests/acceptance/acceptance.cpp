// End-to-end acceptance checks. Each TEST is one numbered criterion; a
// listener prints one "[criterion N] PASS|FAIL" line per criterion.
#include <gtest/gtest.h>

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "support/dst_oracle.hpp"
#include "support/gradcheck.hpp"
#include "support/mach_oracle.hpp"
#include "support/oracles.hpp"
#include "uxmc/commands.hpp"
#include "uxmc/dst.hpp"
#include "uxmc/errors.hpp"
#include "uxmc/mach.hpp"
#include "uxmc/metrics.hpp"
#include "uxmc/model.hpp"
#include "uxmc/optimizer.hpp"
#include "uxmc/parallel.hpp"
#include "uxmc/trainer.hpp"
#include "uxmc/uniform_sparse.hpp"

using namespace uxmc;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = fs::temp_directory_path() / ("uxmc_accept_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// The fixed synthetic benchmark of criteria 6 and 7.
SyntheticSpec benchmark_spec() {
    SyntheticSpec spec;
    spec.n = 5000;
    spec.d = 64;
    spec.labels = 1000;
    spec.positives = 3;
    spec.clusters = 100;
    spec.noise = 1.5;
    spec.seed = 1;
    return spec;
}

// Same generation and train/test split as `uxmc synth`.
struct BenchmarkData {
    Dataset train;
    Dataset test;
};

const BenchmarkData& benchmark_data() {
    static const BenchmarkData data = [] {
        const auto spec = benchmark_spec();
        Rng rng(spec.seed);
        Dataset all = make_synthetic(spec, rng);
        Rng split_rng = rng.split(1);
        auto [tr, te] = split_validation(all, 0.2, split_rng);
        return BenchmarkData{std::move(tr), std::move(te)};
    }();
    return data;
}

// Writes the benchmark dataset as text files for CLI-level criteria.
void write_benchmark(const fs::path& dir) {
    std::ostringstream log;
    cmd_synth(load_run_config(std::nullopt, {"output=" + dir.string(), "synth.seed=1", "synth.noise=1.5"}), log);
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

// Trains on the benchmark with the run seed and returns test P@1 of the best
// (validation P@3) model.
double benchmark_p_at_1(const std::vector<std::string>& overrides, std::uint64_t seed,
                        const TrainHooks<float>& hooks = {}) {
    auto keys = overrides;
    keys.push_back("seed=" + std::to_string(seed));
    auto cfg = load_run_config(std::nullopt, keys);
    cfg.validate();
    set_num_threads(cfg.effective_threads());
    const auto& data = benchmark_data();
    const RunData rd = make_run_data(cfg, data.train, data.test);
    const auto result = train<float>(cfg, rd.train, rd.validation, hooks);
    return evaluate(result.best, rd.test->features, rd.test->labels, {1}, cfg.loss).p_at.at(1);
}

const std::vector<std::string> kDense{"model.head=dense", "model.intermediate_dim=0"};
const std::vector<std::string> kSparseIntermediate{"model.head=uniform_sparse", "model.fan_in=32",
                                                   "model.intermediate_dim=256"};
const std::vector<std::string> kSparseOnly{"model.head=uniform_sparse", "model.fan_in=32",
                                           "model.intermediate_dim=0"};

// Dense head with a fixed number of active weights placed anywhere: columns
// only have fan-in s on average. Gradients of inactive weights are masked and
// redistribution prunes and regrows globally by magnitude.
class MaskedDenseHead {
public:
    MaskedDenseHead(std::size_t fan_in, double prune_fraction, std::uint64_t seed)
        : fan_in_(fan_in), prune_fraction_(prune_fraction), seed_(seed) {}

    TrainHooks<float> hooks() {
        TrainHooks<float> h;
        h.on_init = [this](Model<float>& m) { init(m); };
        h.on_gradients = [this](GradientSet<float>& g) {
            auto& head = g.blocks[head_block_];
            for (std::size_t k = 0; k < head.size(); ++k) {
                if (!active_[k]) head[k] = 0.0f;
            }
        };
        h.redistribute = [this](Model<float>& m, AdamState<float>& adam, Rng& rng) {
            return redistribute(m, adam, rng);
        };
        h.on_epoch = [this](const EpochRow&, const Model<float>& m, bool) {
            const auto w = m.dense_head()->values();
            for (std::size_t k = 0; k < w.size(); ++k) {
                if (!active_[k] && w[k] != 0.0f) masked_ = false;
            }
        };
        return h;
    }

    // Active weights per label column.
    std::vector<std::size_t> column_fan_in() const {
        std::vector<std::size_t> out(labels_, 0);
        for (std::size_t k = 0; k < active_.size(); ++k) out[k % labels_] += active_[k];
        return out;
    }

    // True while every inactive weight has stayed exactly zero.
    bool masked() const { return masked_; }

private:
    void init(Model<float>& m) {
        head_block_ = m.head_block();
        const auto& head = *m.dense_head();
        labels_ = head.cols();
        const std::size_t total = head.rows() * head.cols();
        const std::size_t nnz = fan_in_ * labels_;
        active_.assign(total, 0);
        // Uniform draw of nnz positions (partial Fisher-Yates).
        std::vector<std::size_t> pos(total);
        std::iota(pos.begin(), pos.end(), 0);
        Rng rng = Rng(seed_).split(11);
        for (std::size_t k = 0; k < nnz; ++k) {
            const std::size_t pick = k + static_cast<std::size_t>(rng.uniform() * (total - k));
            std::swap(pos[k], pos[std::min(pick, total - 1)]);
            active_[pos[k]] = 1;
        }
        // Same init scale as a uniform head of fan-in s.
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in_));
        auto params = m.parameters();
        auto& w = params[head_block_].values;
        for (std::size_t k = 0; k < w.size(); ++k) {
            w[k] = active_[k] ? static_cast<float>(rng.uniform(-bound, bound)) : 0.0f;
        }
    }

    std::optional<RedistributionReport> redistribute(Model<float>& m, AdamState<float>& adam, Rng& rng) {
        auto params = m.parameters();
        auto& w = params[head_block_].values;
        auto& mom = adam.blocks[head_block_];
        std::vector<std::size_t> live;
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (active_[k]) live.push_back(k);
        }
        const auto p = static_cast<std::size_t>(std::floor(prune_fraction_ * static_cast<double>(live.size())));
        std::stable_sort(live.begin(), live.end(), [&](auto a, auto b) { return std::abs(w[a]) < std::abs(w[b]); });
        RedistributionReport rep;
        rep.columns = labels_;
        std::vector<std::size_t> pruned(live.begin(), live.begin() + static_cast<long>(p));
        for (auto k : pruned) {
            rep.pruned_magnitudes.push_back(std::abs(w[k]));
            active_[k] = 2;  // excluded from this round's regrowth
            w[k] = 0.0f;
            mom.m[k] = mom.v[k] = 0.0f;
        }
        std::vector<std::size_t> free;
        for (std::size_t k = 0; k < w.size(); ++k) {
            if (active_[k] == 0) free.push_back(k);
        }
        for (std::size_t k = 0; k < p; ++k) {
            const std::size_t pick = k + static_cast<std::size_t>(rng.uniform() * (free.size() - k));
            std::swap(free[k], free[std::min(pick, free.size() - 1)]);
            active_[free[k]] = 1;  // new connection starts at zero with fresh moments
            mom.m[free[k]] = mom.v[free[k]] = 0.0f;
        }
        for (auto k : pruned) active_[k] = 0;
        return rep;
    }

    std::size_t fan_in_;
    double prune_fraction_;
    std::uint64_t seed_;
    std::size_t head_block_ = 0;
    std::size_t labels_ = 0;
    std::vector<std::uint8_t> active_;
    bool masked_ = true;
};

ModelConfig model_config(std::size_t d, std::size_t m, HeadKind head, std::size_t s, std::size_t l) {
    ModelConfig c;
    c.feature_dim = d;
    c.intermediate_dim = m;
    c.head = head;
    c.fan_in = s;
    c.num_labels = l;
    return c;
}

double min_abs(const DenseMatrix<double>& m) {
    double best = INFINITY;
    for (double v : m.values()) best = std::min(best, std::abs(v));
    return best;
}

// Criterion lines, collected in order and repeated as a summary.
class CriterionListener : public testing::EmptyTestEventListener {
public:
    void OnTestEnd(const testing::TestInfo& info) override {
        const std::string name = info.name();
        const auto pos = name.find("Criterion");
        if (pos == std::string::npos) return;
        const int number = std::atoi(name.c_str() + pos + 9);
        char line[256];
        std::snprintf(line, sizeof(line), "[criterion %d] %s  %s (%.1f s)", number,
                      info.result()->Passed() ? "PASS" : "FAIL", name.c_str() + pos + 11,
                      info.result()->elapsed_time() / 1000.0);
        lines_.emplace_back(line);
        std::printf("%s\n", line);
        std::fflush(stdout);
    }
    void OnTestProgramEnd(const testing::UnitTest&) override {
        std::printf("\nacceptance summary\n");
        for (const auto& l : lines_) std::printf("%s\n", l.c_str());
        std::fflush(stdout);
    }

private:
    std::vector<std::string> lines_;
};

}  // namespace

// Kernels against dense scattered oracles: bit-exact in 64-bit single-threaded
// mode, within 1e-5 relative error threaded in 32-bit.
TEST(Acceptance, Criterion01_KernelOracleEquivalence) {
    oracle::Gen gen(101);
    double worst32 = 0.0;
    std::size_t exact = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t d = gen.size(1, 64), m = gen.size(0, 64), l = gen.size(1, 64), b = gen.size(1, 64);
        const std::size_t in = m > 0 ? m : d;  // head input: intermediate width if present
        const std::size_t s = gen.size(1, in);

        set_num_threads(1);
        const auto w = gen.uniform_sparse<double>(in, l, s);
        const auto x = gen.sparse_matrix<double>(b, in, 0.2);
        const auto up = gen.sparse_matrix<double>(b, l, 0.5);
        const auto dense = oracle::scatter(w);
        const bool fwd = sparse_forward(w, x) == oracle::matmul(x, dense);
        const bool bin = sparse_backward_input(w, up).grad == oracle::matmul(up, oracle::transpose(dense));
        const bool bw = sparse_backward_weights(w, x, up) == oracle::weight_grad(w, x, up);
        EXPECT_TRUE(fwd && bin && bw) << "instance " << rep << " d=" << in << " L=" << l << " b=" << b << " s=" << s;
        exact += fwd && bin && bw;

        set_num_threads(4);
        const auto wf = cast_matrix<float>(w);
        DenseMatrix<float> xf(b, in), upf(b, l);
        std::transform(x.values().begin(), x.values().end(), xf.values().begin(), [](double v) { return float(v); });
        std::transform(up.values().begin(), up.values().end(), upf.values().begin(), [](double v) { return float(v); });
        // Oracle in 64-bit on the same (rounded) inputs.
        const auto w64 = cast_matrix<double>(wf);
        DenseMatrix<double> x64(b, in), up64(b, l);
        std::copy(xf.values().begin(), xf.values().end(), x64.values().begin());
        std::copy(upf.values().begin(), upf.values().end(), up64.values().begin());
        const auto d64 = oracle::scatter(w64);
        auto widen = [](const DenseMatrix<float>& a) {
            DenseMatrix<double> o(a.rows(), a.cols());
            std::copy(a.values().begin(), a.values().end(), o.values().begin());
            return o;
        };
        const auto gw = sparse_backward_weights(wf, xf, upf);
        const std::vector<double> gw64(gw.begin(), gw.end());
        const double e = std::max({oracle::max_rel_err(widen(sparse_forward(wf, xf)), oracle::matmul(x64, d64)),
                                   oracle::max_rel_err(widen(sparse_backward_input(wf, upf).grad),
                                                       oracle::matmul(up64, oracle::transpose(d64))),
                                   oracle::max_rel_err<double>(gw64, oracle::weight_grad(w64, x64, up64))});
        worst32 = std::max(worst32, e);
        EXPECT_LT(e, 1e-5) << "instance " << rep;
    }
    set_num_threads(1);
    std::printf("  64-bit bit-exact instances: %zu/200, worst 32-bit threaded rel. err %.3g\n", exact, worst32);
}

// Central differences through every architecture and both losses.
TEST(Acceptance, Criterion02_GradientChecks) {
    set_num_threads(1);
    oracle::Gen gen(202);
    struct Arch {
        bool intermediate;
        HeadKind head;
    };
    const Arch archs[] = {{false, HeadKind::Dense}, {false, HeadKind::UniformSparse},
                          {true, HeadKind::Dense}, {true, HeadKind::UniformSparse}};
    double worst = 0.0;
    std::size_t instances = 0, checked = 0;
    for (int rep = 0; rep < 64; ++rep) {
        const Arch a = archs[rep % 4];
        const LossKind loss = (rep / 4) % 2 ? LossKind::Bce : LossKind::SquaredHinge;
        const std::size_t d = gen.size(2, 6), m = a.intermediate ? gen.size(3, 7) : 0, l = gen.size(3, 10);
        const std::size_t in = m > 0 ? m : d;
        const std::size_t s = a.head == HeadKind::UniformSparse ? gen.size(2, in) : 0;
        auto c = model_config(d, m, a.head, s, l);
        c.head_bias = gen.coin(0.5);
        c.input_dropout = gen.coin(0.5) ? 0.2 : 0.0;
        Rng rng(gen.size(0, 1u << 20));
        auto model = Model<double>::init(c, rng);
        const std::size_t b = gen.size(1, 3);
        const std::uint64_t drop_seed = gen.size(0, 1000);
        // Keep every score away from the hinge kink and every pre-activation
        // away from the ReLU kink, where finite differences are meaningless.
        DenseMatrix<double> x;
        for (;;) {
            x = gen.matrix<double>(b, d);
            Rng r(drop_seed);
            const auto t = model.forward(x, c.input_dropout > 0.0, r);
            double kink = INFINITY;
            for (double v : t.scores.values()) kink = std::min(kink, std::abs(std::abs(v) - 1.0));
            if (m > 0) kink = std::min(kink, min_abs(t.pre_activation));
            if (kink > 1e-3) break;
        }
        const auto y = gen.labels(b, l, 0.3);
        const auto res = oracle::gradient_check(model, x, y, loss, drop_seed);
        EXPECT_LT(res.worst, 1e-4) << "instance " << rep << " m=" << m << " head=" << to_string(a.head)
                                   << " loss=" << to_string(loss) << ": " << res.where;
        worst = std::max(worst, res.worst);
        checked += res.checked;
        ++instances;
    }
    EXPECT_GE(instances, 50u);
    std::printf("  %zu instances, %zu parameters checked, worst rel. err %.3g\n", instances, checked, worst);
}

// 100 interleaved training steps and redistributions on a random model.
TEST(Acceptance, Criterion03_UniformityInvariants) {
    set_num_threads(1);
    oracle::Gen gen(303);
    const std::size_t d = 24, m = 48, l = 60, s = 12;
    Rng init(3);
    auto model = Model<double>::init(model_config(d, m, HeadKind::UniformSparse, s, l), init);
    auto adam = AdamState<double>::for_params(model.parameters());
    DstConfig dst;
    dst.prune_fraction = 0.25;
    const std::size_t p = dst.replaced_per_column(s);
    ASSERT_EQ(p, 3u);
    Rng dst_rng(33), drop(34);
    std::size_t violations = 0;
    for (int cycle = 0; cycle < 100; ++cycle) {
        const auto x = gen.matrix<double>(16, d);
        const auto y = gen.labels(16, l, 0.05);
        const auto trace = model.forward(x, true, drop);
        const auto grads = model.backward(trace, squared_hinge(trace.scores, y).grad);
        adam_step<double>(model.parameters(), grads.blocks, adam, 1e-2);

        const auto hb = model.head_block();
        const auto before = *model.sparse_head();
        const auto before_m = adam.blocks[hb];
        prune_and_regrow(*model.sparse_head_mut(), adam.blocks[hb], dst, dst_rng);
        const auto& w = *model.sparse_head();
        const auto& mom = adam.blocks[hb];
        ASSERT_EQ(w.fan_in(), s);
        ASSERT_EQ(mom.m.size(), s * l);
        for (std::size_t j = 0; j < l; ++j) {
            const auto idx = w.column_indices(j);
            bool ok = std::is_sorted(idx.begin(), idx.end()) &&
                      std::adjacent_find(idx.begin(), idx.end()) == idx.end() && idx.back() < m;
            const auto old_col = oracle::column_slots(before, before_m, j);
            std::set<Index> old_idx;
            for (const auto& sl : old_col) old_idx.insert(sl.index);
            const auto expect = oracle::survivors_oracle(old_col, p);
            std::vector<oracle::Slot> survivors, regrown;
            for (const auto& sl : oracle::column_slots(w, mom, j)) {
                (old_idx.count(sl.index) ? survivors : regrown).push_back(sl);
            }
            ok = ok && regrown.size() == p && survivors.size() == expect.size();
            for (std::size_t k = 0; ok && k < survivors.size(); ++k) {
                ok = survivors[k].index == expect[k].index && survivors[k].weight == expect[k].weight &&
                     survivors[k].m == expect[k].m && survivors[k].v == expect[k].v;
            }
            for (const auto& sl : regrown) ok = ok && sl.m == 0.0 && sl.v == 0.0 && sl.weight == 0.0;
            if (!ok) ++violations;
            EXPECT_TRUE(ok) << "cycle " << cycle << " column " << j;
        }
    }
    EXPECT_EQ(violations, 0u);
    std::printf("  100 cycles x %zu columns, %zu violations\n", l, violations);
}

// Implicit negative mining: exact skip accounting and the timing direction.
TEST(Acceptance, Criterion04_ImplicitNegativeMining) {
    oracle::Gen gen(404);
    // (a) squared hinge: skipped pairs are exactly the margin-satisfied ones.
    for (int rep = 0; rep < 30; ++rep) {
        set_num_threads(rep % 2 ? 4 : 1);
        const std::size_t d = gen.size(2, 20), m = gen.size(0, 1) ? gen.size(4, 40) : 0, l = gen.size(2, 80);
        const std::size_t in = m > 0 ? m : d;
        auto c = model_config(d, m, HeadKind::UniformSparse, gen.size(2, in), l);
        Rng rng(rep);
        auto model = Model<float>::init(c, rng);
        auto x = gen.matrix<float>(gen.size(1, 40), d);
        for (auto& v : x.values()) v *= static_cast<float>(gen.real(0.5, 6.0));  // spread scores around the margin
        const auto y = gen.labels(x.rows(), l, 0.1);
        Rng fr(0);
        const auto t = model.forward(x, false, fr);
        const auto loss = squared_hinge(t.scores, y);
        std::uint64_t satisfied = 0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t j = 0; j < l; ++j) {
                const float sign = y.contains(i, static_cast<std::uint32_t>(j)) ? 1.0f : -1.0f;
                satisfied += sign * t.scores(i, j) >= 1.0f;
            }
        }
        const auto g = model.backward(t, loss.grad);
        EXPECT_EQ(g.skip.skipped, satisfied) << "instance " << rep;
        EXPECT_EQ(g.skip.total, x.rows() * l);
    }
    // (b) Bce never skips, even for saturated scores.
    for (int rep = 0; rep < 20; ++rep) {
        set_num_threads(1);
        auto c = model_config(8, 16, HeadKind::UniformSparse, 4, 50);
        Rng rng(rep);
        auto model = Model<float>::init(c, rng);
        auto x = gen.matrix<float>(10, 8);
        for (auto& v : x.values()) v *= rep < 10 ? 1.0f : 500.0f;
        const auto y = gen.labels(10, 50, 0.1);
        Rng fr(0);
        const auto t = model.forward(x, false, fr);
        const auto g = model.backward(t, bce_with_logits(t.scores, y).grad);
        EXPECT_EQ(g.skip.skipped, 0u);
        EXPECT_EQ(g.skip.fraction(), 0.0);
    }
    // (c) timing on the synthetic benchmark after 2 epochs of training.
    TempDir dir("bench");
    write_benchmark(dir.path());
    auto cfg = load_run_config(std::nullopt, {"data.train=" + (dir / "train.txt").string(),
                                              "data.test=" + (dir / "test.txt").string(), "model.head=uniform_sparse",
                                              "model.fan_in=32", "model.intermediate_dim=256",
                                              "bench.train_epochs=2", "output=" + (dir / "out").string()});
    std::ostringstream log;
    const auto rows = cmd_bench(cfg, log);
    ASSERT_EQ(rows.size(), 2u);
    const auto& sqh = rows[0].loss == LossKind::SquaredHinge ? rows[0] : rows[1];
    const auto& bce = rows[0].loss == LossKind::Bce ? rows[0] : rows[1];
    EXPECT_LT(sqh.backward_input_ms, bce.backward_input_ms);
    EXPECT_EQ(bce.skip_fraction, 0.0);
    EXPECT_EQ(sqh.timed_batches, cfg.bench.batches - cfg.bench.warmup);
    std::printf("  backward_input sqh %.4f ms (skip %.3f) vs bce %.4f ms: ratio %.2f\n", sqh.backward_input_ms,
                sqh.skip_fraction, bce.backward_input_ms, sqh.backward_input_ms / bce.backward_input_ms);
}

// Byte accounting at the reference shapes and the format ordering.
TEST(Acceptance, Criterion05_MemoryModel) {
    auto bytes = [](const std::vector<MemoryLine>& lines, const std::string& name) {
        for (const auto& l : lines) {
            if (l.name == name) return l.bytes;
        }
        ADD_FAILURE() << "missing " << name;
        return std::uint64_t{0};
    };
    constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;
    const auto dense = parameter_memory_report(HeadShape{1024, 2812281, 0}, 0);
    const double dense_gib = bytes(dense, "head.DENSE") / kGiB;
    EXPECT_EQ(bytes(dense, "head.DENSE"), 4ull * 1024 * 2812281);
    EXPECT_GE(dense_gib, 10.6);
    EXPECT_LE(dense_gib, 10.8);
    const double adam_gib = bytes(dense, "adam_training") / kGiB;
    EXPECT_GT(adam_gib, 40.0);
    EXPECT_EQ(bytes(dense, "adam_training"), 4 * bytes(dense, "head.DENSE"));

    oracle::Gen gen(505);
    std::vector<HeadShape> shapes{{1024, 2812281, 32}, {1024, 670091, 32}};
    for (int i = 0; i < 200; ++i) {
        const std::uint64_t rows = gen.size(2, 5000), cols = gen.size(2, 100000);
        shapes.push_back({rows, cols, gen.size(2, rows)});
    }
    for (const auto& shape : shapes) {
        const auto r = parameter_memory_report(shape, 0);
        const std::uint64_t nnz = shape.fan_in * shape.cols;
        EXPECT_LT(bytes(r, "head.UNIFORM"), bytes(r, "head.CSC32"));
        EXPECT_LT(bytes(r, "head.CSC32"), bytes(r, "head.COO32"));
        EXPECT_LT(bytes(r, "head.COO32"), bytes(r, "head.COO64"));
        EXPECT_EQ(bytes(r, "head.COO64"), 5 * 4 * nnz);  // 5x the 4 bytes of one dense weight
        EXPECT_EQ(bytes(r, "head.UNIFORM"), 8 * nnz);
    }
    const auto uniform = parameter_memory_report(HeadShape{1024, 670091, 32}, 0);
    EXPECT_EQ(bytes(uniform, "head.UNIFORM"), 171543296u);

    std::ostringstream out;
    cmd_memreport(load_run_config(std::nullopt, {}), out);
    EXPECT_NE(out.str().find("11519102976"), std::string::npos);
    EXPECT_NE(out.str().find("46076411904"), std::string::npos);
    std::printf("  dense head %.3f GiB, Adam training %.3f GiB, uniform s=32 L=670091 head %llu B\n", dense_gib,
                adam_gib, static_cast<unsigned long long>(bytes(uniform, "head.UNIFORM")));
}

// Architecture ordering on the synthetic benchmark, three seeds.
TEST(Acceptance, Criterion06_ArchitectureOrdering) {
    std::vector<double> dense, sparse_int, sparse_only;
    for (std::uint64_t seed : {1, 2, 3}) {
        dense.push_back(benchmark_p_at_1(kDense, seed));
        sparse_int.push_back(benchmark_p_at_1(kSparseIntermediate, seed));
        sparse_only.push_back(benchmark_p_at_1(kSparseOnly, seed));
        std::printf("  seed %llu: dense %.3f  sparse+intermediate %.3f  sparse-only %.3f\n",
                    static_cast<unsigned long long>(seed), dense.back(), sparse_int.back(), sparse_only.back());
    }
    const double d = mean(dense), si = mean(sparse_int), so = mean(sparse_only);
    std::printf("  mean test P@1: dense %.4f  sparse+intermediate %.4f (%.3f x dense)  sparse-only %.4f\n", d, si,
                si / d, so);
    EXPECT_GE(si, 0.95 * d);
    EXPECT_GE(si - so, 0.02);
}

// Exact per-column fan-in versus fan-in that is only exact on average.
TEST(Acceptance, Criterion07_UniformVersusUnstructured) {
    std::vector<double> uniform, unstructured;
    std::size_t min_fan = SIZE_MAX, max_fan = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
        uniform.push_back(benchmark_p_at_1(kSparseIntermediate, seed));
        MaskedDenseHead masked(32, 0.1, seed);
        auto hooks = masked.hooks();
        unstructured.push_back(benchmark_p_at_1({"model.head=dense", "model.intermediate_dim=256"}, seed, hooks));
        EXPECT_TRUE(masked.masked());
        const auto fan = masked.column_fan_in();
        EXPECT_EQ(std::accumulate(fan.begin(), fan.end(), std::size_t{0}), 32u * 1000u);
        min_fan = std::min(min_fan, *std::min_element(fan.begin(), fan.end()));
        max_fan = std::max(max_fan, *std::max_element(fan.begin(), fan.end()));
        std::printf("  seed %llu: uniform %.3f  unstructured %.3f\n", static_cast<unsigned long long>(seed),
                    uniform.back(), unstructured.back());
    }
    const double diff = std::abs(mean(uniform) - mean(unstructured));
    std::printf("  mean test P@1: uniform %.4f  unstructured %.4f  |diff| %.4f; unstructured fan-in range [%zu, %zu]\n",
                mean(uniform), mean(unstructured), diff, min_fan, max_fan);
    EXPECT_LT(max_fan - min_fan, 1000u);
    EXPECT_GT(max_fan, min_fan);  // the variant really is non-uniform
    EXPECT_LT(diff, 0.01);
}

// Decoding identities of the label-hashing baseline.
TEST(Acceptance, Criterion08_MachIdentities) {
    oracle::Gen gen(808);
    double worst_form = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t r = gen.size(1, 8), b = gen.size(2, 32), l = gen.size(1, 500);
        Rng rng(rep);
        const auto c = build_indicators(MachEnsembleSpec::random(r, b, l, rng));
        const auto meta = gen.matrix<double>(gen.size(1, 16), r * b);
        const auto a = mach_decode(meta, c);
        const auto s = mach_decode_stacked(meta, c);
        for (std::size_t k = 0; k < a.values().size(); ++k) {
            worst_form = std::max(worst_form, std::abs(a.values()[k] - s.values()[k]));
        }
        for (auto sum : c.stacked_row_sums()) EXPECT_EQ(sum, r);
    }
    EXPECT_LE(worst_form, 1e-12);

    double worst_expect = 0.0;
    for (std::size_t l = 1; l <= 4; ++l) {
        for (std::size_t b = 2; b <= 3; ++b) {
            for (std::size_t reps : {1u, 2u}) {
                std::vector<double> p(l);
                double total = 0;
                for (auto& v : p) total += (v = gen.real(0.05, 1.0));
                for (auto& v : p) v /= total;
                for (bool stacked : {false, true}) {
                    const auto e = oracle::expected_decode(p, b, reps, stacked);
                    for (std::size_t j = 0; j < l; ++j) worst_expect = std::max(worst_expect, std::abs(e[j] - p[j]));
                }
            }
        }
    }
    EXPECT_LE(worst_expect, 1e-10);
    std::printf("  matrix vs per-label max |diff| %.3g; brute-force expectation max |err| %.3g\n", worst_form,
                worst_expect);
}

// Two --deterministic CLI runs produce byte-identical artifacts.
TEST(Acceptance, Criterion09_Determinism) {
    TempDir dir("determinism");
    write_benchmark(dir.path());
    auto run = [&](const std::string& out) {
        const std::string cmd = std::string(UXMC_CLI_PATH) + " train --deterministic --seed 7 --out " +
                                (dir / out).string() + " data.train=" + (dir / "train.txt").string() +
                                " data.test=" + (dir / "test.txt").string() +
                                " model.head=uniform_sparse model.fan_in=32 model.intermediate_dim=256"
                                " dst.interval_steps=100 optimizer.max_epochs=3 > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    ASSERT_EQ(run("a"), 0);
    ASSERT_EQ(run("b"), 0);
    std::vector<fs::path> files{kMetricsFile, kRedistributionFile};
    for (const auto& e : fs::directory_iterator(dir / "a" / kCheckpointDir)) {
        files.push_back(fs::path(kCheckpointDir) / e.path().filename());
    }
    std::size_t identical = 0;
    for (const auto& f : files) {
        const auto a = slurp(dir / "a" / f.string()), b = slurp(dir / "b" / f.string());
        EXPECT_FALSE(a.empty()) << f;
        EXPECT_TRUE(a == b) << f << " differs";
        identical += !a.empty() && a == b;
    }
    EXPECT_GE(files.size(), 5u);
    std::printf("  %zu/%zu artifacts byte-identical\n", identical, files.size());
}

// Learning-rate path under stagnating validation.
TEST(Acceptance, Criterion10_LrScheduleTrace) {
    auto schedule = make_schedule(OptimizerConfig{});
    std::vector<double> path{schedule.lr};
    ScheduleEvent event = ScheduleEvent::Continue;
    std::string trace = "1e-3";
    for (int round = 0; round < 100 && event != ScheduleEvent::Stop; ++round) {
        event = schedule.update(round == 0 ? 0.5 : 0.5);  // never improves after the first round
        if (event == ScheduleEvent::Decayed) {
            path.push_back(schedule.lr);
            char buf[32];
            std::snprintf(buf, sizeof(buf), " -> %g", schedule.lr);
            trace += buf;
        }
    }
    EXPECT_EQ(event, ScheduleEvent::Stop);
    const std::vector<double> expect{1e-3, 5e-4, 2.5e-4, 1.25e-4, 1e-4};
    ASSERT_EQ(path.size(), expect.size());
    for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_DOUBLE_EQ(path[i], expect[i]);
    std::printf("  lr path %s -> stop\n", trace.c_str());
}

int main(int argc, char** argv) {
    testing::InitGoogleTest(&argc, argv);
    testing::UnitTest::GetInstance()->listeners().Append(new CriterionListener);
    return RUN_ALL_TESTS();
}
