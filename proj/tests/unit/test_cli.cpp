#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "uxmc/checkpoint.hpp"
#include "uxmc/commands.hpp"
#include "uxmc/errors.hpp"
#include "uxmc/keyvalue.hpp"
#include "uxmc/run_config.hpp"

using namespace uxmc;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("uxmc_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
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
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<EpochRow> metrics(const fs::path& p) {
    std::ifstream f(p);
    return read_metrics_csv(f);
}

RunConfig config(const std::vector<std::string>& overrides) {
    return load_run_config(std::nullopt, overrides);
}

// Synthetic data shared by the end-to-end tests: N=5000, d=64, L=1000.
const fs::path& synthetic_data() {
    static const TempDir dir;
    static const bool written = [] {
        std::ostringstream log;
        cmd_synth(config({"output=" + dir.path().string(), "synth.seed=1", "synth.noise=1.0"}), log);
        return true;
    }();
    (void)written;
    return dir.path();
}

std::vector<std::string> sparse_run(const fs::path& out) {
    const auto& data = synthetic_data();
    return {"data.train=" + (data / "train.txt").string(),
            "data.test=" + (data / "test.txt").string(),
            "model.head=uniform_sparse",
            "model.fan_in=8",
            "model.intermediate_dim=256",
            "dst.prune_fraction=0.25",
            "dst.interval_steps=50",
            "output=" + out.string()};
}

// Row text without the wall-clock column, which differs between runs.
std::string untimed(EpochRow row) {
    row.epoch_seconds = 0;
    return format_metrics_row(row);
}

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(UXMC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(RunConfig, ParsesSectionsAndOverrides) {
    TempDir dir;
    {
        std::ofstream f(dir / "run.cfg");
        f << "# comment\nmodel.head = uniform_sparse\nmodel.fan_in=16\nbatch_size=64\neval.ks=1,2\nseed=9\n";
    }
    const auto cfg = load_run_config(dir / "run.cfg", {"batch_size=8", "optimizer.lr=0.01"});
    EXPECT_EQ(cfg.model.head, HeadKind::UniformSparse);
    EXPECT_EQ(cfg.model.fan_in, 16u);
    EXPECT_EQ(cfg.batch_size, 8u);
    EXPECT_EQ(cfg.ks, (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(cfg.optimizer.lr, 0.01);
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.model.seed, 9u);  // follows the run seed
    EXPECT_EQ(cfg.optimizer.max_epochs, 200u);

    const auto round = RunConfig::from_keys([&] {
        KeyValues kv;
        for (const auto& [k, v] : cfg.to_keys()) kv.set(k, v);
        return kv;
    }());
    EXPECT_EQ(round.to_keys(), cfg.to_keys());
}

TEST(RunConfig, RejectsBadInput) {
    EXPECT_THROW(config({"model.fanin=3"}), ConfigError);
    EXPECT_THROW(config({"batch_size=abc"}), ConfigError);
    EXPECT_THROW(config({"batch_size"}), ConfigError);
    EXPECT_THROW(config({"loss=hinge"}), ConfigError);
    EXPECT_THROW(config({"batch_size=0"}).validate(), ConfigError);
    EXPECT_THROW(config({"data.train=/nonexistent/file.txt"}).validate(), ConfigError);
    EXPECT_THROW(load_run_config(fs::path("/nonexistent.cfg"), {}), ConfigError);
    auto cfg = config({"model.feature_dim=5"});
    EXPECT_THROW(cfg.bind_data(6, 10), DimensionError);
    auto k = config({"eval.ks=1,20"});
    EXPECT_THROW(k.bind_data(4, 10), ConfigError);
}

TEST(CmdTrain, SyntheticRunWritesArtifacts) {
    TempDir out;
    std::ostringstream log;
    const auto final_row = cmd_train(config(with(sparse_run(out.path()), {"optimizer.max_epochs=12", "optimizer.lr=0.003"})), log);
    for (const char* f : {kMetricsFile, kRedistributionFile, kTimingsFile, kResolvedConfigFile}) {
        EXPECT_TRUE(fs::is_regular_file(out / f)) << f;
    }
    EXPECT_TRUE(fs::is_regular_file(out / kCheckpointDir / "manifest.txt"));
    EXPECT_EQ(slurp(out / kMetricsFile).substr(0, metrics_csv_header().size()), metrics_csv_header());

    const auto rows = metrics(out / kMetricsFile);
    ASSERT_GE(rows.size(), 3u);
    EXPECT_EQ(rows.front().epoch, 0u);
    for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
        EXPECT_EQ(rows[i].epoch, i);
        EXPECT_EQ(rows[i].split, "val");
    }
    EXPECT_EQ(rows.back().split, "best_test");
    EXPECT_EQ(untimed(rows.back()), untimed(final_row));
    // Training beats the untrained model by a wide margin.
    EXPECT_GT(rows.back().p_at.at(1), rows.front().p_at.at(1) + 0.5);
    EXPECT_EQ(rows.back().head_bytes_uniform, 8ull * 8 * 1000);
    EXPECT_EQ(rows.back().head_bytes_dense, 4ull * 256 * 1000);

    // Redistribution happened every 50 steps and the checkpoint reloads.
    const std::string redis = slurp(out / kRedistributionFile);
    EXPECT_EQ(redis.substr(0, redistribution_csv_header().size()), redistribution_csv_header());
    EXPECT_GT(std::count(redis.begin(), redis.end(), '\n'), 10);
    const auto model = load_checkpoint<float>(out / kCheckpointDir);
    EXPECT_EQ(model.config().fan_in, 8u);
}

TEST(CmdTrain, RunsUntilScheduleStops) {
    TempDir out;
    std::ostringstream log;
    // Aggressive schedule so the stop rule fires well before max_epochs.
    cmd_train(config(with(sparse_run(out.path()), {"optimizer.lr=0.01", "optimizer.lr_floor=0.002",
                                                   "optimizer.patience=1", "optimizer.min_delta=0.01"})),
              log);
    const auto rows = metrics(out / kMetricsFile);
    EXPECT_LT(rows.size(), 202u);
    EXPECT_GE(rows.size(), 4u);
    // lr never increases and never goes below the floor.
    for (std::size_t i = 2; i + 1 < rows.size(); ++i) {
        EXPECT_LE(rows[i].lr, rows[i - 1].lr);
        EXPECT_GE(rows[i].lr, 0.002 - 1e-12);
    }
}

TEST(CmdTrain, DeterministicRunsAreIdentical) {
    TempDir a, b;
    std::ostringstream log;
    const std::vector<std::string> extra{"optimizer.max_epochs=2", "deterministic=true", "seed=5"};
    cmd_train(config(with(sparse_run(a.path()), extra)), log);
    cmd_train(config(with(sparse_run(b.path()), extra)), log);
    EXPECT_EQ(slurp(a / kMetricsFile), slurp(b / kMetricsFile));
    EXPECT_EQ(slurp(a / kRedistributionFile), slurp(b / kRedistributionFile));
    EXPECT_EQ(slurp(a / kCheckpointDir / "head.ufsm"), slurp(b / kCheckpointDir / "head.ufsm"));

    TempDir c;
    cmd_train(config(with(sparse_run(c.path()), {"optimizer.max_epochs=2", "deterministic=true", "seed=6"})), log);
    EXPECT_NE(slurp(a / kMetricsFile), slurp(c / kMetricsFile));
}

TEST(CmdTrain, ZeroEpochsEvaluatesInitialModel) {
    TempDir out;
    std::ostringstream log;
    const auto row = cmd_train(config(with(sparse_run(out.path()), {"optimizer.max_epochs=0"})), log);
    const auto rows = metrics(out / kMetricsFile);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].epoch, 0u);
    EXPECT_EQ(rows[1].split, "best_test");
    EXPECT_EQ(untimed(rows[1]), untimed(row));
}

TEST(CmdEval, ReproducesFinalRow) {
    TempDir out;
    std::ostringstream log;
    const auto cfg = config(with(sparse_run(out.path()), {"optimizer.max_epochs=3"}));
    cmd_train(cfg, log);
    const auto trained = metrics(out / kMetricsFile).back();
    const auto row = cmd_eval(cfg, out / kCheckpointDir, log);
    EXPECT_EQ(untimed(row), untimed(trained));
    const auto written = metrics(out / kEvalFile);
    ASSERT_EQ(written.size(), 1u);
    EXPECT_EQ(untimed(written[0]), untimed(trained));
}

TEST(CmdEval, ErrorsOnMismatchAndLargeK) {
    TempDir out;
    std::ostringstream log;
    const auto base = sparse_run(out.path());
    cmd_train(config(with(base, {"optimizer.max_epochs=0"})), log);
    EXPECT_THROW(cmd_eval(config(with(base, {"eval.ks=1,1001"})), out / kCheckpointDir, log), ConfigError);
    EXPECT_THROW(cmd_eval(config(base), out / "nowhere", log), ConfigError);

    // A dataset with a different feature width.
    TempDir other;
    cmd_synth(config({"output=" + other.path().string(), "synth.n=50", "synth.d=10", "synth.labels=1000"}), log);
    auto wrong = base;
    wrong[1] = "data.test=" + (other / "test.txt").string();
    EXPECT_THROW(cmd_eval(config(wrong), out / kCheckpointDir, log), DimensionError);
}

TEST(CmdEval, DenseAndFullFanInCheckpointsAgree) {
    TempDir out;
    std::ostringstream log;
    const auto& data = synthetic_data();
    const std::vector<std::string> common{"data.train=" + (data / "train.txt").string(),
                                          "data.test=" + (data / "test.txt").string(), "model.intermediate_dim=16",
                                          "optimizer.max_epochs=2", "output=" + (out / "dense").string()};
    cmd_train(config(with(common, {"model.head=dense"})), log);
    const auto dense = load_checkpoint<float>(out / "dense" / kCheckpointDir);

    // Scatter the dense head into the fixed fan-in format with s = m.
    const auto& w = *dense.dense_head();
    std::vector<Index> idx;
    std::vector<float> val;
    for (std::size_t j = 0; j < w.cols(); ++j) {
        for (std::size_t r = 0; r < w.rows(); ++r) {
            idx.push_back(static_cast<Index>(r));
            val.push_back(w(r, j));
        }
    }
    auto sc = dense.config();
    sc.head = HeadKind::UniformSparse;
    sc.fan_in = w.rows();
    const Model<float> sparse(sc, dense.intermediate(), std::nullopt,
                              UniformSparseMatrix<float>(w.rows(), w.cols(), w.rows(), idx, val),
                              dense.head_bias());
    save_checkpoint(out / "sparse", sparse);

    const auto a = cmd_eval(config(with(common, {"model.head=dense"})), out / "dense" / kCheckpointDir, log);
    const auto b = cmd_eval(config(with(common, {"model.head=dense"})), out / "sparse", log);
    EXPECT_EQ(a.p_at, b.p_at);
    EXPECT_GT(a.p_at.at(1), 0.0);
}

TEST(CmdMemreport, PrintsReferenceShapes) {
    std::ostringstream out;
    cmd_memreport(config({}), out);
    const std::string text = out.str();
    EXPECT_NE(text.find("# reference: dense head, d=1024 L=2812281"), std::string::npos);
    EXPECT_NE(text.find("11519102976"), std::string::npos);
    EXPECT_NE(text.find("46076411904"), std::string::npos);
    EXPECT_NE(text.find("171543296"), std::string::npos);
    EXPECT_EQ(text.find("# configured"), std::string::npos);
}

TEST(Cli, ExitCodes) {
    TempDir out;
    const auto& data = synthetic_data();
    const std::string train = "data.train=" + (data / "train.txt").string();
    EXPECT_EQ(run_cli("memreport"), 0);
    EXPECT_EQ(run_cli("train --out " + (out / "a").string() + " model.bogus=1"), 2);
    EXPECT_EQ(run_cli("train --out " + (out / "b").string() + " data.train=/no/such/file"), 2);
    EXPECT_EQ(run_cli("train --config /no/such.cfg"), 2);
    EXPECT_EQ(run_cli("train --threads many"), 2);
    EXPECT_EQ(run_cli("--help"), 0);
    EXPECT_EQ(run_cli("eval --out " + (out / "c").string() + " " + train), 2);  // no checkpoint
    // No partial artifacts on configuration errors.
    EXPECT_FALSE(fs::exists(out / "a"));
    EXPECT_FALSE(fs::exists(out / "b"));
    EXPECT_FALSE(fs::exists(out / "c"));

    {
        std::ofstream f(out / "broken.txt");
        f << "2 3 4\n0 1:0.5\n";
    }
    EXPECT_EQ(run_cli("train --out " + (out / "d").string() + " data.train=" + (out / "broken.txt").string()), 3);
    EXPECT_FALSE(fs::exists(out / "d"));

    // Diverging run: huge learning rate on an unscaled loss.
    EXPECT_EQ(run_cli("train --out " + (out / "e").string() + " " + train +
                      " optimizer.lr=1e30 optimizer.max_epochs=1 model.intermediate_dim=8 model.fan_in=4 dst.prune_fraction=0.25"),
              4);

    EXPECT_EQ(run_cli("train --seed 3 --threads 1 --out " + (out / "f").string() + " " + train +
                      " optimizer.max_epochs=1 model.intermediate_dim=8 model.fan_in=4 dst.prune_fraction=0.25 data.validation_fraction=0.1"),
              0);
    EXPECT_TRUE(fs::is_regular_file(out / "f" / kMetricsFile));
    EXPECT_NE(slurp(out / "f" / kResolvedConfigFile).find("seed=3"), std::string::npos);
    EXPECT_EQ(run_cli("eval --out " + (out / "f").string() + " " + train + " model.intermediate_dim=8 model.fan_in=4 dst.prune_fraction=0.25 data.validation_fraction=0.1 seed=3"), 0);
    EXPECT_EQ(untimed(metrics(out / "f" / kEvalFile).back()), untimed(metrics(out / "f" / kMetricsFile).back()));
}
