// uxmc: command line front-end for training and evaluating XMC models.
#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "uxmc/commands.hpp"
#include "uxmc/errors.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4 };

struct CommonFlags {
    std::string config;
    std::optional<std::size_t> threads;
    bool deterministic = false;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "key=value configuration file");
    cmd->add_option("--threads", f.threads, "worker threads for the kernels");
    cmd->add_flag("--deterministic", f.deterministic, "single-threaded 64-bit reference mode");
    cmd->add_option("--seed", f.seed, "run seed");
    cmd->add_option("--out", f.out, "output directory");
    cmd->add_option("overrides", f.overrides, "key=value settings applied after the config file");
}

uxmc::RunConfig resolve(const CommonFlags& f) {
    std::vector<std::string> overrides = f.overrides;
    if (f.threads) overrides.push_back("threads=" + std::to_string(*f.threads));
    if (f.deterministic) overrides.push_back("deterministic=true");
    if (f.seed) overrides.push_back("seed=" + std::to_string(*f.seed));
    if (!f.out.empty()) overrides.push_back("output=" + f.out);
    std::optional<std::filesystem::path> file;
    if (!f.config.empty()) file = f.config;
    return uxmc::load_run_config(file, overrides);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"uxmc: extreme multilabel classification with fixed fan-in sparse output layers"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string checkpoint;

    auto* train = app.add_subcommand("train", "train a model and write metrics.csv plus the best checkpoint");
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test (or validation) set");
    auto* bench = app.add_subcommand("bench", "time head kernels under squared hinge and Bce");
    auto* mach = app.add_subcommand("mach", "train a label-hashing ensemble and compare with an end-to-end run");
    auto* memreport = app.add_subcommand("memreport", "print parameter byte accounting");
    auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
    for (auto* cmd : {train, eval, bench, mach, memreport, synth}) add_common(cmd, flags);
    eval->add_option("--checkpoint", checkpoint, "checkpoint directory (default: <out>/checkpoint)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Usage errors share the configuration exit code; --help exits 0.
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    try {
        auto cfg = resolve(flags);
        if (train->parsed()) {
            uxmc::cmd_train(cfg, std::cout);
        } else if (eval->parsed()) {
            const std::filesystem::path ckpt =
                checkpoint.empty() ? cfg.output / uxmc::kCheckpointDir : std::filesystem::path(checkpoint);
            uxmc::cmd_eval(cfg, ckpt, std::cout);
        } else if (bench->parsed()) {
            uxmc::cmd_bench(cfg, std::cout);
        } else if (mach->parsed()) {
            uxmc::cmd_mach(cfg, std::cout);
        } else if (memreport->parsed()) {
            uxmc::cmd_memreport(cfg, std::cout);
        } else if (synth->parsed()) {
            uxmc::cmd_synth(cfg, std::cout);
        }
    } catch (const uxmc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const uxmc::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const uxmc::Error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}
