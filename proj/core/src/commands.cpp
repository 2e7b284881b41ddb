#include "uxmc/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "uxmc/checkpoint.hpp"
#include "uxmc/errors.hpp"
#include "uxmc/mach.hpp"
#include "uxmc/parallel.hpp"

namespace uxmc {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path.string());
    return out;
}

void print_p_at(std::ostream& log, const std::string& prefix, const std::map<std::size_t, double>& p_at) {
    log << prefix;
    for (const auto& [k, p] : p_at) log << "  P@" << k << " " << fmt("%.4f", p);
    log << '\n';
}

void check_dims(const Dataset& ds, const ModelConfig& m, const std::string& what) {
    if (ds.feature_dim() != m.feature_dim || ds.num_labels() != m.num_labels) {
        throw DimensionError(what + " is " + std::to_string(ds.feature_dim()) + " features x " +
                             std::to_string(ds.num_labels()) + " labels, model expects " +
                             std::to_string(m.feature_dim) + " x " + std::to_string(m.num_labels));
    }
}

void write_train_meta(const fs::path& dir, std::size_t epoch, double lr) {
    auto out = open_out(dir / "train_state.txt");
    out << "epoch=" << epoch << "\nlr=" << format_double(lr) << '\n';
}

std::pair<std::size_t, double> read_train_meta(const fs::path& dir) {
    std::ifstream in(dir / "train_state.txt");
    if (!in) return {0, 0.0};
    const auto kv = KeyValues::parse(in);
    return {kv.get_size("epoch", 0), kv.get_double("lr", 0.0)};
}

template <typename T>
EpochRow report_row(const Model<T>& model, const Dataset& ds, const RunConfig& cfg, std::size_t epoch, double lr) {
    check_dims(ds, model.config(), ds.name);
    const auto rep = evaluate(model, cast_matrix<T>(ds.features), ds.labels, cfg.ks, cfg.loss, cfg.eval_chunk);
    const auto [uniform, dense] = head_bytes(model);
    EpochRow row;
    row.epoch = epoch;
    row.split = "best_" + ds.name;
    row.loss = rep.loss;
    row.p_at = rep.p_at;
    row.lr = lr;
    row.skip_fraction = rep.skip_fraction;
    row.epoch_seconds = cfg.deterministic ? 0.0 : rep.wall_time;
    row.head_bytes_uniform = uniform;
    row.head_bytes_dense = dense;
    return row;
}

template <typename T>
EpochRow train_impl(const RunConfig& cfg, const RunData& data, std::ostream& log) {
    const fs::path out_dir = cfg.output;
    fs::create_directories(out_dir);
    {
        auto conf = open_out(out_dir / kResolvedConfigFile);
        write_key_values(conf, cfg.to_keys());
    }
    auto metrics = open_out(out_dir / kMetricsFile);
    auto redistribution = open_out(out_dir / kRedistributionFile);
    auto timings = open_out(out_dir / kTimingsFile);
    metrics << metrics_csv_header() << '\n' << std::flush;
    redistribution << redistribution_csv_header() << '\n';
    timings << "epoch,seconds\n";
    const fs::path ckpt = out_dir / kCheckpointDir;

    // Real wall times go to timings.csv; in deterministic mode the metrics
    // CSV records zero so repeated runs compare byte for byte.
    RunConfig timed = cfg;
    timed.deterministic = false;

    TrainHooks<T> hooks;
    hooks.on_epoch = [&](const EpochRow& row, const Model<T>& model, bool improved) {
        timings << row.epoch << ',' << fmt("%.6f", row.epoch_seconds) << '\n' << std::flush;
        EpochRow logged = row;
        if (cfg.deterministic) logged.epoch_seconds = 0.0;
        metrics << format_metrics_row(logged) << '\n' << std::flush;
        log << "epoch " << row.epoch << "  loss " << fmt("%.5f", row.loss) << "  lr " << fmt("%g", row.lr);
        print_p_at(log, "", row.p_at);
        if (improved) {
            save_checkpoint(ckpt, model);
            write_train_meta(ckpt, row.epoch, row.lr);
        }
    };
    hooks.on_redistribution = [&](const RedistributionRow& r) {
        redistribution << format_redistribution_row(r) << '\n';
    };

    const auto result = train<T>(timed, data.train, data.validation, hooks);
    log << "stopped after " << result.rows.size() - 1 << " epochs (" << to_string(result.last_event)
        << "), best epoch " << result.best_epoch << '\n';

    const auto best = load_checkpoint<T>(ckpt);
    const auto [epoch, lr] = read_train_meta(ckpt);
    EpochRow final_row = report_row(best, data.report_set(), cfg, epoch, lr);
    metrics << format_metrics_row(final_row) << '\n' << std::flush;
    print_p_at(log, "final (" + final_row.split + ")", final_row.p_at);
    return final_row;
}

template <typename T>
EpochRow eval_impl(const RunConfig& cfg, const Dataset& ds, const fs::path& checkpoint, std::ostream& log) {
    const auto model = load_checkpoint<T>(checkpoint);
    for (auto k : cfg.ks) {
        if (k > model.config().num_labels) {
            throw ConfigError("eval.ks entry " + std::to_string(k) + " exceeds the label count " +
                              std::to_string(model.config().num_labels));
        }
    }
    const auto [epoch, lr] = read_train_meta(checkpoint);
    const auto row = report_row(model, ds, cfg, epoch, lr);
    print_p_at(log, "eval (" + row.split + ", " + std::to_string(ds.size()) + " instances)", row.p_at);
    fs::create_directories(cfg.output);
    auto out = open_out(fs::path(cfg.output) / kEvalFile);
    out << metrics_csv_header() << '\n' << format_metrics_row(row) << '\n';
    return row;
}

template <typename T>
std::vector<BenchRow> bench_impl(RunConfig cfg, const RunData& data, std::ostream& log) {
    cfg.optimizer.max_epochs = cfg.bench.train_epochs;
    const auto trained = train<T>(cfg, data.train, data.validation).last;
    Rng unused(0);
    const auto batches = epoch_batches(data.train.size(), cfg.batch_size, false, unused);

    std::vector<BenchRow> rows;
    for (LossKind loss : {LossKind::SquaredHinge, LossKind::Bce}) {
        BenchRow row;
        row.loss = loss;
        SkipStats skip;
        for (std::size_t b = 0; b < cfg.bench.batches; ++b) {
            const auto batch = gather_batch<T>(data.train, batches[b % batches.size()]);
            const auto trace = trained.forward(batch.features, false, unused);
            const DenseMatrix<T>& head_in = trained.config().has_intermediate() ? trace.hidden : trace.input;

            double f_ms, bi_ms, bw_ms;
            DenseMatrix<T> scores;
            auto t0 = Clock::now();
            if (const auto* w = trained.sparse_head()) {
                scores = sparse_forward(*w, head_in);
            } else {
                scores = dense_forward(*trained.dense_head(), head_in);
            }
            f_ms = ms_since(t0);
            const auto lr = compute_loss(loss, scores, batch.labels);
            t0 = Clock::now();
            if (const auto* w = trained.sparse_head()) {
                const auto g = sparse_backward_input(*w, lr.grad);
                bi_ms = ms_since(t0);
                if (b >= cfg.bench.warmup) skip += g.stats;
                t0 = Clock::now();
                const auto gw = sparse_backward_weights(*w, head_in, lr.grad);
                bw_ms = ms_since(t0);
            } else {
                const auto g = dense_backward_input(*trained.dense_head(), lr.grad);
                bi_ms = ms_since(t0);
                t0 = Clock::now();
                const auto gw = dense_backward_weights(head_in, lr.grad);
                bw_ms = ms_since(t0);
                if (b >= cfg.bench.warmup) {
                    for (T v : lr.grad.values()) {
                        skip.skipped += v == T(0) ? 1 : 0;
                        ++skip.total;
                    }
                }
            }
            if (b < cfg.bench.warmup) continue;
            row.forward_ms += f_ms;
            row.backward_input_ms += bi_ms;
            row.backward_weights_ms += bw_ms;
            ++row.timed_batches;
        }
        const double n = static_cast<double>(row.timed_batches);
        row.forward_ms /= n;
        row.backward_input_ms /= n;
        row.backward_weights_ms /= n;
        row.skip_fraction = skip.fraction();
        rows.push_back(row);
    }

    log << "loss  forward_ms  backward_input_ms  backward_weights_ms  skip_fraction\n";
    for (const auto& r : rows) {
        log << to_string(r.loss) << "  " << fmt("%.4f", r.forward_ms) << "  " << fmt("%.4f", r.backward_input_ms)
            << "  " << fmt("%.4f", r.backward_weights_ms) << "  " << fmt("%.6f", r.skip_fraction) << '\n';
    }
    fs::create_directories(cfg.output);
    auto out = open_out(fs::path(cfg.output) / "bench.csv");
    out << "loss,forward_ms,backward_input_ms,backward_weights_ms,skip_fraction,timed_batches\n";
    for (const auto& r : rows) {
        out << to_string(r.loss) << ',' << fmt("%.6f", r.forward_ms) << ',' << fmt("%.6f", r.backward_input_ms) << ','
            << fmt("%.6f", r.backward_weights_ms) << ',' << fmt("%.9g", r.skip_fraction) << ',' << r.timed_batches
            << '\n';
    }
    return rows;
}

Dataset with_labels(const Dataset& ds, LabelMatrix labels) {
    Dataset out;
    out.name = ds.name;
    out.features = ds.features;
    out.labels = std::move(labels);
    return out;
}

LabelMatrix block_labels(const LabelMatrix& meta, std::size_t r, std::size_t buckets) {
    std::vector<std::vector<std::uint32_t>> lists(meta.num_instances());
    for (std::size_t i = 0; i < meta.num_instances(); ++i) {
        for (auto id : meta.positives(i)) {
            if (id >= r * buckets && id < (r + 1) * buckets) lists[i].push_back(static_cast<std::uint32_t>(id - r * buckets));
        }
    }
    return LabelMatrix::from_lists(buckets, lists);
}

template <typename T>
MachReport mach_impl(const RunConfig& cfg, const RunData& data, std::ostream& log) {
    const auto& cm = cfg.mach;
    Rng hash_rng = Rng(cfg.seed).split(7);
    const auto spec = MachEnsembleSpec::random(cm.repetitions, cm.buckets, cfg.model.num_labels, hash_rng);
    const auto indicators = build_indicators(spec);
    const auto train_meta = meta_targets(data.train.labels, indicators);
    const auto val_meta = meta_targets(data.validation.labels, indicators);
    const Dataset& report = data.report_set();
    const auto report_x = cast_matrix<T>(report.features);

    DenseMatrix<T> meta_probs(report.size(), indicators.meta_dim());
    for (std::size_t r = 0; r < cm.repetitions; ++r) {
        RunConfig meta_cfg = cfg;
        meta_cfg.model.head = HeadKind::Dense;
        meta_cfg.model.num_labels = cm.buckets;
        meta_cfg.model.seed = Rng(cfg.model.seed).split(100 + r).next_u64();
        meta_cfg.seed = Rng(cfg.seed).split(100 + r).next_u64();
        meta_cfg.loss = LossKind::Bce;
        meta_cfg.dst.enabled = false;
        std::vector<std::size_t> ks;
        for (auto k : cfg.ks) {
            if (k <= cm.buckets) ks.push_back(k);
        }
        meta_cfg.ks = ks.empty() ? std::vector<std::size_t>{1} : ks;
        const auto result = train<T>(meta_cfg, with_labels(data.train, block_labels(train_meta, r, cm.buckets)),
                                     with_labels(data.validation, block_labels(val_meta, r, cm.buckets)));
        const auto scores = result.best.predict(report_x);
        for (std::size_t i = 0; i < scores.rows(); ++i) {
            for (std::size_t q = 0; q < cm.buckets; ++q) {
                meta_probs(i, r * cm.buckets + q) = T(1) / (T(1) + std::exp(-scores(i, q)));
            }
        }
        log << "meta-head " << r + 1 << "/" << cm.repetitions << " trained (" << result.rows.size() - 1
            << " epochs)\n";
    }
    MachReport rep;
    rep.mach_p_at = precision_at_k(mach_decode(meta_probs, indicators), report.labels, cfg.ks);

    const auto sparse = train<T>(cfg, data.train, data.validation);
    rep.sparse_p_at = precision_at_k(sparse.best.predict(report_x), report.labels, cfg.ks);

    print_p_at(log, "mach (R=" + std::to_string(cm.repetitions) + ", B=" + std::to_string(cm.buckets) + ")",
               rep.mach_p_at);
    print_p_at(log, "end-to-end (" + std::string(to_string(cfg.model.head)) + ")", rep.sparse_p_at);
    fs::create_directories(cfg.output);
    auto out = open_out(fs::path(cfg.output) / "mach.csv");
    out << "method,k,p_at_k\n";
    for (const auto& [k, p] : rep.mach_p_at) out << "mach," << k << ',' << fmt("%.9g", p) << '\n';
    for (const auto& [k, p] : rep.sparse_p_at) out << "end_to_end," << k << ',' << fmt("%.9g", p) << '\n';
    return rep;
}

void memory_section(std::ostream& out, const std::string& title, const std::vector<MemoryLine>& lines) {
    out << "# " << title << '\n';
    for (const auto& l : lines) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-20s %16llu  %12.3f MiB  %9.3f GiB\n", l.name.c_str(),
                      static_cast<unsigned long long>(l.bytes), static_cast<double>(l.bytes) / (1024.0 * 1024.0),
                      static_cast<double>(l.bytes) / (1024.0 * 1024.0 * 1024.0));
        out << buf;
    }
    out << '\n';
}

void prepare(RunConfig& cfg) {
    cfg.validate();
    set_num_threads(cfg.effective_threads());
}

}  // namespace

RunData load_run_data(RunConfig& cfg) {
    if (cfg.train.empty()) throw ConfigError("data.train (or data.train_features/data.train_labels) is required");
    Dataset full = cfg.train.load("train");
    std::optional<Dataset> test;
    if (!cfg.test.empty()) test = cfg.test.load("test");
    return make_run_data(cfg, std::move(full), std::move(test));
}

RunData make_run_data(RunConfig& cfg, Dataset full, std::optional<Dataset> test) {
    RunData data;
    data.test = std::move(test);
    cfg.bind_data(full.feature_dim(), full.num_labels());
    if (data.test) check_dims(*data.test, cfg.model, "data.test");
    if (cfg.validation_fraction > 0.0) {
        Rng split_rng = Rng(cfg.seed).split(1);
        auto [tr, val] = split_validation(full, cfg.validation_fraction, split_rng);
        data.train = std::move(tr);
        data.validation = std::move(val);
        data.train.name = "train";
        if (data.validation.size() == 0) data.validation = data.train;
    } else {
        data.train = std::move(full);
        data.validation = data.train;
    }
    data.validation.name = "val";
    return data;
}

EpochRow cmd_train(RunConfig cfg, std::ostream& log) {
    prepare(cfg);
    const RunData data = load_run_data(cfg);
    return cfg.deterministic ? train_impl<double>(cfg, data, log) : train_impl<float>(cfg, data, log);
}

EpochRow cmd_eval(RunConfig cfg, const fs::path& checkpoint, std::ostream& log) {
    prepare(cfg);
    if (!fs::is_regular_file(checkpoint / "manifest.txt")) {
        throw ConfigError("no checkpoint manifest in " + checkpoint.string());
    }
    Dataset ds;
    if (!cfg.test.empty()) {
        ds = cfg.test.load("test");
    } else {
        // Reconstruct the validation split of the training run.
        ds = load_run_data(cfg).validation;
    }
    return cfg.deterministic ? eval_impl<double>(cfg, ds, checkpoint, log)
                             : eval_impl<float>(cfg, ds, checkpoint, log);
}

std::vector<BenchRow> cmd_bench(RunConfig cfg, std::ostream& log) {
    prepare(cfg);
    const RunData data = load_run_data(cfg);
    return cfg.deterministic ? bench_impl<double>(cfg, data, log) : bench_impl<float>(cfg, data, log);
}

MachReport cmd_mach(RunConfig cfg, std::ostream& log) {
    prepare(cfg);
    const RunData data = load_run_data(cfg);
    return cfg.deterministic ? mach_impl<double>(cfg, data, log) : mach_impl<float>(cfg, data, log);
}

void cmd_memreport(RunConfig cfg, std::ostream& out) {
    cfg.validate();
    if (!cfg.train.empty() && (cfg.model.feature_dim == 0 || cfg.model.num_labels == 0)) {
        const Dataset ds = cfg.train.load("train");
        cfg.bind_data(ds.feature_dim(), ds.num_labels());
    }
    if (cfg.model.feature_dim > 0 && cfg.model.num_labels > 0) {
        cfg.model.validate();
        const auto& m = cfg.model;
        const HeadShape shape{m.head_input_dim(), m.num_labels, m.head == HeadKind::UniformSparse ? m.fan_in : 0};
        std::uint64_t dense = 0;
        if (m.has_intermediate()) dense += 4 * (m.feature_dim * m.intermediate_dim + m.intermediate_dim);
        if (m.head_bias) dense += 4 * m.num_labels;
        memory_section(out,
                       "configured: " + std::string(to_string(m.head)) + " head, d=" + std::to_string(m.head_input_dim()) +
                           " L=" + std::to_string(m.num_labels) +
                           (m.head == HeadKind::UniformSparse ? " s=" + std::to_string(m.fan_in) : ""),
                       parameter_memory_report(shape, dense));
    }
    memory_section(out, "reference: dense head, d=1024 L=2812281",
                   parameter_memory_report(HeadShape{1024, 2812281, 0}, 0));
    memory_section(out, "reference: uniform head, d=1024 L=670091 s=32",
                   parameter_memory_report(HeadShape{1024, 670091, 32}, 0));
}

void cmd_synth(RunConfig cfg, std::ostream& log) {
    cfg.validate();
    cfg.synth.spec.validate();
    Rng rng(cfg.synth.spec.seed);
    Dataset all = make_synthetic(cfg.synth.spec, rng);
    Rng split_rng = rng.split(1);
    auto [train_set, test_set] = split_validation(all, cfg.synth.test_fraction, split_rng);

    const fs::path dir = cfg.output;
    fs::create_directories(dir);
    auto write = [&](const Dataset& ds, const std::string& stem) {
        if (cfg.synth.format == "text") {
            auto out = open_out(dir / (stem + ".txt"));
            write_xmc_text(out, ds);
        } else {
            std::ofstream f(dir / (stem + ".xfea"), std::ios::binary | std::ios::trunc);
            if (!f) throw FormatError("cannot write " + (dir / (stem + ".xfea")).string());
            write_feature_blob(f, ds.features);
            auto l = open_out(dir / (stem + ".labels"));
            write_label_text(l, ds.labels);
        }
    };
    write(train_set, "train");
    write(test_set, "test");
    log << "wrote " << train_set.size() << " train and " << test_set.size() << " test instances ("
        << cfg.synth.spec.d << " features, " << cfg.synth.spec.labels << " labels) to " << dir.string() << '\n';
}

}  // namespace uxmc
