#include "uxmc/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <sstream>

#include "uxmc/errors.hpp"

namespace uxmc {

namespace {

constexpr std::size_t kCsvKs[] = {1, 3, 5};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string metrics_csv_header() {
    return "epoch,split,loss,p@1,p@3,p@5,lr,skip_fraction,epoch_seconds,head_bytes_uniform,head_bytes_dense";
}

std::string format_metrics_row(const EpochRow& row) {
    std::string out = std::to_string(row.epoch) + "," + row.split + "," + fmt(row.loss);
    for (std::size_t k : kCsvKs) {
        auto it = row.p_at.find(k);
        out += ",";
        if (it != row.p_at.end()) out += fmt(it->second);
    }
    out += "," + fmt(row.lr) + "," + fmt(row.skip_fraction) + "," + fmt(row.epoch_seconds) + "," +
           std::to_string(row.head_bytes_uniform) + "," + std::to_string(row.head_bytes_dense);
    return out;
}

std::vector<EpochRow> read_metrics_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != metrics_csv_header()) throw FormatError("metrics CSV: unexpected header");
    std::vector<EpochRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 11) throw ParseError("metrics CSV: expected 11 fields", lineno);
        try {
            EpochRow r;
            r.epoch = std::stoul(f[0]);
            r.split = f[1];
            r.loss = std::stod(f[2]);
            for (std::size_t i = 0; i < 3; ++i) {
                if (!f[3 + i].empty()) r.p_at[kCsvKs[i]] = std::stod(f[3 + i]);
            }
            r.lr = std::stod(f[6]);
            r.skip_fraction = std::stod(f[7]);
            r.epoch_seconds = std::stod(f[8]);
            r.head_bytes_uniform = std::stoull(f[9]);
            r.head_bytes_dense = std::stoull(f[10]);
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ParseError("metrics CSV: malformed number", lineno);
        }
    }
    return rows;
}

std::string redistribution_csv_header() { return "step,epoch,pruned,mean_pruned_abs,max_pruned_abs"; }

std::string format_redistribution_row(const RedistributionRow& row) {
    return std::to_string(row.step) + "," + std::to_string(row.epoch) + "," + std::to_string(row.pruned) + "," +
           fmt(row.mean_pruned_magnitude) + "," + fmt(row.max_pruned_magnitude);
}

template <typename T>
std::pair<std::uint64_t, std::uint64_t> head_bytes(const Model<T>& model) {
    const auto& c = model.config();
    const std::uint64_t rows = c.head_input_dim(), cols = c.num_labels;
    const std::uint64_t nnz = model.sparse_head() ? static_cast<std::uint64_t>(c.fan_in) * cols : rows * cols;
    return {MemoryModel{StorageFormat::Uniform, nnz, rows, cols}.bytes(),
            MemoryModel{StorageFormat::Dense, nnz, rows, cols}.bytes()};
}

LrSchedule make_schedule(const OptimizerConfig& o) {
    LrSchedule s;
    s.lr = s.initial_lr = o.lr;
    s.floor = o.lr_floor;
    s.factor = o.decay;
    s.patience = o.patience;
    s.min_delta = o.min_delta;
    s.validate();
    return s;
}

template <typename T>
TrainResult<T> train(const RunConfig& cfg, const Dataset& train_set, const Dataset& validation,
                     const TrainHooks<T>& hooks) {
    cfg.model.validate();
    if (train_set.feature_dim() != cfg.model.feature_dim || validation.feature_dim() != cfg.model.feature_dim) {
        throw DimensionError("train: feature dimension does not match model.feature_dim");
    }
    if (train_set.num_labels() != cfg.model.num_labels || validation.num_labels() != cfg.model.num_labels) {
        throw DimensionError("train: label count does not match model.num_labels");
    }
    if (train_set.size() == 0 || validation.size() == 0) throw DimensionError("train: empty training or validation set");

    Rng master(cfg.seed);
    Rng dropout_rng = master.split(3);
    Rng shuffle_rng = master.split(4);
    Rng dst_rng = master.split(5);

    Rng init_rng(cfg.model.seed);
    Model<T> model = Model<T>::init(cfg.model, init_rng);
    if (hooks.on_init) hooks.on_init(model);

    AdamState<T> adam;
    {
        const auto params = model.parameters();
        adam = AdamState<T>::for_params(params);
    }
    LrSchedule schedule = make_schedule(cfg.optimizer);

    const DenseMatrix<T> val_x = cast_matrix<T>(validation.features);
    const auto [bytes_uniform, bytes_dense] = head_bytes(model);

    TrainResult<T> result{model, model, 0, {}, {}, 0, ScheduleEvent::Continue};
    double best_p3 = -1.0;

    auto eval_row = [&](std::size_t epoch, double seconds, double skip) {
        const auto rep = evaluate(model, val_x, validation.labels, cfg.ks, cfg.loss, cfg.eval_chunk);
        EpochRow row;
        row.epoch = epoch;
        row.split = "val";
        row.loss = rep.loss;
        row.p_at = rep.p_at;
        row.lr = schedule.lr;
        row.skip_fraction = skip;
        row.epoch_seconds = cfg.deterministic ? 0.0 : seconds;
        row.head_bytes_uniform = bytes_uniform;
        row.head_bytes_dense = bytes_dense;
        return row;
    };
    auto p3_of = [](const EpochRow& row) {
        auto it = row.p_at.find(3);
        return it != row.p_at.end() ? it->second : row.p_at.begin()->second;
    };
    auto record = [&](const EpochRow& row) {
        const bool improved = p3_of(row) > best_p3;
        if (improved) {
            best_p3 = p3_of(row);
            result.best = model;
            result.best_epoch = row.epoch;
        }
        result.rows.push_back(row);
        if (hooks.on_epoch) hooks.on_epoch(row, model, improved);
    };

    std::size_t epoch = 0;
    auto redistribute = [&]() {
        std::optional<RedistributionReport> rep;
        if (hooks.redistribute) {
            rep = hooks.redistribute(model, adam, dst_rng);
        } else if (cfg.dst.enabled && model.sparse_head()) {
            rep = prune_and_regrow(*model.sparse_head_mut(), adam.blocks[model.head_block()], cfg.dst, dst_rng);
        }
        if (!rep) return;
        RedistributionRow r{result.steps, epoch, rep->pruned(), rep->mean_pruned_magnitude(),
                            rep->max_pruned_magnitude()};
        result.redistributions.push_back(r);
        if (hooks.on_redistribution) hooks.on_redistribution(r);
    };
    const bool dst_active = cfg.dst.enabled && (model.sparse_head() || hooks.redistribute);

    record(eval_row(0, 0.0, 0.0));

    for (epoch = 1; epoch <= cfg.optimizer.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        if (dst_active && cfg.dst.per_epoch && epoch > 1) redistribute();

        SkipStats skip;
        const double lr = schedule.lr;
        for (const auto& rows : epoch_batches(train_set.size(), cfg.batch_size, true, shuffle_rng)) {
            const auto batch = gather_batch<T>(train_set, rows);
            const auto trace = model.forward(batch.features, true, dropout_rng);
            const auto loss = compute_loss(cfg.loss, trace.scores, batch.labels);
            if (!std::isfinite(loss.loss)) {
                throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                                   std::to_string(result.steps + 1) + " (lr " + fmt(lr) + ")");
            }
            auto grads = model.backward(trace, loss.grad);
            skip += grads.skip;
            if (hooks.on_gradients) hooks.on_gradients(grads);
            const auto params = model.parameters();
            adam_step<T>(params, grads.blocks, adam, lr);
            ++result.steps;
            if (dst_active && !cfg.dst.per_epoch && result.steps % cfg.dst.interval_steps == 0) redistribute();
        }

        EpochRow row = eval_row(epoch, seconds_since(t0), skip.fraction());
        row.lr = lr;
        record(row);
        result.last_event = schedule.update(p3_of(row));
        if (result.last_event == ScheduleEvent::Stop) break;
    }
    result.last = std::move(model);
    return result;
}

#define UXMC_INSTANTIATE(T)                                                                                     \
    template std::pair<std::uint64_t, std::uint64_t> head_bytes(const Model<T>&);                               \
    template TrainResult<T> train(const RunConfig&, const Dataset&, const Dataset&, const TrainHooks<T>&);

UXMC_INSTANTIATE(float)
UXMC_INSTANTIATE(double)

}  // namespace uxmc
