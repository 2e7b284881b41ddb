#include "uxmc/run_config.hpp"

#include <thread>

#include "uxmc/checkpoint.hpp"
#include "uxmc/errors.hpp"

namespace uxmc {

namespace fs = std::filesystem;

void DataSource::validate(const std::string& what) const {
    if (!text.empty()) {
        if (!features.empty() || !labels.empty()) {
            throw ConfigError(what + ": give either a text file or a features/labels pair, not both");
        }
        if (!fs::is_regular_file(text)) throw ConfigError(what + ": file not found: " + text.string());
        return;
    }
    if (features.empty() != labels.empty()) throw ConfigError(what + ": features and labels must be given together");
    for (const auto& p : {features, labels}) {
        if (!p.empty() && !fs::is_regular_file(p)) throw ConfigError(what + ": file not found: " + p.string());
    }
}

Dataset DataSource::load(const std::string& name) const {
    Dataset ds;
    if (!text.empty()) {
        ds = parse_xmc_text(text);
    } else {
        ds.features = load_feature_blob(features);
        ds.labels = parse_label_text(labels);
    }
    ds.name = name;
    ds.validate();
    return ds;
}

RunConfig RunConfig::from_keys(const KeyValues& kv) {
    RunConfig c;
    c.train.text = kv.get_string("data.train", "");
    c.train.features = kv.get_string("data.train_features", "");
    c.train.labels = kv.get_string("data.train_labels", "");
    c.test.text = kv.get_string("data.test", "");
    c.test.features = kv.get_string("data.test_features", "");
    c.test.labels = kv.get_string("data.test_labels", "");
    c.validation_fraction = kv.get_double("data.validation_fraction", c.validation_fraction);

    c.seed = kv.get_u64("seed", c.seed);
    c.model_seed_set = kv.has("model.seed");
    c.model = model_config_from_keys(kv);
    if (!c.model_seed_set) c.model.seed = c.seed;

    c.dst.enabled = kv.get_bool("dst.enabled", c.dst.enabled);
    c.dst.prune_fraction = kv.get_double("dst.prune_fraction", c.dst.prune_fraction);
    c.dst.interval_steps = kv.get_size("dst.interval_steps", c.dst.interval_steps);
    c.dst.per_epoch = kv.get_bool("dst.per_epoch", c.dst.per_epoch);
    if (auto v = kv.get("dst.regrow_init")) c.dst.regrow_init = parse_regrow_init(*v);

    auto& o = c.optimizer;
    o.lr = kv.get_double("optimizer.lr", o.lr);
    o.lr_floor = kv.get_double("optimizer.lr_floor", o.lr_floor);
    o.decay = kv.get_double("optimizer.decay", o.decay);
    o.patience = kv.get_size("optimizer.patience", o.patience);
    o.min_delta = kv.get_double("optimizer.min_delta", o.min_delta);
    o.max_epochs = kv.get_size("optimizer.max_epochs", o.max_epochs);

    if (auto v = kv.get("loss")) c.loss = parse_loss(*v);
    c.batch_size = kv.get_size("batch_size", c.batch_size);
    c.ks = kv.get_size_list("eval.ks", c.ks);
    c.eval_chunk = kv.get_size("eval.chunk", c.eval_chunk);
    c.output = kv.get_string("output", c.output.string());
    c.threads = kv.get_size("threads", c.threads);
    c.deterministic = kv.get_bool("deterministic", c.deterministic);

    c.bench.train_epochs = kv.get_size("bench.train_epochs", c.bench.train_epochs);
    c.bench.batches = kv.get_size("bench.batches", c.bench.batches);
    c.bench.warmup = kv.get_size("bench.warmup", c.bench.warmup);

    c.mach.repetitions = kv.get_size("mach.repetitions", c.mach.repetitions);
    c.mach.buckets = kv.get_size("mach.buckets", c.mach.buckets);

    auto& s = c.synth.spec;
    s.n = kv.get_size("synth.n", s.n);
    s.d = kv.get_size("synth.d", s.d);
    s.labels = kv.get_size("synth.labels", s.labels);
    s.positives = kv.get_size("synth.positives", s.positives);
    s.clusters = kv.get_size("synth.clusters", s.clusters);
    s.noise = kv.get_double("synth.noise", s.noise);
    s.label_flip = kv.get_double("synth.label_flip", s.label_flip);
    s.seed = kv.get_u64("synth.seed", c.seed);
    c.synth.test_fraction = kv.get_double("synth.test_fraction", c.synth.test_fraction);
    c.synth.format = kv.get_string("synth.format", c.synth.format);

    kv.reject_unknown();
    return c;
}

void RunConfig::validate() const {
    train.validate("data.train");
    test.validate("data.test");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("data.validation_fraction must be in [0, 1)");
    }
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (eval_chunk == 0) throw ConfigError("eval.chunk must be positive");
    for (auto k : ks) {
        if (k == 0) throw ConfigError("eval.ks entries must be positive");
    }
    if (!(model.input_dropout >= 0.0 && model.input_dropout < 1.0)) {
        throw ConfigError("model.input_dropout must be in [0, 1)");
    }
    LrSchedule sched;
    sched.lr = sched.initial_lr = optimizer.lr;
    sched.floor = optimizer.lr_floor;
    sched.factor = optimizer.decay;
    sched.patience = optimizer.patience;
    sched.min_delta = optimizer.min_delta;
    sched.validate();
    if (dst.enabled && !dst.per_epoch && dst.interval_steps == 0) {
        throw ConfigError("dst.interval_steps must be positive");
    }
    if (mach.buckets < 2) throw ConfigError("mach.buckets must be at least 2");
    if (mach.repetitions == 0) throw ConfigError("mach.repetitions must be positive");
    if (bench.batches <= bench.warmup) throw ConfigError("bench.batches must exceed bench.warmup");
    if (!(synth.test_fraction >= 0.0 && synth.test_fraction < 1.0)) {
        throw ConfigError("synth.test_fraction must be in [0, 1)");
    }
    if (synth.format != "text" && synth.format != "blob") throw ConfigError("synth.format must be text or blob");
}

void RunConfig::bind_data(std::size_t feature_dim, std::size_t num_labels) {
    if (model.feature_dim == 0) model.feature_dim = feature_dim;
    if (model.num_labels == 0) model.num_labels = num_labels;
    if (model.feature_dim != feature_dim) {
        throw DimensionError("model.feature_dim=" + std::to_string(model.feature_dim) + " but data has " +
                             std::to_string(feature_dim) + " features");
    }
    if (model.num_labels != num_labels) {
        throw DimensionError("model.num_labels=" + std::to_string(model.num_labels) + " but data has " +
                             std::to_string(num_labels) + " labels");
    }
    model.validate();
    for (auto k : ks) {
        if (k > num_labels) throw ConfigError("eval.ks entry " + std::to_string(k) + " exceeds label count");
    }
    if (model.head == HeadKind::UniformSparse && dst.enabled) dst.validate(model.fan_in, model.head_input_dim());
}

std::size_t RunConfig::effective_threads() const {
    if (deterministic) return 1;
    if (threads > 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

std::map<std::string, std::string> RunConfig::to_keys() const {
    std::map<std::string, std::string> kv;
    kv["data.train"] = train.text.string();
    kv["data.train_features"] = train.features.string();
    kv["data.train_labels"] = train.labels.string();
    kv["data.test"] = test.text.string();
    kv["data.test_features"] = test.features.string();
    kv["data.test_labels"] = test.labels.string();
    kv["data.validation_fraction"] = format_double(validation_fraction);
    model_config_to_keys(model, kv);
    kv["dst.enabled"] = dst.enabled ? "true" : "false";
    kv["dst.prune_fraction"] = format_double(dst.prune_fraction);
    kv["dst.interval_steps"] = std::to_string(dst.interval_steps);
    kv["dst.per_epoch"] = dst.per_epoch ? "true" : "false";
    kv["dst.regrow_init"] = std::string(to_string(dst.regrow_init));
    kv["optimizer.lr"] = format_double(optimizer.lr);
    kv["optimizer.lr_floor"] = format_double(optimizer.lr_floor);
    kv["optimizer.decay"] = format_double(optimizer.decay);
    kv["optimizer.patience"] = std::to_string(optimizer.patience);
    kv["optimizer.min_delta"] = format_double(optimizer.min_delta);
    kv["optimizer.max_epochs"] = std::to_string(optimizer.max_epochs);
    kv["loss"] = std::string(to_string(loss));
    kv["batch_size"] = std::to_string(batch_size);
    std::string ks_str;
    for (auto k : ks) ks_str += (ks_str.empty() ? "" : ",") + std::to_string(k);
    kv["eval.ks"] = ks_str;
    kv["eval.chunk"] = std::to_string(eval_chunk);
    kv["output"] = output.string();
    kv["seed"] = std::to_string(seed);
    kv["deterministic"] = deterministic ? "true" : "false";
    return kv;
}

RunConfig load_run_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
    KeyValues kv = file ? KeyValues::parse_file(file->string()) : KeyValues{};
    for (const auto& o : overrides) kv.set_assignment(o);
    return RunConfig::from_keys(kv);
}

}  // namespace uxmc
