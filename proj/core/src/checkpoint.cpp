#include "uxmc/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "uxmc/binary_io.hpp"
#include "uxmc/errors.hpp"

namespace uxmc {

namespace fs = std::filesystem;

template <typename T>
void write_dense_blob(std::ostream& out, const DenseMatrix<T>& m) {
    binary::write_magic(out, "UDNM");
    binary::write_u32(out, kUdnmVersion);
    binary::write_u32(out, static_cast<std::uint32_t>(m.rows()));
    binary::write_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (T v : m.values()) binary::write_f32(out, static_cast<float>(v));
    if (!out) throw FormatError("UDNM: write failed");
}

template <typename T>
DenseMatrix<T> read_dense_blob(std::istream& in) {
    binary::expect_magic(in, "UDNM", "UDNM");
    const auto version = binary::read_u32(in, "UDNM");
    if (version != kUdnmVersion) throw FormatError("UDNM: unsupported version " + std::to_string(version));
    const std::size_t rows = binary::read_u32(in, "UDNM");
    const std::size_t cols = binary::read_u32(in, "UDNM");
    DenseMatrix<T> m(rows, cols);
    for (auto& v : m.values()) v = static_cast<T>(binary::read_f32(in, "UDNM"));
    return m;
}

namespace {

template <typename M, typename Writer>
void write_file(const fs::path& path, const M& value, Writer writer) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    writer(out, value);
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return in;
}

}  // namespace

void model_config_to_keys(const ModelConfig& cfg, std::map<std::string, std::string>& out) {
    out["model.feature_dim"] = std::to_string(cfg.feature_dim);
    out["model.intermediate_dim"] = std::to_string(cfg.intermediate_dim);
    out["model.head"] = std::string(to_string(cfg.head));
    out["model.fan_in"] = std::to_string(cfg.fan_in);
    out["model.num_labels"] = std::to_string(cfg.num_labels);
    out["model.input_dropout"] = format_double(cfg.input_dropout);
    out["model.activation"] = std::string(to_string(cfg.activation));
    out["model.head_bias"] = cfg.head_bias ? "true" : "false";
    out["model.seed"] = std::to_string(cfg.seed);
}

ModelConfig model_config_from_keys(const KeyValues& kv, ModelConfig cfg) {
    cfg.feature_dim = kv.get_size("model.feature_dim", cfg.feature_dim);
    cfg.intermediate_dim = kv.get_size("model.intermediate_dim", cfg.intermediate_dim);
    if (auto v = kv.get("model.head")) cfg.head = parse_head(*v);
    cfg.fan_in = kv.get_size("model.fan_in", cfg.fan_in);
    cfg.num_labels = kv.get_size("model.num_labels", cfg.num_labels);
    cfg.input_dropout = kv.get_double("model.input_dropout", cfg.input_dropout);
    if (auto v = kv.get("model.activation")) cfg.activation = parse_activation(*v);
    cfg.head_bias = kv.get_bool("model.head_bias", cfg.head_bias);
    cfg.seed = kv.get_u64("model.seed", cfg.seed);
    return cfg;
}

template <typename T>
void save_checkpoint(const fs::path& dir, const Model<T>& model) {
    fs::create_directories(dir);
    std::map<std::string, std::string> kv;
    kv["format"] = "uxmc-checkpoint";
    kv["version"] = "1";
    model_config_to_keys(model.config(), kv);

    if (const auto& inter = model.intermediate()) {
        write_file(dir / "intermediate_weights.udnm", inter->weights, write_dense_blob<T>);
        write_file(dir / "intermediate_bias.udnm", DenseMatrix<T>(1, inter->bias.size(), inter->bias),
                   write_dense_blob<T>);
        kv["file.intermediate_weights"] = "intermediate_weights.udnm";
        kv["file.intermediate_bias"] = "intermediate_bias.udnm";
    }
    if (const auto* head = model.sparse_head()) {
        write_file(dir / "head.ufsm", *head, write_ufsm<T>);
        kv["file.head"] = "head.ufsm";
    } else {
        write_file(dir / "head.udnm", *model.dense_head(), write_dense_blob<T>);
        kv["file.head"] = "head.udnm";
    }
    if (!model.head_bias().empty()) {
        write_file(dir / "head_bias.udnm", DenseMatrix<T>(1, model.head_bias().size(), model.head_bias()),
                   write_dense_blob<T>);
        kv["file.head_bias"] = "head_bias.udnm";
    }

    std::ofstream manifest(dir / "manifest.txt", std::ios::trunc);
    if (!manifest) throw FormatError("cannot write " + (dir / "manifest.txt").string());
    write_key_values(manifest, kv);
}

template <typename T>
Model<T> load_checkpoint(const fs::path& dir) {
    std::ifstream manifest(dir / "manifest.txt");
    if (!manifest) throw FormatError("checkpoint: missing " + (dir / "manifest.txt").string());
    KeyValues kv;
    try {
        kv = KeyValues::parse(manifest);
    } catch (const ParseError& e) {
        throw FormatError(std::string("checkpoint manifest: ") + e.what());
    }
    auto require = [&](const std::string& key) -> std::string {
        auto v = kv.get(key);
        if (!v) throw FormatError("checkpoint manifest: missing key '" + key + "'");
        return *v;
    };
    if (require("format") != "uxmc-checkpoint") throw FormatError("checkpoint manifest: unknown format");
    if (require("version") != "1") throw FormatError("checkpoint manifest: unsupported version");

    ModelConfig cfg;
    try {
        cfg = model_config_from_keys(kv);
        cfg.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("checkpoint manifest: ") + e.what());
    }

    std::optional<DenseLayer<T>> inter;
    if (cfg.has_intermediate()) {
        auto win = open_in(dir / require("file.intermediate_weights"));
        auto bin = open_in(dir / require("file.intermediate_bias"));
        auto bias = read_dense_blob<T>(bin);
        inter = DenseLayer<T>{read_dense_blob<T>(win), std::move(bias.storage())};
    }
    std::optional<DenseMatrix<T>> dense_head;
    std::optional<UniformSparseMatrix<T>> sparse_head;
    {
        auto hin = open_in(dir / require("file.head"));
        if (cfg.head == HeadKind::Dense) {
            dense_head = read_dense_blob<T>(hin);
        } else {
            sparse_head = read_ufsm<T>(hin);
        }
    }
    std::vector<T> head_bias;
    if (cfg.head_bias) {
        auto bin = open_in(dir / require("file.head_bias"));
        head_bias = std::move(read_dense_blob<T>(bin).storage());
    }
    try {
        return Model<T>(cfg, std::move(inter), std::move(dense_head), std::move(sparse_head), std::move(head_bias));
    } catch (const Error& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
}

template void write_dense_blob(std::ostream&, const DenseMatrix<float>&);
template void write_dense_blob(std::ostream&, const DenseMatrix<double>&);
template DenseMatrix<float> read_dense_blob(std::istream&);
template DenseMatrix<double> read_dense_blob(std::istream&);
template void save_checkpoint(const fs::path&, const Model<float>&);
template void save_checkpoint(const fs::path&, const Model<double>&);
template Model<float> load_checkpoint(const fs::path&);
template Model<double> load_checkpoint(const fs::path&);

}  // namespace uxmc
