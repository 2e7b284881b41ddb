#include "uxmc/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "uxmc/binary_io.hpp"
#include "uxmc/errors.hpp"

namespace uxmc {

namespace fs = std::filesystem;

void Dataset::validate() const {
    if (features.rows() != labels.num_instances()) {
        throw ValidationError("dataset '" + name + "': " + std::to_string(features.rows()) + " feature rows but " +
                              std::to_string(labels.num_instances()) + " label rows");
    }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out{name, DenseMatrix<float>(rows.size(), feature_dim()), labels.gather(rows)};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy(features.row(rows[r]).begin(), features.row(rows[r]).end(), out.features.row(r).begin());
    }
    return out;
}

namespace {

template <typename U>
bool parse_int(std::string_view tok, U& out) {
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc() && p == tok.data() + tok.size() && !tok.empty();
}

bool parse_float(std::string_view tok, float& out) {
    if (tok.empty()) return false;
    std::string s(tok);
    char* end = nullptr;
    out = std::strtof(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        const std::size_t b = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
        if (b < i) out.push_back(line.substr(b, i - b));
    }
    return out;
}

void parse_label_field(std::string_view field, std::size_t L, std::size_t lineno, std::vector<std::uint32_t>& out) {
    out.clear();
    std::size_t b = 0;
    while (b <= field.size()) {
        auto e = field.find(',', b);
        if (e == std::string_view::npos) e = field.size();
        const auto tok = field.substr(b, e - b);
        std::uint32_t id = 0;
        if (!parse_int(tok, id)) throw ParseError("bad label id '" + std::string(tok) + "'", lineno);
        if (id >= L) {
            throw ParseError("label id " + std::to_string(id) + " >= " + std::to_string(L), lineno);
        }
        out.push_back(id);
        b = e + 1;
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
}

std::ifstream open_or_throw(const fs::path& path, bool binary_mode) {
    std::ifstream in(path, binary_mode ? std::ios::binary : std::ios::in);
    if (!in) throw FormatError("cannot open " + path.string());
    return in;
}

}  // namespace

Dataset parse_xmc_text(std::istream& in, std::string name) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) throw ParseError("missing header", lineno);
    const auto head = split_ws(line);
    std::size_t n = 0, d = 0, L = 0;
    if (head.size() != 3 || !parse_int(head[0], n) || !parse_int(head[1], d) || !parse_int(head[2], L)) {
        throw ParseError("header must be 'N d L', got '" + line + "'", lineno);
    }

    Dataset ds{std::move(name), DenseMatrix<float>(n, d), LabelMatrix(L)};
    std::vector<std::uint32_t> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ++lineno;
        if (!std::getline(in, line)) {
            throw ParseError("expected " + std::to_string(n) + " rows, file ends after " + std::to_string(i), lineno);
        }
        const auto toks = split_ws(line);
        std::size_t t = 0;
        ids.clear();
        if (!toks.empty() && toks[0].find(':') == std::string_view::npos) {
            parse_label_field(toks[0], L, lineno, ids);
            t = 1;
        }
        ds.labels.push_back(ids);
        auto row = ds.features.row(i);
        for (; t < toks.size(); ++t) {
            const auto colon = toks[t].find(':');
            std::size_t idx = 0;
            float val = 0.0f;
            if (colon == std::string_view::npos || !parse_int(toks[t].substr(0, colon), idx) ||
                !parse_float(toks[t].substr(colon + 1), val)) {
                throw ParseError("bad feature pair '" + std::string(toks[t]) + "'", lineno);
            }
            if (idx >= d) {
                throw ParseError("feature index " + std::to_string(idx) + " >= " + std::to_string(d), lineno);
            }
            row[idx] = val;
        }
    }
    while (std::getline(in, line)) {
        ++lineno;
        if (!split_ws(line).empty()) throw ParseError("more rows than the header's N", lineno);
    }
    return ds;
}

Dataset parse_xmc_text(const fs::path& path) {
    auto in = open_or_throw(path, false);
    return parse_xmc_text(in, path.stem().string());
}

void write_xmc_text(std::ostream& out, const Dataset& ds) {
    ds.validate();
    char buf[64];
    out << ds.size() << ' ' << ds.feature_dim() << ' ' << ds.num_labels() << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto pos = ds.labels.positives(i);
        for (std::size_t k = 0; k < pos.size(); ++k) out << (k ? "," : "") << pos[k];
        const auto row = ds.features.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (row[j] == 0.0f) continue;
            // %.9g round-trips every float exactly.
            std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(row[j]));
            out << ' ' << j << ':' << buf;
        }
        out << '\n';
    }
}

DenseMatrix<float> load_feature_blob(std::istream& in) {
    binary::expect_magic(in, "XFEA", "XFEA");
    const auto version = binary::read_u32(in, "XFEA");
    if (version != kXfeaVersion) throw FormatError("XFEA: unsupported version " + std::to_string(version));
    const std::uint64_t n = binary::read_u64(in, "XFEA");
    const std::uint32_t d = binary::read_u32(in, "XFEA");
    // Read into a byte buffer first so a truncated file never yields partial data.
    const std::uint64_t count = n * d;
    std::string raw(count * 4, '\0');
    binary::read_exact(in, raw.data(), raw.size(), "XFEA");
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("XFEA: trailing bytes after N*d values");
    DenseMatrix<float> m(n, d);
    auto v = m.values();
    for (std::size_t k = 0; k < count; ++k) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * k + b])) << (8 * b);
        v[k] = std::bit_cast<float>(bits);
    }
    return m;
}

DenseMatrix<float> load_feature_blob(const fs::path& path) {
    auto in = open_or_throw(path, true);
    return load_feature_blob(in);
}

void write_feature_blob(std::ostream& out, const DenseMatrix<float>& m) {
    binary::write_magic(out, "XFEA");
    binary::write_u32(out, kXfeaVersion);
    binary::write_u64(out, m.rows());
    binary::write_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (float v : m.values()) binary::write_f32(out, v);
    if (!out) throw FormatError("XFEA: write failed");
}

LabelMatrix parse_label_text(std::istream& in) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) throw ParseError("missing header", lineno);
    const auto head = split_ws(line);
    std::size_t n = 0, L = 0;
    if (head.size() != 2 || !parse_int(head[0], n) || !parse_int(head[1], L)) {
        throw ParseError("label header must be 'N L', got '" + line + "'", lineno);
    }
    LabelMatrix labels(L);
    std::vector<std::uint32_t> ids;
    for (std::size_t i = 0; i < n; ++i) {
        ++lineno;
        if (!std::getline(in, line)) throw ParseError("expected " + std::to_string(n) + " label rows", lineno);
        const auto toks = split_ws(line);
        if (toks.size() > 1) throw ParseError("unexpected whitespace in label row", lineno);
        ids.clear();
        if (!toks.empty()) parse_label_field(toks[0], L, lineno, ids);
        labels.push_back(ids);
    }
    return labels;
}

LabelMatrix parse_label_text(const fs::path& path) {
    auto in = open_or_throw(path, false);
    return parse_label_text(in);
}

void write_label_text(std::ostream& out, const LabelMatrix& labels) {
    out << labels.num_instances() << ' ' << labels.num_labels() << '\n';
    for (std::size_t i = 0; i < labels.num_instances(); ++i) {
        const auto pos = labels.positives(i);
        for (std::size_t k = 0; k < pos.size(); ++k) out << (k ? "," : "") << pos[k];
        out << '\n';
    }
}

void SyntheticSpec::validate() const {
    if (n == 0 || d == 0 || labels == 0) throw ConfigError("synthetic: n, d and labels must be positive");
    if (clusters == 0 || clusters > labels) throw ConfigError("synthetic: need 1 <= clusters <= labels");
    if (positives == 0) throw ConfigError("synthetic: positives must be at least 1");
    if (!(noise >= 0.0)) throw ConfigError("synthetic: noise must be non-negative");
    if (!(label_flip >= 0.0 && label_flip <= 1.0)) throw ConfigError("synthetic: label_flip must lie in [0, 1]");
}

std::pair<std::size_t, std::size_t> SyntheticSpec::block(std::size_t c) const noexcept {
    return {c * labels / clusters, (c + 1) * labels / clusters};
}

Dataset make_synthetic(const SyntheticSpec& spec, Rng& rng, std::vector<std::size_t>* clusters_out) {
    spec.validate();
    const Rng base(rng.next_u64() ^ spec.seed);
    Rng centroid_rng = base.split(1);
    Rng inst_rng = base.split(2);

    DenseMatrix<float> centroids(spec.clusters, spec.d);
    for (auto& v : centroids.values()) v = static_cast<float>(centroid_rng.normal());

    Dataset ds{"synthetic", DenseMatrix<float>(spec.n, spec.d), LabelMatrix(spec.labels)};
    if (clusters_out) clusters_out->assign(spec.n, 0);
    std::vector<std::uint32_t> ids;
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t c = inst_rng.below(spec.clusters);
        if (clusters_out) (*clusters_out)[i] = c;
        auto row = ds.features.row(i);
        auto mu = centroids.row(c);
        for (std::size_t j = 0; j < spec.d; ++j) row[j] = mu[j] + static_cast<float>(spec.noise * inst_rng.normal());

        const auto [b, e] = spec.block(c);
        ids.clear();
        for (std::size_t l = b; l < std::min(e, b + spec.positives); ++l) {
            std::uint32_t id = static_cast<std::uint32_t>(l);
            if (spec.label_flip > 0.0 && inst_rng.bernoulli(spec.label_flip)) {
                id = static_cast<std::uint32_t>(inst_rng.below(spec.labels));
            }
            ids.push_back(id);
        }
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        ds.labels.push_back(ids);
    }
    return ds;
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, bool shuffle, Rng& rng) {
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t b = 0; b < n; b += batch_size) {
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                             order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch_size)));
    }
    return batches;
}

template <typename T>
Batch<T> gather_batch(const Dataset& ds, std::span<const std::size_t> rows) {
    Batch<T> batch{DenseMatrix<T>(rows.size(), ds.feature_dim()), ds.labels.gather(rows)};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        auto src = ds.features.row(rows[r]);
        auto dst = batch.features.row(r);
        for (std::size_t j = 0; j < src.size(); ++j) dst[j] = static_cast<T>(src[j]);
    }
    return batch;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& ds, double fraction, Rng& rng) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("validation fraction must lie in [0, 1)");
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ds.size())));
    std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(val.begin(), val.end());
    std::sort(train.begin(), train.end());
    auto tr = ds.subset(train);
    auto va = ds.subset(val);
    tr.name = ds.name + ".train";
    va.name = ds.name + ".val";
    return {std::move(tr), std::move(va)};
}

template Batch<float> gather_batch(const Dataset&, std::span<const std::size_t>);
template Batch<double> gather_batch(const Dataset&, std::span<const std::size_t>);

}  // namespace uxmc
