#include "uxmc/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "uxmc/errors.hpp"

namespace uxmc {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename U>
U parse_unsigned(const std::string& key, const std::string& value) {
    U out{};
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (value.empty() || ec != std::errc() || ptr != value.data() + value.size()) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    }
    return out;
}

}  // namespace

KeyValues KeyValues::parse(std::istream& in) {
    KeyValues kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value, got '" + t + "'", lineno);
        const std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) throw ParseError("empty key", lineno);
        kv.entries_[key] = trim(std::string_view(t).substr(eq + 1));
    }
    return kv;
}

KeyValues KeyValues::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    try {
        return parse(in);
    } catch (const ParseError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

void KeyValues::set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value, got '" + assignment + "'");
    entries_[trim(std::string_view(assignment).substr(0, eq))] = trim(std::string_view(assignment).substr(eq + 1));
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
    used_.insert(key);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

double KeyValues::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    try {
        std::size_t pos = 0;
        const double out = std::stod(*v, &pos);
        if (pos != v->size()) throw std::invalid_argument(*v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + *v + "'");
    }
}

std::size_t KeyValues::get_size(const std::string& key, std::size_t fallback) const {
    const auto v = get(key);
    return v ? parse_unsigned<std::size_t>(key, *v) : fallback;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto v = get(key);
    return v ? parse_unsigned<std::uint64_t>(key, *v) : fallback;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + *v + "'");
}

std::vector<std::size_t> KeyValues::get_size_list(const std::string& key,
                                                  const std::vector<std::size_t>& fallback) const {
    const auto v = get(key);
    if (!v) return fallback;
    std::vector<std::size_t> out;
    std::stringstream ss(*v);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(parse_unsigned<std::size_t>(key, trim(tok)));
    if (out.empty()) throw ConfigError(key + ": empty list");
    return out;
}

void KeyValues::reject_unknown() const {
    std::string unknown;
    for (const auto& [k, v] : entries_) {
        if (!used_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
    }
    if (!unknown.empty()) throw ConfigError("unknown configuration keys: " + unknown);
}

void write_key_values(std::ostream& out, const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace uxmc
