#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace uxmc {

/// Flat `section.key=value` configuration. '#' starts a comment. Typed
/// getters throw ConfigError on malformed values and remember which keys
/// were read, so reject_unknown() can flag typos.
class KeyValues {
public:
    KeyValues() = default;

    /// Throws ParseError (with line number) on a line without '='.
    static KeyValues parse(std::istream& in);
    static KeyValues parse_file(const std::string& path);

    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    /// "key=value" form used by command-line overrides.
    void set_assignment(const std::string& assignment);

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    std::optional<std::string> get(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::size_t> get_size_list(const std::string& key, const std::vector<std::size_t>& fallback) const;

    /// Throws ConfigError listing keys that no getter asked for.
    void reject_unknown() const;

    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }

private:
    std::map<std::string, std::string> entries_;
    mutable std::set<std::string> used_;
};

/// Writes "key=value" lines in key order.
void write_key_values(std::ostream& out, const std::map<std::string, std::string>& kv);

std::string format_double(double v);

}  // namespace uxmc
