#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace ltd {

/// Flat "section.key = value" text. Blank lines and '#' comments are
/// skipped; duplicate keys are an error. Readers consume keys through the
/// typed getters and call reject_unknown() to flag anything left over.
class KeyValues {
public:
    static KeyValues parse(std::string_view text, std::string_view origin = "<string>");
    static KeyValues load(const std::filesystem::path& path);

    bool contains(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::size_t> get_size_list(const std::string& key, const std::vector<std::size_t>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& key, const std::vector<std::string>& fallback) const;

    /// Throws InvalidConfig listing keys never read by a getter.
    void reject_unknown() const;

    const std::map<std::string, std::string>& entries() const { return values_; }
    std::string str() const;

private:
    const std::string* find(const std::string& key) const;

    std::string origin_;
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

/// Shortest round-trip formatting (%.17g) used by every text artifact.
std::string format_double(double v);

}  // namespace ltd
