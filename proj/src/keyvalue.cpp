#include "ltdlab/keyvalue.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ltdlab/error.hpp"

namespace ltd {

namespace {

std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_commas(std::string_view s) {
    std::vector<std::string_view> parts;
    while (true) {
        auto pos = s.find(',');
        auto item = trim(s.substr(0, pos));
        if (!item.empty()) parts.push_back(item);
        if (pos == std::string_view::npos) break;
        s.remove_prefix(pos + 1);
    }
    return parts;
}

template <typename T>
T parse_number(std::string_view text, const std::string& key) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw InvalidConfig(key + ": cannot parse '" + std::string(text) + "'");
    }
    return value;
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, std::string_view origin) {
    KeyValues kv;
    kv.origin_ = origin;
    std::size_t line_no = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidConfig(std::string(origin) + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        std::string key(trim(line.substr(0, eq)));
        if (key.empty()) throw InvalidConfig(std::string(origin) + ":" + std::to_string(line_no) + ": empty key");
        if (kv.values_.count(key)) {
            throw InvalidConfig(std::string(origin) + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        kv.values_[key] = std::string(trim(line.substr(eq + 1)));
    }
    return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse(ss.str(), path.string());
}

const std::string* KeyValues::find(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
    auto v = find(key);
    return v ? *v : fallback;
}

std::size_t KeyValues::get_size(const std::string& key, std::size_t fallback) const {
    auto v = find(key);
    return v ? parse_number<std::size_t>(*v, key) : fallback;
}

std::uint64_t KeyValues::get_u64(const std::string& key, std::uint64_t fallback) const {
    auto v = find(key);
    return v ? parse_number<std::uint64_t>(*v, key) : fallback;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
    auto v = find(key);
    return v ? parse_number<double>(*v, key) : fallback;
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw InvalidConfig(key + ": expected true or false, got '" + *v + "'");
}

std::vector<std::size_t> KeyValues::get_size_list(const std::string& key,
                                                  const std::vector<std::size_t>& fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    std::vector<std::size_t> out;
    for (auto item : split_commas(*v)) out.push_back(parse_number<std::size_t>(item, key));
    return out;
}

std::vector<std::string> KeyValues::get_string_list(const std::string& key,
                                                    const std::vector<std::string>& fallback) const {
    auto v = find(key);
    if (!v) return fallback;
    std::vector<std::string> out;
    for (auto item : split_commas(*v)) out.emplace_back(item);
    return out;
}

void KeyValues::reject_unknown() const {
    std::string unknown;
    for (const auto& [key, _] : values_) {
        if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    }
    if (!unknown.empty()) throw InvalidConfig(origin_ + ": unknown key(s): " + unknown);
}

std::string KeyValues::str() const {
    std::string out;
    for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
    return out;
}

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace ltd
