#include "rcdgcn/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>

#include "rcdgcn/error.hpp"

namespace rcdgcn {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

RunConfig RunConfig::load(const std::string& path, const std::set<std::string>& known_keys) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path + "'");
    }
    RunConfig cfg;
    cfg.base_dir_ = std::filesystem::absolute(std::filesystem::path(path)).parent_path().string();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        }
        if (known_keys.find(key) == known_keys.end()) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key +
                              "'");
        }
        if (!cfg.values_.emplace(key, value).second) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                              "'");
        }
    }
    return cfg;
}

RunConfig RunConfig::from_values(std::map<std::string, std::string> values) {
    RunConfig cfg;
    cfg.values_ = std::move(values);
    cfg.base_dir_ = std::filesystem::current_path().string();
    return cfg;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string RunConfig::str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        throw ConfigError("config is missing required key '" + key + "'");
    }
    return it->second;
}

std::string RunConfig::str_or(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double RunConfig::num_or(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument(it->second);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' has non-numeric value '" + it->second + "'");
    }
}

std::uint64_t RunConfig::u64_or(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t v = 0;
    const auto& s = it->second;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError("key '" + key + "' has non-integer value '" + s + "'");
    }
    return v;
}

bool RunConfig::flag_or(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("key '" + key + "' must be true/false, got '" + it->second + "'");
}

std::string RunConfig::path(const std::string& key) const {
    const std::string v = str(key);
    std::filesystem::path p(v);
    if (p.is_absolute()) return p.string();
    return (std::filesystem::path(base_dir_) / p).lexically_normal().string();
}

std::string RunConfig::path_or(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    return path(key);
}

void RunConfig::set(const std::string& key, const std::string& value) {
    values_[key] = value;
}

}  // namespace rcdgcn
