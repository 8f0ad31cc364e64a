#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

namespace rcdgcn {

/**
 * Flat `section.key = value` run configuration. Lines starting with '#' and
 * blank lines are ignored; keys must come from the registry passed at load
 * time (unknown keys are rejected so typos fail loudly). Relative paths
 * resolve against the directory of the config file.
 */
class RunConfig {
public:
    static RunConfig load(const std::string& path, const std::set<std::string>& known_keys);

    /// In-memory config (tests, flag-only runs); resolves paths against cwd.
    static RunConfig from_values(std::map<std::string, std::string> values);

    bool has(const std::string& key) const;

    std::string str(const std::string& key) const;  // throws ConfigError when missing
    std::string str_or(const std::string& key, const std::string& fallback) const;
    double num_or(const std::string& key, double fallback) const;
    std::uint64_t u64_or(const std::string& key, std::uint64_t fallback) const;
    bool flag_or(const std::string& key, bool fallback) const;

    /// Path value resolved relative to the config file location.
    std::string path(const std::string& key) const;
    std::string path_or(const std::string& key, const std::string& fallback) const;

    /// Flag override (e.g. --seed, --out) replacing the file value.
    void set(const std::string& key, const std::string& value);

    const std::string& base_dir() const { return base_dir_; }

private:
    std::map<std::string, std::string> values_;
    std::string base_dir_;
};

}  // namespace rcdgcn
