#pragma once

#include <map>
#include <string>
#include <vector>

namespace bc {

// Minimal INI/TOML-style config: [section] headers, key = value pairs,
// # comments, double-quoted strings, comma-separated lists.
struct ConfigFile {
    std::map<std::string, std::string> values; // "section.key" (or bare "key")

    bool has(const std::string& key) const { return values.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::string> get_list(const std::string& key,
                                      const std::vector<std::string>& fallback) const;
};

ConfigFile parse_config(const std::string& text);
ConfigFile load_config(const std::string& path);

} // namespace bc
