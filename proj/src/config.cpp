#include "bc/config.hpp"

#include "bc/errors.hpp"

#include <fstream>
#include <sstream>

namespace bc {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string strip_quotes(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

// Removes a trailing # comment, respecting double quotes.
std::string strip_comment(const std::string& line) {
    bool in_quote = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '"') in_quote = !in_quote;
        if (c == '#' && !in_quote) return line.substr(0, i);
    }
    return line;
}

} // namespace

std::string ConfigFile::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    return it == values.end() ? fallback : strip_quotes(it->second);
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
        std::size_t used = 0;
        double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(it->second);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected a number, got \"" + it->second + "\"");
    }
}

int ConfigFile::get_int(const std::string& key, int fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    try {
        std::size_t used = 0;
        int v = std::stoi(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(it->second);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected an integer, got \"" + it->second +
                          "\"");
    }
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config key " + key + ": expected true/false, got \"" + it->second + "\"");
}

std::vector<std::string> ConfigFile::get_list(const std::string& key,
                                              const std::vector<std::string>& fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    std::vector<std::string> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = strip_quotes(trim(item));
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

ConfigFile parse_config(const std::string& text) {
    ConfigFile cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError("config line " + std::to_string(line_no) +
                                 ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ParseError("config line " + std::to_string(line_no) + ": empty section name");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ParseError("config line " + std::to_string(line_no) + ": empty key");
        cfg.values[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

ConfigFile load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

} // namespace bc
