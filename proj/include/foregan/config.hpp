#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "foregan/errors.hpp"

namespace foregan {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace detail

// Plain-text key=value configuration; '#' starts a comment, blank lines are
// skipped. Keys outside `allowed` are rejected.
inline std::map<std::string, std::string> parse_config_file(const std::string& path,
                                                            const std::set<std::string>& allowed) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::map<std::string, std::string> values;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(path + ":" + std::to_string(lineno) + ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty())
            throw FormatError(path + ":" + std::to_string(lineno) + ": empty key");
        if (!allowed.contains(key))
            throw FormatError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
        values[key] = value;
    }
    return values;
}

inline int config_int(const std::map<std::string, std::string>& cfg, const std::string& key,
                      int fallback) {
    const auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        return std::stoi(it->second);
    } catch (const std::logic_error&) {
        throw FormatError("config: key '" + key + "' is not an integer: " + it->second);
    }
}

inline float config_float(const std::map<std::string, std::string>& cfg, const std::string& key,
                          float fallback) {
    const auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        return std::stof(it->second);
    } catch (const std::logic_error&) {
        throw FormatError("config: key '" + key + "' is not a number: " + it->second);
    }
}

inline std::uint64_t config_u64(const std::map<std::string, std::string>& cfg,
                                const std::string& key, std::uint64_t fallback) {
    const auto it = cfg.find(key);
    if (it == cfg.end()) return fallback;
    try {
        return std::stoull(it->second);
    } catch (const std::logic_error&) {
        throw FormatError("config: key '" + key + "' is not an unsigned integer: " + it->second);
    }
}

inline std::string config_str(const std::map<std::string, std::string>& cfg,
                              const std::string& key, const std::string& fallback) {
    const auto it = cfg.find(key);
    return it == cfg.end() ? fallback : it->second;
}

} // namespace foregan
