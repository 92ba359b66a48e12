#pragma once

// Flat key=value configuration files. One entry per line, '#' starts a
// comment line, surrounding whitespace is ignored. Keys under the
// "result." and "artifact." prefixes are informational (manifests carry
// them) and never reach the commands.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rcl/error.hpp"

namespace rcl {

class Config {
public:
    static Config parse(std::string_view text, const std::string& source = "<config>") {
        Config c;
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto nl = text.find('\n', pos);
            std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
            pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
            ++line_no;
            line = trim(line);
            if (line.empty() || line.front() == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError(source + ":" + std::to_string(line_no) + ": expected key=value");
            }
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            if (key.empty()) throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
            if (is_informational(key)) continue;
            if (!c.values_.emplace(key, value).second) {
                throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
            }
        }
        return c;
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream is(path, std::ios::binary);
        if (!is) throw ConfigError("cannot open config '" + path.string() + "'");
        std::stringstream ss;
        ss << is.rdbuf();
        Config c = parse(ss.str(), path.string());
        c.base_dir_ = path.parent_path();
        return c;
    }

    /// Directory relative paths in the config are resolved against.
    const std::filesystem::path& base_dir() const { return base_dir_; }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }

    /// Fails on the first key outside `allowed`, naming it.
    void require_known(const std::set<std::string>& allowed) const {
        for (const auto& [k, v] : values_) {
            if (!allowed.count(k)) throw ConfigError("unknown config key '" + k + "'");
        }
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require_string(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : to_double(key, it->second);
    }

    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : to_uint(key, it->second);
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw ConfigError("config key '" + key + "' needs true or false, got '" + it->second + "'");
    }

    std::vector<std::uint64_t> get_uint_list(const std::string& key, std::vector<std::uint64_t> fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<std::uint64_t> out;
        for (auto part : split_list(it->second)) out.push_back(to_uint(key, std::string(part)));
        if (out.empty()) throw ConfigError("config key '" + key + "' needs at least one value");
        return out;
    }

    std::vector<std::string> get_string_list(const std::string& key, std::vector<std::string> fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<std::string> out;
        for (auto part : split_list(it->second)) out.emplace_back(part);
        if (out.empty()) throw ConfigError("config key '" + key + "' needs at least one value");
        return out;
    }

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    static bool is_informational(std::string_view key) {
        return key.starts_with("result.") || key.starts_with("artifact.");
    }

    static std::string_view trim(std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
        return s;
    }

    static std::vector<std::string_view> split_list(std::string_view s) {
        std::vector<std::string_view> parts;
        std::size_t start = 0;
        while (start <= s.size()) {
            auto comma = s.find(',', start);
            auto part = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (!part.empty()) parts.push_back(part);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        return parts;
    }

    static double to_double(const std::string& key, const std::string& v) {
        double out = 0.0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || ptr != v.data() + v.size()) {
            throw ConfigError("config key '" + key + "' needs a number, got '" + v + "'");
        }
        return out;
    }

    static std::uint64_t to_uint(const std::string& key, const std::string& v) {
        std::uint64_t out = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc{} || ptr != v.data() + v.size()) {
            throw ConfigError("config key '" + key + "' needs a non-negative integer, got '" + v + "'");
        }
        return out;
    }

    std::map<std::string, std::string> values_;
    std::filesystem::path base_dir_;
};

}  // namespace rcl
