#ifndef MEGSIS_CONFIG_HPP
#define MEGSIS_CONFIG_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "megsis/core.hpp"

namespace megsis {

/// Shortest exact decimal form of a double; survives a parse round trip bit
/// for bit.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Flat key-value configuration with dotted section names:
///   sampler = sis_resampling
///   sis.m = 2000
/// Full-line comments start with '#'. Insertion order is preserved on save so
/// manifests diff cleanly.
class Config {
  public:
    Config() = default;

    static Config parse(std::istream& in, const std::string& origin) {
        Config cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string trimmed = trim(line);
            if (trimmed.empty() || trimmed.front() == '#') continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
            const std::string key = trim(trimmed.substr(0, eq));
            const std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
            cfg.set(key, value);
        }
        return cfg;
    }

    static Config load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config file: " + path);
        return parse(in, path);
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write config file: " + path);
        out << to_string();
        if (!out) throw DataError("failed writing config file: " + path);
    }

    std::string to_string() const {
        std::ostringstream out;
        for (const auto& key : order_) out << key << " = " << values_.at(key) << "\n";
        return out.str();
    }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    void set(const std::string& key, const std::string& value) {
        if (!values_.count(key)) order_.push_back(key);
        values_[key] = value;
    }
    void set(const std::string& key, double value) { set(key, fmt_double(value)); }
    void set(const std::string& key, int value) { set(key, std::to_string(value)); }
    void set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }

    std::string get_str(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw ConfigError("missing config key: " + key);
        return it->second;
    }
    std::string get_str(const std::string& key, const std::string& fallback) const {
        return has(key) ? values_.at(key) : fallback;
    }

    double get_double(const std::string& key) const { return parse_double(key, get_str(key)); }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? parse_double(key, values_.at(key)) : fallback;
    }

    int get_int(const std::string& key) const { return parse_int(key, get_str(key)); }
    int get_int(const std::string& key, int fallback) const {
        return has(key) ? parse_int(key, values_.at(key)) : fallback;
    }

    std::uint64_t get_u64(const std::string& key) const {
        try {
            return std::stoull(get_str(key));
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": not an unsigned integer");
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string v = values_.at(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("config key " + key + ": expected a boolean");
    }

    /// Comma-separated doubles, e.g. "0,0,0.0225,0,0,0".
    std::vector<double> get_doubles(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(get_str(key));
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_double(key, trim(item)));
        return out;
    }

    std::vector<int> get_ints(const std::string& key) const {
        std::vector<int> out;
        std::stringstream ss(get_str(key));
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(parse_int(key, trim(item)));
        return out;
    }

    const std::vector<std::string>& keys() const { return order_; }

  private:
    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    static double parse_double(const std::string& key, const std::string& v) {
        char* end = nullptr;
        const double d = std::strtod(v.c_str(), &end);
        if (end == v.c_str() || *end != '\0')
            throw ConfigError("config key " + key + ": '" + v + "' is not a number");
        return d;
    }

    static int parse_int(const std::string& key, const std::string& v) {
        try {
            std::size_t pos = 0;
            const int i = std::stoi(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return i;
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": '" + v + "' is not an integer");
        }
    }

    std::map<std::string, std::string> values_;
    std::vector<std::string> order_;
};

}  // namespace megsis

#endif
