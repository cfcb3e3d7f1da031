#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gc {

// Flat key=value configuration with dotted sections. Every key is declared
// in the registry with a default and a help line; parsing rejects unknown
// keys so that typos fail loudly instead of silently using a default.
class Config {
public:
    struct KeyInfo {
        std::string key;
        std::string def;
        std::string help;
    };

    Config();  // all defaults

    // Parses `key = value` lines ('#' comments, blank lines allowed) and
    // overlays them. Throws ParseError with the offending line number.
    void load_file(const std::string& path);
    void load_line(const std::string& line, const std::string& where);
    void set(const std::string& key, const std::string& value);

    std::string get(const std::string& key) const;
    long long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::uint64_t get_seed(const std::string& key) const;

    static const std::vector<KeyInfo>& registry();

private:
    std::map<std::string, std::string> values_;
};

}  // namespace gc
