#include "gc/config.hpp"

#include <cstdlib>
#include <fstream>

#include "gc/error.hpp"

namespace gc {

const std::vector<Config::KeyInfo>& Config::registry() {
    static const std::vector<KeyInfo> keys = {
        {"data.seed", "0", "dataset generation seed"},
        {"data.outfits", "16", "number of procedural outfits"},
        {"data.frames", "200", "raw frames per outfit before striding"},
        {"data.stride", "10", "keep every data.stride-th frame"},
        {"train.steps", "2000", "Adam steps"},
        {"train.batch", "4", "(outfit, frame) pairs per step"},
        {"train.lr_code", "0.01", "learning rate for outfit codes"},
        {"train.lr_net", "0.001", "learning rate for draping parameters"},
        {"train.seed", "0", "training seed (init, batching, seeds)"},
        {"train.log_every", "50", "steps between loss log lines"},
        {"train.checkpoint_every", "0", "epochs between checkpoints (0 = final only)"},
        {"fit.T", "4", "code-fitting hypothesis count"},
        {"fit.warmup", "100", "steps per hypothesis before averaging"},
        {"fit.refine_min", "50", "minimum refinement steps"},
        {"fit.refine_max", "400", "maximum refinement steps"},
        {"fit.tol", "1e-4", "relative loss change declaring convergence"},
        {"fit.window", "20", "steps over which fit.tol is measured"},
        {"fit.lr", "0.01", "learning rate for the code during fitting"},
        {"fit.seed", "0", "fitting seed (hypothesis initialization)"},
        {"render.width", "128", "image width in pixels"},
        {"render.height", "128", "image height in pixels"},
        {"render.descriptors", "8", "appearance descriptor channels"},
        {"appearance.steps", "2000", "appearance optimization steps"},
        {"appearance.lr", "0.01", "appearance learning rate"},
        {"appearance.seed", "0", "appearance seed"},
        {"jobs", "0", "worker cap for parallel sections (0 = hardware)"},
    };
    return keys;
}

Config::Config() {
    for (const auto& k : registry()) values_[k.key] = k.def;
}

void Config::set(const std::string& key, const std::string& value) {
    if (values_.find(key) == values_.end())
        throw ParseError("unknown configuration key '" + key + "'");
    values_[key] = value;
}

void Config::load_line(const std::string& raw, const std::string& where) {
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) return;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(where + ": expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw ParseError(where + ": empty key or value");
    if (values_.find(key) == values_.end())
        throw ParseError(where + ": unknown configuration key '" + key + "'");
    values_[key] = value;
}

void Config::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        load_line(line, path + ":" + std::to_string(lineno));
    }
}

std::string Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ParseError("unknown configuration key '" + key + "'");
    return it->second;
}

long long Config::get_int(const std::string& key) const {
    const std::string v = get(key);
    char* end = nullptr;
    const long long r = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end) throw ParseError("key " + key + ": '" + v + "' is not an integer");
    return r;
}

double Config::get_double(const std::string& key) const {
    const std::string v = get(key);
    char* end = nullptr;
    const double r = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end) throw ParseError("key " + key + ": '" + v + "' is not a number");
    return r;
}

std::uint64_t Config::get_seed(const std::string& key) const {
    const std::string v = get(key);
    char* end = nullptr;
    const unsigned long long r = std::strtoull(v.c_str(), &end, 10);
    if (end == v.c_str() || *end) throw ParseError("key " + key + ": '" + v + "' is not a seed");
    return r;
}

}  // namespace gc
