#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gc/draping.hpp"
#include "gc/renderer.hpp"
#include "gc/tensor.hpp"

namespace gc {

// Single-file model container: magic + version, integer architecture
// metadata, then named float64 blocks in declaration order. Appearance
// capture appends its descriptor and renderer blocks to the same file.
struct Checkpoint {
    std::map<std::string, long long> meta;
    std::vector<std::pair<std::string, dvec>> blocks;  // ordered

    void add_block(const std::string& name, const Tensor& t) {
        blocks.emplace_back(name, t.data);
    }
    const dvec* find(const std::string& name) const {
        for (const auto& [n, d] : blocks)
            if (n == name) return &d;
        return nullptr;
    }

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

Checkpoint checkpoint_from_model(const DrapingModel& model);
DrapingModel model_from_checkpoint(const Checkpoint& ck);

// Appearance blocks: descriptor matrix plus renderer head parameters.
void checkpoint_add_appearance(Checkpoint& ck, const Tensor& descriptors,
                               const RendererHead& head);
bool checkpoint_has_appearance(const Checkpoint& ck);
std::pair<Tensor, RendererHead> appearance_from_checkpoint(const Checkpoint& ck);

// Outfit code table: one line per code, "outfit_id v0 v1 ... v7".
void save_codes(const std::string& path, const std::vector<Tensor>& codes);
std::vector<Tensor> load_codes(const std::string& path, int expected_dim);

}  // namespace gc
