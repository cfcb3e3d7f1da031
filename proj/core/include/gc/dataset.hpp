#pragma once

#include <string>
#include <vector>

#include "gc/body.hpp"
#include "gc/garment.hpp"
#include "gc/mesh.hpp"

namespace gc {

constexpr int kGarmentPoints = 8192;  // fixed garment cloud size

// Procedural training corpus: per outfit, a garment style fixed across a
// pose/shape sequence, and per kept frame the posed parameters plus the
// target cloud sampled from the synthesized garment.
struct TrainingSet {
    struct Frame {
        int frame_id = 0;  // index in the raw sequence (pre-stride)
        PoseShapeParams pose;
        PointCloud3 target;  // exactly kGarmentPoints
    };
    struct Outfit {
        int id = 0;
        GarmentStyle style;
        std::vector<Frame> frames;
    };
    std::vector<Outfit> outfits;
    int stride = 10;

    int total_frames() const {
        int n = 0;
        for (const auto& o : outfits) n += int(o.frames.size());
        return n;
    }
};

struct DatasetConfig {
    int outfits = 16;
    int frames = 200;  // raw sequence length per outfit
    int stride = 10;   // keep every stride-th frame
    std::uint64_t seed = 0;
    std::vector<GarmentStyle> styles;  // optional; random mix when empty
};

GarmentStyle random_style(Rng& rng, int index);

TrainingSet make_dataset(const BodyTemplate& tmpl, const DatasetConfig& config);

// One binary PLY per frame plus a tab-separated manifest and a style table;
// layout documented in FORMATS.md. Returns the manifest path.
std::string save_dataset(const TrainingSet& set, const std::string& dir);
TrainingSet load_dataset(const std::string& manifest_path);

}  // namespace gc
