#pragma once

#include <array>
#include <string>
#include <vector>

namespace gc {

// In-memory form of the PLY files this project reads and writes:
//   element vertex N: property float x, y, z; optional property int group
//   element face M:   property list uchar int vertex_indices (optional)
// Coordinates are stored as float32 in the file (and here), meters.
struct PlyData {
    std::vector<float> xyz;                    // 3N, row-major
    std::vector<int> groups;                   // empty or N
    std::vector<std::array<int, 3>> faces;     // empty for point clouds
    bool has_faces = false;
    bool has_groups = false;

    int vertex_count() const { return int(xyz.size() / 3); }
};

// Throws ParseError with a line number (header) or byte offset (payload).
PlyData load_ply(const std::string& path);

// binary_little_endian when binary, ascii otherwise; byte-deterministic.
void save_ply(const std::string& path, const PlyData& data, bool binary = true);

}  // namespace gc
