#pragma once

#include <vector>

#include "gc/image.hpp"

namespace gc {

// Exact squared Euclidean distance transform of a binary mask with nearest
// foreground-site labels (Felzenszwalb-Huttenlocher, two 1-d passes).
// Coordinates are pixel centers; distances are exact integers in doubles.
struct DistanceTransform {
    int width = 0, height = 0;
    std::vector<double> dist2;  // W*H; 0 on foreground, +inf when mask empty
    std::vector<int> site;      // W*H; linear index y*W+x of nearest fg pixel, -1 if none

    double at(int y, int x) const { return dist2[size_t(y) * width + x]; }
    int site_at(int y, int x) const { return site[size_t(y) * width + x]; }
};

DistanceTransform distance_transform(const Mask& mask);

}  // namespace gc
