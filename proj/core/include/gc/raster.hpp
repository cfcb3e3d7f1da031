#pragma once

#include <cstdint>
#include <vector>

#include "gc/body.hpp"
#include "gc/camera.hpp"
#include "gc/tensor.hpp"

namespace gc {

constexpr double kOcclusionEps = 1e-3;  // depth slack against the body map, meters

// Per-pixel nearest body depth (camera z), +inf where uncovered. Triangles
// touching the near plane are skipped. Row-major H*W.
dvec body_depth_map(const PosedBody& body, const Camera& cam);

// Visibility-culled projection: a point survives when it is in front of the
// camera, its nearest pixel is inside the image, and it is not behind the
// body depth map at that pixel (depth < map + kOcclusionEps).
struct VisibleProjection {
    std::vector<int> index;                      // indices into the input cloud
    std::vector<std::array<double, 2>> uv;       // one per surviving point
    std::vector<double> depth;
};
VisibleProjection project_visible(const PointCloud3& points, const dvec& body_depth,
                                  const Camera& cam);

// Splatted descriptor image. channels is planar [p][H*W]; the buffer
// invariant is coverage=0 => zero channels and +inf depth at that pixel.
struct RasterBuffer {
    int width = 0, height = 0, dim = 0;
    dvec channels;                   // p * W * H
    std::vector<std::uint8_t> coverage;  // W * H
    dvec depth;                      // W * H
    std::vector<int> winner;         // W * H, point index or -1

    double channel(int c, int y, int x) const {
        return channels[(size_t(c) * height + y) * width + x];
    }
};

// One-pixel splats with min-depth z-buffering; depth ties keep the lowest
// point index. descriptors is [M, p] aligned with points.
RasterBuffer rasterize_descriptors(const PointCloud3& points, const Tensor& descriptors,
                                   const dvec& body_depth, const Camera& cam);

// Convenience: computes the depth map from the body first (pass nullptr for
// an unoccluded render).
RasterBuffer rasterize_descriptors(const PointCloud3& points, const Tensor& descriptors,
                                   const PosedBody* body, const Camera& cam);
VisibleProjection project_visible(const PointCloud3& points, const PosedBody* body,
                                  const Camera& cam);

}  // namespace gc
