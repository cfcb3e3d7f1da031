#include "gc/raster.hpp"

#include <cmath>
#include <limits>

#include "gc/error.hpp"

namespace gc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNearPlane = 1e-6;

}  // namespace

dvec body_depth_map(const PosedBody& body, const Camera& cam) {
    cam.validate();
    dvec depth(size_t(cam.width) * cam.height, kInf);
    const TriMesh& mesh = body.mesh;

    std::vector<ProjectedPoint> proj;
    {
        PointCloud3 verts;
        verts.xyz = mesh.verts;
        proj = project_points(verts, cam);
    }

    for (const auto& f : mesh.faces) {
        const ProjectedPoint& a = proj[size_t(f[0])];
        const ProjectedPoint& b = proj[size_t(f[1])];
        const ProjectedPoint& c = proj[size_t(f[2])];
        if (a.behind || b.behind || c.behind) continue;
        if (a.depth < kNearPlane || b.depth < kNearPlane || c.depth < kNearPlane) continue;

        const double area = (b.u - a.u) * (c.v - a.v) - (b.v - a.v) * (c.u - a.u);
        if (area == 0) continue;
        const double inv_area = 1.0 / area;

        int x0 = int(std::ceil(std::min({a.u, b.u, c.u})));
        int x1 = int(std::floor(std::max({a.u, b.u, c.u})));
        int y0 = int(std::ceil(std::min({a.v, b.v, c.v})));
        int y1 = int(std::floor(std::max({a.v, b.v, c.v})));
        x0 = std::max(x0, 0);
        y0 = std::max(y0, 0);
        x1 = std::min(x1, cam.width - 1);
        y1 = std::min(y1, cam.height - 1);

        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                // barycentrics from edge functions, sign-normalized by the area
                const double w0 = ((b.u - x) * (c.v - y) - (b.v - y) * (c.u - x)) * inv_area;
                const double w1 = ((c.u - x) * (a.v - y) - (c.v - y) * (a.u - x)) * inv_area;
                const double w2 = 1.0 - w0 - w1;
                if (w0 < 0 || w1 < 0 || w2 < 0) continue;
                // perspective-correct: 1/z interpolates linearly in screen space
                const double inv_z = w0 / a.depth + w1 / b.depth + w2 / c.depth;
                const double z = 1.0 / inv_z;
                double& d = depth[size_t(y) * cam.width + x];
                if (z < d) d = z;
            }
    }
    return depth;
}

VisibleProjection project_visible(const PointCloud3& points, const dvec& body_depth,
                                  const Camera& cam) {
    cam.validate();
    if (!body_depth.empty() && body_depth.size() != size_t(cam.width) * cam.height)
        throw NumericError("project_visible: depth map size mismatch");
    const auto proj = project_points(points, cam);
    VisibleProjection out;
    for (int i = 0; i < points.count(); ++i) {
        const ProjectedPoint& p = proj[size_t(i)];
        if (p.behind) continue;
        const long px = std::lround(p.u), py = std::lround(p.v);
        if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) continue;
        if (!body_depth.empty() &&
            p.depth >= body_depth[size_t(py) * cam.width + px] + kOcclusionEps)
            continue;
        out.index.push_back(i);
        out.uv.push_back({p.u, p.v});
        out.depth.push_back(p.depth);
    }
    return out;
}

VisibleProjection project_visible(const PointCloud3& points, const PosedBody* body,
                                  const Camera& cam) {
    dvec depth;
    if (body) depth = body_depth_map(*body, cam);
    return project_visible(points, depth, cam);
}

RasterBuffer rasterize_descriptors(const PointCloud3& points, const Tensor& descriptors,
                                   const dvec& body_depth, const Camera& cam) {
    cam.validate();
    if (descriptors.rank() != 2 || descriptors.rows() != points.count())
        throw NumericError("rasterize_descriptors: descriptor rows must match point count");
    const int p = descriptors.cols();
    RasterBuffer buf;
    buf.width = cam.width;
    buf.height = cam.height;
    buf.dim = p;
    const size_t hw = size_t(cam.width) * cam.height;
    buf.channels.assign(size_t(p) * hw, 0.0);
    buf.coverage.assign(hw, 0);
    buf.depth.assign(hw, kInf);
    buf.winner.assign(hw, -1);

    const VisibleProjection vis = project_visible(points, body_depth, cam);
    for (size_t k = 0; k < vis.index.size(); ++k) {
        const long px = std::lround(vis.uv[k][0]);
        const long py = std::lround(vis.uv[k][1]);
        const size_t at = size_t(py) * cam.width + size_t(px);
        const double z = vis.depth[k];
        // strict <: equal depths keep the earlier (lower) point index
        if (z < buf.depth[at]) {
            buf.depth[at] = z;
            buf.winner[at] = vis.index[k];
            buf.coverage[at] = 1;
        }
    }
    for (size_t at = 0; at < hw; ++at) {
        const int w = buf.winner[at];
        if (w < 0) continue;
        for (int c = 0; c < p; ++c) buf.channels[size_t(c) * hw + at] = descriptors.at(w, c);
    }
    return buf;
}

RasterBuffer rasterize_descriptors(const PointCloud3& points, const Tensor& descriptors,
                                   const PosedBody* body, const Camera& cam) {
    dvec depth;
    if (body) depth = body_depth_map(*body, cam);
    return rasterize_descriptors(points, descriptors, depth, cam);
}

}  // namespace gc
