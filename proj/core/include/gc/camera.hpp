#pragma once

#include <array>
#include <string>
#include <vector>

#include "gc/mesh.hpp"

namespace gc {

// Pinhole camera. rotation/translation map world to camera space
// (q = R x + t); u = fx qx/qz + cx, v = fy qy/qz + cy. Integer pixel
// coordinates address pixel centers, so (u, v) = (3.0, 7.0) is the center
// of pixel column 3, row 7.
struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
    std::array<double, 3> translation{0, 0, 0};
    int width = 0, height = 0;

    void validate() const;  // orthonormal rotation (1e-9), positive focals
    std::array<double, 3> to_camera(const double* p) const;
};

struct ProjectedPoint {
    double u = 0, v = 0;
    double depth = 0;     // camera-space z
    bool behind = false;  // qz <= 0
};

std::vector<ProjectedPoint> project_points(const PointCloud3& points, const Camera& cam);

// Camera at eye looking toward target (world up +y), vertical FOV in radians.
Camera look_at(const std::array<double, 3>& eye, const std::array<double, 3>& target,
               double fov_y, int width, int height);

// Text file format documented in FORMATS.md.
void save_camera(const Camera& cam, const std::string& path);
Camera load_camera(const std::string& path);

}  // namespace gc
