#include "gc/camera.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "gc/error.hpp"

namespace gc {

void Camera::validate() const {
    if (fx <= 0 || fy <= 0) throw NumericError("camera: fx, fy must be > 0");
    if (width <= 0 || height <= 0) throw NumericError("camera: bad image size");
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0;
            for (int k = 0; k < 3; ++k) dot += rotation[size_t(i) * 3 + k] * rotation[size_t(j) * 3 + k];
            const double want = i == j ? 1.0 : 0.0;
            if (std::fabs(dot - want) > 1e-9)
                throw NumericError("camera: rotation is not orthonormal");
        }
}

std::array<double, 3> Camera::to_camera(const double* p) const {
    std::array<double, 3> q;
    for (int i = 0; i < 3; ++i)
        q[size_t(i)] = rotation[size_t(i) * 3] * p[0] + rotation[size_t(i) * 3 + 1] * p[1] +
                       rotation[size_t(i) * 3 + 2] * p[2] + translation[size_t(i)];
    return q;
}

std::vector<ProjectedPoint> project_points(const PointCloud3& points, const Camera& cam) {
    cam.validate();
    std::vector<ProjectedPoint> out(size_t(points.count()));
    for (int i = 0; i < points.count(); ++i) {
        const auto q = cam.to_camera(points.p(i));
        ProjectedPoint& r = out[size_t(i)];
        r.depth = q[2];
        if (q[2] <= 0) {
            r.behind = true;
            continue;
        }
        r.u = cam.fx * q[0] / q[2] + cam.cx;
        r.v = cam.fy * q[1] / q[2] + cam.cy;
    }
    return out;
}

Camera look_at(const std::array<double, 3>& eye, const std::array<double, 3>& target,
               double fov_y, int width, int height) {
    // camera forward = +z (points in front have qz > 0)
    double fwd[3] = {target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]};
    const double fn = std::sqrt(fwd[0] * fwd[0] + fwd[1] * fwd[1] + fwd[2] * fwd[2]);
    if (fn < 1e-12) throw NumericError("look_at: eye and target coincide");
    for (double& v : fwd) v /= fn;
    const double up[3] = {0, 1, 0};
    double right[3] = {fwd[1] * up[2] - fwd[2] * up[1], fwd[2] * up[0] - fwd[0] * up[2],
                       fwd[0] * up[1] - fwd[1] * up[0]};
    double rn = std::sqrt(right[0] * right[0] + right[1] * right[1] + right[2] * right[2]);
    if (rn < 1e-9) {  // looking straight up/down
        right[0] = 1;
        right[1] = 0;
        right[2] = 0;
        rn = 1;
    }
    for (double& v : right) v /= rn;
    // image v grows downward: down = fwd x right
    const double down[3] = {fwd[1] * right[2] - fwd[2] * right[1],
                            fwd[2] * right[0] - fwd[0] * right[2],
                            fwd[0] * right[1] - fwd[1] * right[0]};
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fy = 0.5 * height / std::tan(0.5 * fov_y);
    cam.fx = cam.fy;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    for (int k = 0; k < 3; ++k) {
        cam.rotation[size_t(k)] = right[k];
        cam.rotation[size_t(3 + k)] = down[k];
        cam.rotation[size_t(6 + k)] = fwd[k];
    }
    for (int i = 0; i < 3; ++i) {
        cam.translation[size_t(i)] = 0;
        for (int k = 0; k < 3; ++k)
            cam.translation[size_t(i)] -= cam.rotation[size_t(i) * 3 + k] * eye[size_t(k)];
    }
    cam.validate();
    return cam;
}

void save_camera(const Camera& cam, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError(path + ": cannot open for writing");
    char buf[512];
    std::snprintf(buf, sizeof buf, "gccam 1\nsize %d %d\nintrinsics %.17g %.17g %.17g %.17g\n",
                  cam.width, cam.height, cam.fx, cam.fy, cam.cx, cam.cy);
    out << buf;
    out << "rotation";
    for (double v : cam.rotation) {
        std::snprintf(buf, sizeof buf, " %.17g", v);
        out << buf;
    }
    out << "\ntranslation";
    for (double v : cam.translation) {
        std::snprintf(buf, sizeof buf, " %.17g", v);
        out << buf;
    }
    out << "\n";
    if (!out) throw ParseError(path + ": write failed");
}

Camera load_camera(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::string tok;
    int version = 0;
    in >> tok >> version;
    if (tok != "gccam" || version != 1) throw ParseError(path + ": not a gccam v1 file");
    Camera cam;
    in >> tok >> cam.width >> cam.height;
    if (tok != "size") throw ParseError(path + ": expected size");
    in >> tok >> cam.fx >> cam.fy >> cam.cx >> cam.cy;
    if (tok != "intrinsics") throw ParseError(path + ": expected intrinsics");
    in >> tok;
    if (tok != "rotation") throw ParseError(path + ": expected rotation");
    for (double& v : cam.rotation) in >> v;
    in >> tok;
    if (tok != "translation") throw ParseError(path + ": expected translation");
    for (double& v : cam.translation) in >> v;
    if (!in) throw ParseError(path + ": truncated");
    cam.validate();
    return cam;
}

}  // namespace gc
