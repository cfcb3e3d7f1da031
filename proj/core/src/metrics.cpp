#include "gc/metrics.hpp"

#include <cmath>

#include "gc/error.hpp"
#include "gc/kdtree.hpp"

namespace gc {
namespace {

constexpr double kSqrtFloor = 1e-18;  // under-sqrt floor for matched distances

inline double matched_dist(const double* a, const double* b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz + kSqrtFloor);
}

}  // namespace

EmdResult emd_approx(const PointCloud3& a, const PointCloud3& b) {
    EmdResult r;
    r.assignment = auction_assign(a, b);
    r.value = emd_frozen(a, b, r.assignment.perm);
    return r;
}

double emd_frozen(const PointCloud3& a, const PointCloud3& b, const std::vector<int>& perm) {
    if (a.count() != b.count() || int(perm.size()) != a.count())
        throw NumericError("emd_frozen: size mismatch");
    double sum = 0;
    for (int i = 0; i < a.count(); ++i) sum += matched_dist(a.p(i), b.p(perm[size_t(i)]));
    return sum / double(a.count());
}

std::vector<double> emd_grad(const PointCloud3& a, const PointCloud3& b,
                             const std::vector<int>& perm) {
    std::vector<double> g(a.xyz.size(), 0.0);
    const double inv_n = 1.0 / double(a.count());
    for (int i = 0; i < a.count(); ++i) {
        const double* pa = a.p(i);
        const double* pb = b.p(perm[size_t(i)]);
        const double d = matched_dist(pa, pb);
        for (int k = 0; k < 3; ++k) g[size_t(i) * 3 + k] = inv_n * (pa[k] - pb[k]) / d;
    }
    return g;
}

double chamfer3(const PointCloud3& a, const PointCloud3& b) {
    if (a.count() == 0 || b.count() == 0) throw NumericError("chamfer3: empty cloud");
    double sum_ab = 0, sum_ba = 0;
    {
        KdTree<3> tb(b.xyz.data(), b.count());
        for (int i = 0; i < a.count(); ++i) sum_ab += tb.nearest(a.p(i)).second;
    }
    {
        KdTree<3> ta(a.xyz.data(), a.count());
        for (int j = 0; j < b.count(); ++j) sum_ba += ta.nearest(b.p(j)).second;
    }
    return sum_ab / double(a.count()) + sum_ba / double(b.count());
}

Chamfer2Eval chamfer2_mask(const std::vector<std::array<double, 2>>& points, const Mask& mask,
                           const DistanceTransform* dt_in) {
    if (points.empty())
        throw NumericError("chamfer2_mask: no visible points (degenerate fit state)");
    DistanceTransform local;
    const DistanceTransform* dt = dt_in;
    if (!dt) {
        local = distance_transform(mask);
        dt = &local;
    }

    Chamfer2Eval ev;
    ev.fg_center.reserve(size_t(mask.foreground_count()));
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(y, x)) ev.fg_center.push_back({double(x), double(y)});
    if (ev.fg_center.empty())
        throw NumericError("chamfer2_mask: empty mask (degenerate fit state)");

    // point -> nearest fg pixel via the label map of the containing pixel
    ev.point_site.resize(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        const int px = std::min(mask.width - 1, std::max(0, int(std::lround(points[i][0]))));
        const int py = std::min(mask.height - 1, std::max(0, int(std::lround(points[i][1]))));
        const int s = dt->site_at(py, px);
        if (s < 0) throw NumericError("chamfer2_mask: distance transform has no sites");
        ev.point_site[i] = {double(s % mask.width), double(s / mask.width)};
    }

    // fg pixel -> nearest point (kd-tree over the points, built per call)
    ev.pixel_point.resize(ev.fg_center.size());
    {
        std::vector<double> flat(points.size() * 2);
        for (size_t i = 0; i < points.size(); ++i) {
            flat[i * 2] = points[i][0];
            flat[i * 2 + 1] = points[i][1];
        }
        KdTree<2> tree(flat.data(), int(points.size()));
        for (size_t q = 0; q < ev.fg_center.size(); ++q)
            ev.pixel_point[q] = tree.nearest(ev.fg_center[q].data()).first;
    }

    ev.value = chamfer2_frozen(points, ev);
    return ev;
}

double chamfer2_frozen(const std::vector<std::array<double, 2>>& points,
                       const Chamfer2Eval& ev) {
    double pt = 0;
    for (size_t i = 0; i < points.size(); ++i) {
        const double dx = points[i][0] - ev.point_site[i][0];
        const double dy = points[i][1] - ev.point_site[i][1];
        pt += dx * dx + dy * dy;
    }
    pt /= double(points.size());
    double px = 0;
    for (size_t q = 0; q < ev.fg_center.size(); ++q) {
        const auto& p = points[size_t(ev.pixel_point[q])];
        const double dx = p[0] - ev.fg_center[q][0];
        const double dy = p[1] - ev.fg_center[q][1];
        px += dx * dx + dy * dy;
    }
    px /= double(ev.fg_center.size());
    return pt + px;
}

std::vector<double> chamfer2_grad(const std::vector<std::array<double, 2>>& points,
                                  const Chamfer2Eval& ev) {
    std::vector<double> g(points.size() * 2, 0.0);
    const double wp = 2.0 / double(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        g[i * 2 + 0] += wp * (points[i][0] - ev.point_site[i][0]);
        g[i * 2 + 1] += wp * (points[i][1] - ev.point_site[i][1]);
    }
    const double wq = 2.0 / double(ev.fg_center.size());
    for (size_t q = 0; q < ev.fg_center.size(); ++q) {
        const size_t i = size_t(ev.pixel_point[q]);
        g[i * 2 + 0] += wq * (points[i][0] - ev.fg_center[q][0]);
        g[i * 2 + 1] += wq * (points[i][1] - ev.fg_center[q][1]);
    }
    return g;
}

double dice_loss(const std::vector<double>& pred, const Mask& gt) {
    if (pred.size() != gt.on.size()) throw NumericError("dice_loss: shape mismatch");
    const double s = 1.0;
    double inter = 0, psum = 0, gsum = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const double g = gt.on[i] ? 1.0 : 0.0;
        inter += pred[i] * g;
        psum += pred[i];
        gsum += g;
    }
    return 1.0 - (2.0 * inter + s) / (psum + gsum + s);
}

}  // namespace gc
