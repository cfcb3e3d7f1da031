#pragma once

#include <array>
#include <vector>

#include "gc/assignment.hpp"
#include "gc/distance_transform.hpp"
#include "gc/image.hpp"
#include "gc/mesh.hpp"

namespace gc {

// Approximate Earth Mover's Distance: auction matching, then the mean
// matched distance. Differentiable in `a` with the assignment held fixed;
// matched distances carry a 1e-18 floor under the square root so gradients
// stay finite at zero separation. Always >= emd_exact(a, b).cost.
struct EmdResult {
    Assignment assignment;
    double value = 0;
};
EmdResult emd_approx(const PointCloud3& a, const PointCloud3& b);

// Same value for a frozen matching, and its gradient w.r.t. `a` (3N).
double emd_frozen(const PointCloud3& a, const PointCloud3& b, const std::vector<int>& perm);
std::vector<double> emd_grad(const PointCloud3& a, const PointCloud3& b,
                             const std::vector<int>& perm);

// Two-sided mean squared nearest-neighbor distance, exact (kd-tree).
double chamfer3(const PointCloud3& a, const PointCloud3& b);

// 2-d mask Chamfer over visible projections (pixel units):
//   mean over points of squared distance to the nearest foreground pixel
//   center (distance-transform lookup), plus mean over foreground pixels of
//   squared distance to the nearest point. Correspondences are frozen within
//   one evaluation; gradients flow through them.
struct Chamfer2Eval {
    double value = 0;
    double point_term = 0, pixel_term = 0;
    std::vector<std::array<double, 2>> point_site;  // per point: matched fg pixel center
    std::vector<int> pixel_point;                   // per fg pixel: matched point index
    std::vector<std::array<double, 2>> fg_center;   // fg pixel centers
};
Chamfer2Eval chamfer2_mask(const std::vector<std::array<double, 2>>& points, const Mask& mask,
                           const DistanceTransform* dt = nullptr);
double chamfer2_frozen(const std::vector<std::array<double, 2>>& points,
                       const Chamfer2Eval& frozen);
std::vector<double> chamfer2_grad(const std::vector<std::array<double, 2>>& points,
                                  const Chamfer2Eval& frozen);

// 1 - (2 |pred * gt| + s) / (|pred| + |gt| + s), smoothing s = 1.
double dice_loss(const std::vector<double>& pred, const Mask& gt);

}  // namespace gc
