#pragma once

#include <functional>
#include <vector>

#include "gc/body.hpp"
#include "gc/camera.hpp"
#include "gc/draping.hpp"
#include "gc/image.hpp"
#include "gc/renderer.hpp"

namespace gc {

struct AppearanceFrame {
    Image rgb;
    Mask mask;
    Camera cam;
    PoseShapeParams pose;
};

struct AppearanceConfig {
    int steps = 2000;
    double lr = 1e-2;
    int descriptor_dim = 8;
    std::uint64_t seed = 0;
    int log_every = 100;
    std::function<void(int, double)> on_log;
};

struct AppearanceResult {
    Tensor descriptors;  // [out_points, descriptor_dim]
    RendererHead head;
    std::vector<double> loss_history;
};

// Stage-two appearance capture for a fitted code: geometry (model, code,
// per-frame clouds, splat winners) is computed once and frozen; Adam then
// jointly optimizes the point descriptors and the renderer head against
// foreground-restricted L1 on RGB plus the Dice loss on the predicted mask.
// Requires at least two frames.
AppearanceResult fit_appearance(const DrapingModel& model, const Tensor& code,
                                const BodyTemplate& tmpl,
                                const std::vector<AppearanceFrame>& frames,
                                const AppearanceConfig& config);

}  // namespace gc
