#pragma once

#include <vector>

#include "gc/body.hpp"
#include "gc/camera.hpp"
#include "gc/draping.hpp"
#include "gc/image.hpp"

namespace gc {

struct FitView {
    Mask mask;
    Camera cam;
};

struct FitConfig {
    int hypotheses = 4;    // T
    int warmup_steps = 100;
    int refine_min = 50;
    int refine_max = 400;
    double converge_rel = 1e-4;  // relative loss change ...
    int converge_window = 20;    // ... over this many steps
    double lr = 1e-2;
    std::uint64_t seed = 0;
    int jobs = 1;

    void validate() const;
};

struct FitResult {
    Tensor code;
    double final_loss = 0;   // mean 2-d Chamfer over the views
    int refine_steps = 0;
    std::vector<double> hypothesis_losses;  // loss of each warm hypothesis
};

// Estimate the outfit code for frozen draping parameters from one or more
// silhouettes: T random unit-ball hypotheses are optimized warmup_steps
// each, averaged (and clipped), then the average is refined until the
// relative loss change over converge_window steps drops below converge_rel
// (bounded by refine_min/refine_max). The per-view loss is the mask Chamfer
// over occlusion-culled projections with correspondences frozen per step.
// Hypotheses whose projections degenerate restart with a fresh code; if
// every hypothesis degenerates repeatedly, a NumericError is thrown.
FitResult fit_outfit_code(const DrapingModel& model, const PosedBody& body,
                          const std::vector<FitView>& views, const FitConfig& config);

}  // namespace gc
