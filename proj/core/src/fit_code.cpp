#include "gc/fit_code.hpp"

#include <cmath>

#include "gc/adam.hpp"
#include "gc/distance_transform.hpp"
#include "gc/error.hpp"
#include "gc/metrics.hpp"
#include "gc/parallel.hpp"
#include "gc/raster.hpp"

namespace gc {
namespace {

struct ViewContext {
    const FitView* view = nullptr;
    DistanceTransform dt;
    dvec body_depth;
};

// Chamfer section for one view. The visible subset and both correspondence
// sets come from the current numeric cloud and stay frozen for the step's
// gradient; the projection itself is rebuilt inside the graph so gradients
// flow to the code.
Var view_loss_graph(Tape& tape, Var cloud, const PointCloud3& cloud_value,
                    const ViewContext& ctx, bool* degenerate) {
    const Camera& cam = ctx.view->cam;
    const VisibleProjection vis = project_visible(cloud_value, ctx.body_depth, cam);
    if (vis.index.empty()) {
        *degenerate = true;
        return Var{};
    }
    const Chamfer2Eval frozen = chamfer2_mask(vis.uv, ctx.view->mask, &ctx.dt);

    // projected uv of the visible subset, in-graph
    Tensor rot_t = Tensor::zeros({3, 3});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) rot_t.at(j, i) = cam.rotation[size_t(i) * 3 + j];
    Tensor trans({3}, {cam.translation[0], cam.translation[1], cam.translation[2]});

    Var visible = gather_rows(cloud, vis.index);
    Var q = add_rows(matmul(visible, tape.constant(std::move(rot_t))),
                     tape.constant(std::move(trans)));  // [V,3] camera space
    Var qt = transpose(q);                              // [3,V]
    Var qx = gather_rows(qt, {0});
    Var qy = gather_rows(qt, {1});
    Var qz = gather_rows(qt, {2});
    Var u = add(mul(tape.scalar(cam.fx), divide(qx, qz)), tape.scalar(cam.cx));
    Var v = add(mul(tape.scalar(cam.fy), divide(qy, qz)), tape.scalar(cam.cy));
    Var uv = transpose(concat({u, v}, 0));  // [V,2]

    const int n_vis = int(vis.index.size());
    Tensor sites = Tensor::zeros({n_vis, 2});
    for (int i = 0; i < n_vis; ++i) {
        sites.at(i, 0) = frozen.point_site[size_t(i)][0];
        sites.at(i, 1) = frozen.point_site[size_t(i)][1];
    }
    Var ones = tape.constant(Tensor({2, 1}, {1, 1}));
    Var pd = sub(uv, tape.constant(std::move(sites)));
    Var point_term = reduce_mean(matmul(mul(pd, pd), ones));  // mean row-sums [V,1]

    const int n_fg = int(frozen.fg_center.size());
    Tensor centers = Tensor::zeros({n_fg, 2});
    for (int i = 0; i < n_fg; ++i) {
        centers.at(i, 0) = frozen.fg_center[size_t(i)][0];
        centers.at(i, 1) = frozen.fg_center[size_t(i)][1];
    }
    Var matched = gather_rows(uv, frozen.pixel_point);
    Var qd = sub(matched, tape.constant(std::move(centers)));
    Var pixel_term = reduce_mean(matmul(mul(qd, qd), ones));

    return add(point_term, pixel_term);
}

struct StepResult {
    double loss = 0;
    bool degenerate = false;
};

// One Adam step on z against the mean view loss; model parameters frozen.
StepResult fit_step(DrapingModel& model, const PointCloud3& body_cloud, const SeedDraw& draw,
                    Tensor& z, const std::vector<ViewContext>& views, AdamState& state) {
    Tape tape;
    Var zv = tape.param(z, "code");
    Var cloud = deform_graph(tape, model, body_cloud, draw, zv, false);
    PointCloud3 cloud_value;
    cloud_value.xyz.assign(cloud.value().data.begin(), cloud.value().data.end());

    Var total{};
    bool degenerate = false;
    for (const ViewContext& ctx : views) {
        Var vl = view_loss_graph(tape, cloud, cloud_value, ctx, &degenerate);
        if (degenerate) return {0.0, true};
        total = total.tape ? add(total, vl) : vl;
    }
    Var loss = mul(total, tape.scalar(1.0 / double(views.size())));
    StepResult r;
    r.loss = loss.value().data[0];
    if (!std::isfinite(r.loss)) throw NumericError("fit_outfit_code: non-finite loss");
    tape.backward(loss);
    adam_step({&z}, state);
    clip_code(z);
    return r;
}

}  // namespace

void FitConfig::validate() const {
    if (hypotheses < 1) throw NumericError("fit: T must be >= 1");
    if (refine_min > refine_max) throw NumericError("fit: refine_min > refine_max");
    if (warmup_steps < 0 || converge_window < 1) throw NumericError("fit: bad schedule");
}

FitResult fit_outfit_code(const DrapingModel& model, const PosedBody& body,
                          const std::vector<FitView>& views, const FitConfig& config) {
    config.validate();
    if (views.empty()) throw NumericError("fit_outfit_code: need at least one view");
    for (const FitView& v : views) {
        v.cam.validate();
        if (v.mask.foreground_count() == 0)
            throw NumericError("fit_outfit_code: empty mask");
        if (v.mask.width != v.cam.width || v.mask.height != v.cam.height)
            throw NumericError("fit_outfit_code: mask size does not match the camera");
    }

    const PointCloud3 body_cloud = body_point_cloud(body);
    std::vector<ViewContext> ctx(views.size());
    for (size_t i = 0; i < views.size(); ++i) {
        ctx[i].view = &views[i];
        ctx[i].dt = distance_transform(views[i].mask);
        ctx[i].body_depth = body_depth_map(body, views[i].cam);
    }

    Rng root(config.seed);
    Rng seed_rng = root.fork("seeds");
    // one fixed draw for the whole fit: stable targets across steps
    const SeedDraw draw = draw_seeds(body_cloud.count(), model.dims.out_points, seed_rng);

    // Warm hypotheses (independent; may run in parallel).
    std::vector<Tensor> hyp(static_cast<size_t>(config.hypotheses));
    std::vector<double> hyp_loss(size_t(config.hypotheses), 0.0);
    std::vector<char> hyp_ok(size_t(config.hypotheses), 0);
    parallel_for(config.hypotheses, config.jobs, [&](int h) {
        DrapingModel local = model;  // parameters are read-only but tapes need non-const
        Rng hyp_rng = root.fork("hypothesis", std::uint64_t(h));
        for (int restart = 0; restart < 8; ++restart) {
            Tensor z = random_code(model.dims.code_dim, hyp_rng);
            AdamState st;
            st.learning_rate = config.lr;
            bool failed = false;
            double last = 0;
            for (int s = 0; s < config.warmup_steps; ++s) {
                const StepResult r = fit_step(local, body_cloud, draw, z, ctx, st);
                if (r.degenerate) {
                    failed = true;
                    break;
                }
                last = r.loss;
            }
            if (!failed) {
                hyp[size_t(h)] = std::move(z);
                hyp_loss[size_t(h)] = last;
                hyp_ok[size_t(h)] = 1;
                return;
            }
        }
    });
    bool any_ok = false;
    for (char ok : hyp_ok) any_ok = any_ok || ok;
    if (!any_ok)
        throw NumericError("fit_outfit_code: every hypothesis hit degenerate visibility");

    // Average the surviving hypotheses, clip, refine until converged.
    std::vector<Tensor> ok;
    for (int h = 0; h < config.hypotheses; ++h)
        if (hyp_ok[size_t(h)]) ok.push_back(hyp[size_t(h)]);
    Tensor z = average_codes(ok);
    clip_code(z);

    DrapingModel local = model;
    AdamState st;
    st.learning_rate = config.lr;
    std::vector<double> history;
    FitResult result;
    for (int s = 0; s < config.refine_max; ++s) {
        const StepResult r = fit_step(local, body_cloud, draw, z, ctx, st);
        if (r.degenerate)
            throw NumericError("fit_outfit_code: degenerate visibility during refinement");
        history.push_back(r.loss);
        result.refine_steps = s + 1;
        if (s + 1 >= config.refine_min && int(history.size()) > config.converge_window) {
            const double prev = history[history.size() - 1 - size_t(config.converge_window)];
            const double cur = history.back();
            if (std::fabs(prev - cur) < config.converge_rel * std::max(std::fabs(prev), 1e-12))
                break;
        }
    }
    result.code = std::move(z);
    result.final_loss = history.empty() ? 0.0 : history.back();
    result.hypothesis_losses.assign(hyp_loss.begin(), hyp_loss.end());
    return result;
}

}  // namespace gc
