#include "gc/appearance.hpp"

#include <cmath>

#include "gc/adam.hpp"
#include "gc/error.hpp"
#include "gc/raster.hpp"

namespace gc {
namespace {

struct FrameContext {
    RasterBuffer raster;            // winners, coverage, depth (descriptor-free)
    std::vector<int> fg_pixels;     // linear indices of gt foreground
    Tensor gt_rgb_fg;               // [F, 3]
    Tensor gt_mask_flat;            // [1, H*W]
    double gt_mask_sum = 0;
};

}  // namespace

AppearanceResult fit_appearance(const DrapingModel& model, const Tensor& code,
                                const BodyTemplate& tmpl,
                                const std::vector<AppearanceFrame>& frames,
                                const AppearanceConfig& config) {
    if (frames.size() < 2)
        throw NumericError("fit_appearance: need at least two frames");
    for (const auto& f : frames) {
        f.cam.validate();
        if (f.rgb.width != f.cam.width || f.rgb.height != f.cam.height ||
            f.mask.width != f.cam.width || f.mask.height != f.cam.height)
            throw NumericError("fit_appearance: frame/camera size mismatch");
    }

    Rng root(config.seed);
    const int M = model.dims.out_points;
    const int p = config.descriptor_dim;

    // Frozen geometry: one seed draw shared by every frame keeps descriptor
    // indices attached to the same garment locations across poses.
    DrapingModel local = model;
    Rng seed_rng = root.fork("seeds");
    Tensor zeros_desc = Tensor::zeros({M, p});

    std::vector<FrameContext> ctx(frames.size());
    {
        SeedDraw draw;
        for (size_t f = 0; f < frames.size(); ++f) {
            const PosedBody body = pose_body(tmpl, frames[f].pose);
            const PointCloud3 body_cloud = body_point_cloud(body);
            if (f == 0) draw = draw_seeds(body_cloud.count(), M, seed_rng);
            const PointCloud3 cloud = deform_with_draw(local, body_cloud, draw, code);
            ctx[f].raster = rasterize_descriptors(cloud, zeros_desc, &body, frames[f].cam);

            const Mask& mask = frames[f].mask;
            const size_t hw = size_t(mask.width) * mask.height;
            for (size_t at = 0; at < hw; ++at)
                if (mask.on[at]) ctx[f].fg_pixels.push_back(int(at));
            if (ctx[f].fg_pixels.empty())
                throw NumericError("fit_appearance: frame " + std::to_string(f) +
                                   " has an empty mask");
            ctx[f].gt_rgb_fg = Tensor::zeros({int(ctx[f].fg_pixels.size()), 3});
            for (size_t q = 0; q < ctx[f].fg_pixels.size(); ++q)
                for (int c = 0; c < 3; ++c)
                    ctx[f].gt_rgb_fg.at(int(q), c) =
                        frames[f].rgb.pix[size_t(ctx[f].fg_pixels[q]) * 3 + size_t(c)];
            ctx[f].gt_mask_flat = Tensor::zeros({1, int(hw)});
            for (size_t at = 0; at < hw; ++at) {
                ctx[f].gt_mask_flat.data[at] = mask.on[at] ? 1.0 : 0.0;
                ctx[f].gt_mask_sum += mask.on[at] ? 1.0 : 0.0;
            }
        }
    }

    AppearanceResult result;
    Rng init_rng = root.fork("init");
    result.descriptors = Tensor::zeros({M, p});
    for (auto& v : result.descriptors.data) v = 0.01 * init_rng.normal();
    result.descriptors.requires_grad = true;
    result.head = RendererHead::init(p + 1, init_rng);

    std::vector<Tensor*> params = result.head.params();
    params.insert(params.begin(), &result.descriptors);
    AdamState state;
    state.learning_rate = config.lr;

    const int H = frames[0].cam.height, W = frames[0].cam.width;
    const size_t hw = size_t(H) * W;

    for (int step = 0; step < config.steps; ++step) {
        Tape tape;
        Var desc = tape.param(result.descriptors, "descriptors");
        Var total{};
        for (size_t f = 0; f < frames.size(); ++f) {
            Var input = splat_input_graph(tape, desc, ctx[f].raster);
            Var out = render_head_graph(tape, result.head, input, true);
            Var flat = reshape(out, {4, int(hw)});

            // foreground-restricted L1 on RGB
            Var rgb_rows = transpose(gather_rows(flat, {0, 1, 2}));  // [H*W, 3]
            Var pred_fg = gather_rows(rgb_rows, ctx[f].fg_pixels);
            Var l1 = reduce_mean(abs_op(sub(pred_fg, tape.input(ctx[f].gt_rgb_fg))));

            // Dice on the soft mask channel
            Var pred_mask = gather_rows(flat, {3});  // [1, H*W], already in [0,1]
            Var inter = reduce_sum(mul(pred_mask, tape.input(ctx[f].gt_mask_flat)));
            Var psum = reduce_sum(pred_mask);
            Var dice = sub(tape.scalar(1.0),
                           divide(add(mul(tape.scalar(2.0), inter), tape.scalar(1.0)),
                                  add(psum, tape.scalar(ctx[f].gt_mask_sum + 1.0))));

            Var frame_loss = add(l1, dice);
            total = total.tape ? add(total, frame_loss) : frame_loss;
        }
        Var loss = mul(total, tape.scalar(1.0 / double(frames.size())));
        const double value = loss.value().data[0];
        if (!std::isfinite(value))
            throw NumericError("fit_appearance: non-finite loss at step " + std::to_string(step));
        result.loss_history.push_back(value);
        tape.backward(loss);
        adam_step(params, state);
        if (config.on_log && config.log_every > 0 &&
            (step % config.log_every == 0 || step + 1 == config.steps))
            config.on_log(step, value);
    }
    return result;
}

}  // namespace gc
