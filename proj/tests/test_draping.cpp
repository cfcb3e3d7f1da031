#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "gc/body.hpp"
#include "gc/checkpoint.hpp"
#include "gc/dataset.hpp"
#include "gc/draping.hpp"
#include "gc/error.hpp"
#include "gc/fit_code.hpp"
#include "gc/glo.hpp"
#include "gc/gradcheck.hpp"
#include "gc/metrics.hpp"

using namespace gc;

namespace {

PointCloud3 ring_cloud(int n, double radius, double y) {
    PointCloud3 c = PointCloud3::with_count(n);
    for (int i = 0; i < n; ++i) {
        const double a = 2 * M_PI * i / n;
        c.p(i)[0] = radius * std::cos(a);
        c.p(i)[1] = y + 0.05 * std::sin(3 * a);
        c.p(i)[2] = radius * std::sin(a);
    }
    return c;
}

}  // namespace

TEST_CASE("clip_code projects onto the unit ball") {
    Tensor z = Tensor::zeros({8});
    z.data[0] = 2.0;
    clip_code(z);
    CHECK(code_norm(z) == doctest::Approx(1.0));
    Tensor z2 = Tensor::zeros({8});
    z2.data[3] = 0.5;
    Tensor before = z2;
    clip_code(z2);
    CHECK(z2.data == before.data);
    Tensor z3 = Tensor::zeros({8});
    clip_code(z3);
    for (double v : z3.data) CHECK(v == 0.0);
}

TEST_CASE("random codes start inside the ball") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) CHECK(code_norm(random_code(8, rng)) <= 1.0 + 1e-12);
}

TEST_CASE("average_codes is the elementwise mean") {
    Tensor a = Tensor::zeros({4}), b = Tensor::zeros({4});
    for (int i = 0; i < 4; ++i) {
        a.data[size_t(i)] = i + 1;
        b.data[size_t(i)] = -(i + 1);
    }
    const Tensor avg = average_codes({a, b});
    for (double v : avg.data) CHECK(v == 0.0);  // {z, -z} -> 0
}

TEST_CASE("encode_code emits the configured latent width, deterministically") {
    Rng rng(7);
    DrapingModel model = DrapingModel::init(DrapingDims{}, rng);
    Tensor z = random_code(8, rng);
    const std::vector<double> e1 = encode_code(model, z);
    const std::vector<double> e2 = encode_code(model, z);
    CHECK(e1.size() == 512);
    CHECK(e1 == e2);
}

TEST_CASE("encode_code at z=0 is the bias-only forward pass") {
    Rng rng(11);
    DrapingModel model = DrapingModel::init(DrapingDims::toy(), rng);
    Tensor z = Tensor::zeros({8});
    const std::vector<double> got = encode_code(model, z);

    // independent evaluation: h = lrelu(...lrelu(b0) W1 + b1 ...)
    std::vector<double> h(model.enc_b[0].data.begin(), model.enc_b[0].data.end());
    for (int l = 1; l < 5; ++l) {
        for (auto& v : h) v = v > 0 ? v : 0.2 * v;  // activation of the previous layer
        const Tensor& w = model.enc_w[size_t(l)];
        const Tensor& b = model.enc_b[size_t(l)];
        std::vector<double> next(size_t(w.cols()), 0.0);
        for (int j = 0; j < w.cols(); ++j) {
            double s = b.data[size_t(j)];
            for (int i = 0; i < w.rows(); ++i) s += h[size_t(i)] * w.at(i, j);
            next[size_t(j)] = s;
        }
        h = std::move(next);
    }
    REQUIRE(got.size() == h.size());
    for (size_t i = 0; i < h.size(); ++i) CHECK(got[i] == doctest::Approx(h[i]).epsilon(1e-12));
}

TEST_CASE("deform emits exactly out_points points for any input size") {
    Rng rng(13);
    DrapingModel model = DrapingModel::init(DrapingDims{}, rng);
    Tensor z = random_code(8, rng);
    for (int n : {17, 500, 3000}) {
        Rng seed(99);
        const PointCloud3 out = deform(model, ring_cloud(n, 0.2, 1.0), z, seed);
        CHECK(out.count() == 8192);
    }
    Rng seed(1);
    CHECK_THROWS_AS(deform(model, PointCloud3{}, z, seed), NumericError);
}

TEST_CASE("deform is translation-equivariant") {
    Rng rng(17);
    DrapingModel model = DrapingModel::init(DrapingDims::toy(), rng);
    Tensor z = random_code(8, rng);
    const PointCloud3 body = ring_cloud(40, 0.2, 1.0);
    PointCloud3 moved = body;
    const double t[3] = {1.25, -0.5, 0.75};
    for (int i = 0; i < moved.count(); ++i)
        for (int k = 0; k < 3; ++k) moved.p(i)[k] += t[k];

    Rng s1(5);
    const SeedDraw draw = draw_seeds(body.count(), model.dims.out_points, s1);
    const PointCloud3 a = deform_with_draw(model, body, draw, z);
    const PointCloud3 b = deform_with_draw(model, moved, draw, z);
    for (int i = 0; i < a.count(); ++i)
        for (int k = 0; k < 3; ++k)
            CHECK(b.p(i)[k] - a.p(i)[k] == doctest::Approx(t[k]).epsilon(1e-9));
}

TEST_CASE("permuting the seeds permutes the output rows and keeps the set") {
    Rng rng(19);
    DrapingModel model = DrapingModel::init(DrapingDims::toy(), rng);
    Tensor z = random_code(8, rng);
    const PointCloud3 body = ring_cloud(30, 0.25, 0.9);
    Rng s1(7);
    SeedDraw draw = draw_seeds(body.count(), model.dims.out_points, s1);
    const PointCloud3 a = deform_with_draw(model, body, draw, z);

    const int n = int(draw.index.size());
    std::vector<int> perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) perm[size_t(i)] = n - 1 - i;
    SeedDraw permuted;
    permuted.index.resize(draw.index.size());
    permuted.jitter.resize(draw.jitter.size());
    for (int i = 0; i < n; ++i) {
        permuted.index[size_t(i)] = draw.index[size_t(perm[size_t(i)])];
        for (int k = 0; k < 3; ++k)
            permuted.jitter[size_t(i) * 3 + k] = draw.jitter[size_t(perm[size_t(i)]) * 3 + k];
    }
    const PointCloud3 b = deform_with_draw(model, body, permuted, z);
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k)
            CHECK(b.p(i)[k] == doctest::Approx(a.p(perm[size_t(i)])[k]).epsilon(1e-12));
}

TEST_CASE("full draping network passes the gradient check at toy width") {
    Rng rng(23);
    DrapingModel model = DrapingModel::init(DrapingDims::toy(), rng);
    Tensor z = random_code(8, rng);
    z.requires_grad = true;
    const PointCloud3 body = ring_cloud(16, 0.2, 1.0);
    Rng s1(3);
    const SeedDraw draw = draw_seeds(body.count(), model.dims.out_points, s1);

    auto named = model.named_params();
    named.emplace_back("z", &z);
    GradCheckReport rep = grad_check(
        [&](Tape& tape) {
            Var out = deform_graph(tape, model, body, draw, tape.param(z, "z"), true);
            return reduce_mean(mul(out, out));
        },
        named, 1e-5);
    INFO(rep.summary());
    CHECK(rep.pass());
}

TEST_CASE("checkpoint round trip preserves the model and codes exactly") {
    namespace fs = std::filesystem;
    Rng rng(29);
    DrapingModel model = DrapingModel::init(DrapingDims::toy(), rng);
    const std::string path = (fs::temp_directory_path() / "gc_model.gckpt").string();
    checkpoint_from_model(model).save(path);
    DrapingModel back = model_from_checkpoint(Checkpoint::load(path));
    auto a = model.params();
    auto b = back.params();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i]->data == b[i]->data);

    std::vector<Tensor> codes;
    for (int i = 0; i < 3; ++i) codes.push_back(random_code(8, rng));
    const std::string cpath = (fs::temp_directory_path() / "gc_codes.txt").string();
    save_codes(cpath, codes);
    const std::vector<Tensor> back_codes = load_codes(cpath, 8);
    REQUIRE(back_codes.size() == 3);
    for (size_t i = 0; i < 3; ++i) CHECK(back_codes[i].data == codes[i].data);

    // appearance blocks ride in the same container
    Checkpoint ck = checkpoint_from_model(model);
    Tensor desc = Tensor::zeros({model.dims.out_points, 4});
    for (auto& v : desc.data) v = rng.normal();
    RendererHead head = RendererHead::init(5, rng);
    checkpoint_add_appearance(ck, desc, head);
    ck.save(path);
    const Checkpoint loaded = Checkpoint::load(path);
    REQUIRE(checkpoint_has_appearance(loaded));
    auto [desc2, head2] = appearance_from_checkpoint(loaded);
    CHECK(desc2.data == desc.data);
    CHECK(head2.w1.data == head.w1.data);
}

namespace {

// Reduced-width training fixture: one outfit, one frame, 1024-point targets.
struct OverfitFixture {
    BodyTemplate tmpl = default_template();
    DrapingDims dims;
    TrainingSet set;

    OverfitFixture() {
        dims.encoder = {32, 32, 48, 64, 64};
        dims.trunk = {16, 24, 32};
        dims.head = {32, 16};
        dims.out_points = 1024;

        TrainingSet::Outfit outfit;
        outfit.id = 0;
        outfit.style.kind = GarmentStyle::kSkirt;
        outfit.style.flare = 0.2;
        outfit.style.length = 0.6;
        outfit.style.offset = 0.03;
        TrainingSet::Frame frame;
        frame.frame_id = 0;
        frame.pose.pose.assign(48, 0.0);
        frame.pose.shape.assign(4, 0.0);
        const PosedBody body = pose_body(tmpl, frame.pose);
        Rng rng(31);
        frame.target = sample_surface(synth_garment(outfit.style, body), 1024, rng);
        outfit.frames.push_back(std::move(frame));
        set.outfits.push_back(std::move(outfit));
    }
};

}  // namespace

TEST_CASE("glo_train with zero learning rates changes nothing") {
    OverfitFixture fx;
    Rng rng(37);
    DrapingModel model = DrapingModel::init(fx.dims, rng);
    std::vector<Tensor> codes{random_code(8, rng)};
    const DrapingModel before_model = model;
    const Tensor before_code = codes[0];

    GloConfig cfg;
    cfg.steps = 4;
    cfg.batch = 1;
    cfg.lr_code = 0;
    cfg.lr_net = 0;
    cfg.seed = 5;
    const TrainLog log = glo_train(model, codes, fx.set, fx.tmpl, cfg);

    auto pa = model.params();
    auto pb = const_cast<DrapingModel&>(before_model).params();
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->data == pb[i]->data);
    CHECK(codes[0].data == before_code.data);
    for (double l : log.step_loss) CHECK(l == doctest::Approx(log.step_loss[0]).epsilon(1e-12));
}

TEST_CASE("glo_train overfits a single sample and keeps codes in the ball") {
    OverfitFixture fx;
    Rng rng(41);
    DrapingModel model = DrapingModel::init(fx.dims, rng);
    std::vector<Tensor> codes{random_code(8, rng)};

    GloConfig cfg;
    cfg.steps = 500;
    cfg.batch = 1;
    cfg.seed = 9;
    cfg.log_every = 0;
    const TrainLog log = glo_train(model, codes, fx.set, fx.tmpl, cfg);
    REQUIRE(log.step_loss.size() == 500);
    CHECK(log.max_code_norm <= 1.0 + 1e-12);
    CHECK(log.step_loss.back() < 0.1 * log.step_loss.front());
}

TEST_CASE("fit_outfit_code runs the schedule and respects degenerate inputs") {
    OverfitFixture fx;
    Rng rng(43);
    DrapingModel model = DrapingModel::init(fx.dims, rng);
    std::vector<Tensor> codes{random_code(8, rng)};
    GloConfig cfg;
    cfg.steps = 120;
    cfg.batch = 1;
    cfg.seed = 11;
    glo_train(model, codes, fx.set, fx.tmpl, cfg);

    const PosedBody body = pose_body(fx.tmpl, fx.set.outfits[0].frames[0].pose);
    // silhouette of the trained outfit from a frontal camera
    Camera cam = look_at({0, 1.0, 2.2}, {0, 0.9, 0}, 0.9, 96, 96);
    Rng seed(13);
    const PointCloud3 target = deform(model, body_point_cloud(body), codes[0], seed);
    Tensor dummy = Tensor::zeros({fx.dims.out_points, 1});
    const RasterBuffer raster = rasterize_descriptors(target, dummy, &body, cam);
    FitView view;
    view.cam = cam;
    view.mask = Mask::zeros(96, 96);
    for (size_t at = 0; at < raster.coverage.size(); ++at) view.mask.on[at] = raster.coverage[at];
    REQUIRE(view.mask.foreground_count() > 50);

    FitConfig fit_cfg;
    fit_cfg.hypotheses = 2;
    fit_cfg.warmup_steps = 10;
    fit_cfg.refine_min = 5;
    fit_cfg.refine_max = 40;
    fit_cfg.seed = 17;
    const FitResult result = fit_outfit_code(model, body, {view}, fit_cfg);
    CHECK(std::isfinite(result.final_loss));
    CHECK(code_norm(result.code) <= 1.0 + 1e-12);
    CHECK(result.refine_steps >= fit_cfg.refine_min);

    // schedule degenerate case: T=1, warmup 0 is plain refinement
    FitConfig plain;
    plain.hypotheses = 1;
    plain.warmup_steps = 0;
    plain.refine_min = 3;
    plain.refine_max = 8;
    plain.seed = 19;
    const FitResult r2 = fit_outfit_code(model, body, {view}, plain);
    CHECK(r2.refine_steps >= 3);

    // empty mask is a degenerate fit state
    FitView empty;
    empty.cam = cam;
    empty.mask = Mask::zeros(96, 96);
    CHECK_THROWS_AS(fit_outfit_code(model, body, {empty}, fit_cfg), NumericError);
}
