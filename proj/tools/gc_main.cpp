// gc: point-based clothing pipeline driver.
// Subcommands: synth, train, fit, drape, render, appearance, eval, gradcheck.
// Exit codes: 0 ok, 1 usage, 2 io/parse, 3 numeric failure.
#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gc/appearance.hpp"
#include "gc/body.hpp"
#include "gc/checkpoint.hpp"
#include "gc/config.hpp"
#include "gc/dataset.hpp"
#include "gc/draping.hpp"
#include "gc/error.hpp"
#include "gc/fit_code.hpp"
#include "gc/glo.hpp"
#include "gc/gradcheck.hpp"
#include "gc/metrics.hpp"
#include "gc/netpbm.hpp"
#include "gc/obj.hpp"
#include "gc/parallel.hpp"
#include "gc/ply.hpp"
#include "gc/raster.hpp"
#include "gc/renderer.hpp"

namespace fs = std::filesystem;
using namespace gc;

namespace {

std::uint64_t env_seed_default() {
    if (const char* s = std::getenv("GC_SEED")) return std::strtoull(s, nullptr, 10);
    return 0;
}

BodyTemplate resolve_template(const std::string& base) {
    if (base.empty()) return default_template();
    return load_template(base + ".ply", base + ".rig");
}

// gcpose text file: joint axis-angles, shape coefficients, root translation.
PoseShapeParams load_pose(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open");
    std::string tok;
    int version = 0;
    in >> tok >> version;
    if (tok != "gcpose" || version != 1) throw ParseError(path + ": not a gcpose v1 file");
    PoseShapeParams p;
    int joints = 0, shapes = 0;
    in >> tok >> joints;
    if (tok != "joints" || joints <= 0) throw ParseError(path + ": bad joints header");
    p.pose.resize(size_t(joints) * 3);
    for (double& v : p.pose) in >> v;
    in >> tok >> shapes;
    if (tok != "shape" || shapes < 0) throw ParseError(path + ": bad shape header");
    p.shape.resize(size_t(shapes));
    for (double& v : p.shape) in >> v;
    in >> tok;
    if (tok != "translation") throw ParseError(path + ": expected translation");
    for (double& v : p.root_translation) in >> v;
    if (!in) throw ParseError(path + ": truncated");
    return p;
}

void save_pose(const PoseShapeParams& p, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ParseError(path + ": cannot open for writing");
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, " %.17g", v);
        out << buf;
    };
    out << "gcpose 1\njoints " << p.pose.size() / 3 << "\n";
    for (size_t j = 0; j * 3 < p.pose.size(); ++j) {
        for (int k = 0; k < 3; ++k) put(p.pose[j * 3 + size_t(k)]);
        out << "\n";
    }
    out << "shape " << p.shape.size() << "\n";
    for (double v : p.shape) put(v);
    out << "\ntranslation";
    for (double v : p.root_translation) put(v);
    out << "\n";
}

PointCloud3 cloud_from_file(const std::string& path) {
    PointCloud3 c;
    if (path.size() > 4 && path.substr(path.size() - 4) == ".obj") {
        const TriMesh m = load_obj(path);
        c.xyz = m.verts;
        return c;
    }
    const PlyData ply = load_ply(path);
    c.xyz.assign(ply.xyz.begin(), ply.xyz.end());
    return c;
}

void save_cloud(const PointCloud3& c, const std::string& path) {
    PlyData ply;
    ply.xyz.assign(c.xyz.begin(), c.xyz.end());
    save_ply(path, ply, true);
}

Tensor load_code_row(const std::string& path, int index, int dim) {
    const std::vector<Tensor> codes = load_codes(path, dim);
    if (index < 0 || index >= int(codes.size()))
        throw ParseError(path + ": no code row " + std::to_string(index));
    return codes[size_t(index)];
}

// ---- subcommands -----------------------------------------------------------

int cmd_synth(const std::string& out_dir, const Config& cfg, const std::string& tmpl_base) {
    const BodyTemplate tmpl = resolve_template(tmpl_base);
    DatasetConfig dc;
    dc.outfits = int(cfg.get_int("data.outfits"));
    dc.frames = int(cfg.get_int("data.frames"));
    dc.stride = int(cfg.get_int("data.stride"));
    dc.seed = cfg.get_seed("data.seed");
    const TrainingSet set = make_dataset(tmpl, dc);
    fs::create_directories(out_dir);
    save_template(tmpl, (fs::path(out_dir) / "body_template.ply").string(),
                  (fs::path(out_dir) / "body_template.rig").string());
    const std::string manifest = save_dataset(set, out_dir);
    std::printf("synth: %d outfits x %zu frames -> %s\n", dc.outfits,
                set.outfits.empty() ? size_t(0) : set.outfits[0].frames.size(),
                manifest.c_str());
    return 0;
}

int cmd_train(const std::string& manifest, const std::string& out_ckpt,
              const std::string& codes_out, const Config& cfg) {
    const fs::path dir = fs::path(manifest).parent_path();
    const BodyTemplate tmpl = load_template((dir / "body_template.ply").string(),
                                            (dir / "body_template.rig").string());
    const TrainingSet set = load_dataset(manifest);

    GloConfig gc_cfg;
    gc_cfg.steps = int(cfg.get_int("train.steps"));
    gc_cfg.batch = int(cfg.get_int("train.batch"));
    gc_cfg.lr_code = cfg.get_double("train.lr_code");
    gc_cfg.lr_net = cfg.get_double("train.lr_net");
    gc_cfg.seed = cfg.get_seed("train.seed");
    gc_cfg.log_every = int(cfg.get_int("train.log_every"));
    gc_cfg.jobs = int(cfg.get_int("jobs"));
    if (gc_cfg.jobs == 0) gc_cfg.jobs = default_jobs();
    gc_cfg.on_log = [](int step, double loss) {
        std::printf("step %5d  emd %.6f\n", step, loss);
        std::fflush(stdout);
    };

    Rng rng(gc_cfg.seed);
    Rng init_rng = rng.fork("model-init");
    DrapingModel model = DrapingModel::init(DrapingDims{}, init_rng);
    std::vector<Tensor> codes;
    Rng code_rng = rng.fork("code-init");
    for (size_t i = 0; i < set.outfits.size(); ++i)
        codes.push_back(random_code(model.dims.code_dim, code_rng));

    const int per_epoch = std::max(1, set.total_frames() / std::max(1, gc_cfg.batch));
    const int ck_every = int(cfg.get_int("train.checkpoint_every"));
    if (ck_every > 0) {
        // epoch-stamped mid-run checkpoints
        gc_cfg.on_log = [&, per_epoch, ck_every](int step, double loss) {
            std::printf("step %5d  emd %.6f\n", step, loss);
            std::fflush(stdout);
            const int epoch = step / per_epoch;
            if (step % per_epoch == 0 && epoch > 0 && epoch % ck_every == 0) {
                char suffix[32];
                std::snprintf(suffix, sizeof suffix, "_epoch%04d", epoch);
                checkpoint_from_model(model).save(out_ckpt + suffix);
                save_codes(out_ckpt + suffix + ".codes.txt", codes);
            }
        };
    }

    const TrainLog log = glo_train(model, codes, set, tmpl, gc_cfg);
    checkpoint_from_model(model).save(out_ckpt);
    save_codes(codes_out.empty() ? out_ckpt + ".codes.txt" : codes_out, codes);
    std::printf("train: final step loss %.6f, max code norm %.6f\n",
                log.step_loss.empty() ? 0.0 : log.step_loss.back(), log.max_code_norm);
    return 0;
}

int cmd_fit(const std::string& ckpt, const std::vector<std::string>& mask_paths,
            const std::vector<std::string>& cam_paths, const std::string& pose_path,
            const std::string& tmpl_base, const std::string& out_path, const Config& cfg) {
    if (mask_paths.size() != cam_paths.size() || mask_paths.empty())
        throw ParseError("fit: need matching --mask/--camera lists");
    const BodyTemplate tmpl = resolve_template(tmpl_base);
    const DrapingModel model = model_from_checkpoint(Checkpoint::load(ckpt));
    const PosedBody body = pose_body(tmpl, load_pose(pose_path));

    std::vector<FitView> views(mask_paths.size());
    for (size_t i = 0; i < mask_paths.size(); ++i) {
        views[i].mask = load_p5(mask_paths[i]);
        views[i].cam = load_camera(cam_paths[i]);
    }

    FitConfig fc;
    fc.hypotheses = int(cfg.get_int("fit.T"));
    fc.warmup_steps = int(cfg.get_int("fit.warmup"));
    fc.refine_min = int(cfg.get_int("fit.refine_min"));
    fc.refine_max = int(cfg.get_int("fit.refine_max"));
    fc.converge_rel = cfg.get_double("fit.tol");
    fc.converge_window = int(cfg.get_int("fit.window"));
    fc.lr = cfg.get_double("fit.lr");
    fc.seed = cfg.get_seed("fit.seed");
    fc.jobs = int(cfg.get_int("jobs"));
    if (fc.jobs == 0) fc.jobs = default_jobs();

    const FitResult r = fit_outfit_code(model, body, views, fc);
    save_codes(out_path, {r.code});
    std::printf("fit: chamfer2 %.6f after %d refine steps -> %s\n", r.final_loss,
                r.refine_steps, out_path.c_str());
    return 0;
}

int cmd_drape(const std::string& ckpt, const std::string& codes_path, int outfit,
              const std::string& pose_path, const std::string& tmpl_base,
              const std::string& out_path, std::uint64_t seed) {
    const BodyTemplate tmpl = resolve_template(tmpl_base);
    DrapingModel model = model_from_checkpoint(Checkpoint::load(ckpt));
    const Tensor code = load_code_row(codes_path, outfit, model.dims.code_dim);
    const PosedBody body = pose_body(tmpl, load_pose(pose_path));
    Rng rng(seed);
    Rng seed_rng = rng.fork("drape");
    const PointCloud3 cloud = deform(model, body_point_cloud(body), code, seed_rng);
    save_cloud(cloud, out_path);
    std::printf("drape: %d points -> %s\n", cloud.count(), out_path.c_str());
    return 0;
}

int cmd_render(const std::string& ckpt, const std::string& pose_path,
               const std::string& cam_path, const std::string& tmpl_base,
               const std::string& out_rgb, const std::string& out_mask, std::uint64_t seed) {
    const Checkpoint ck = Checkpoint::load(ckpt);
    DrapingModel model = model_from_checkpoint(ck);
    if (!checkpoint_has_appearance(ck))
        throw ParseError(ckpt + ": no appearance blocks (run `gc appearance` first)");
    auto [descriptors, head] = appearance_from_checkpoint(ck);
    const dvec* code_block = ck.find("code");
    if (!code_block || int(code_block->size()) != model.dims.code_dim)
        throw ParseError(ckpt + ": no fitted code block");
    Tensor code({model.dims.code_dim}, *code_block);

    const BodyTemplate tmpl = resolve_template(tmpl_base);
    const PosedBody body = pose_body(tmpl, load_pose(pose_path));
    const Camera cam = load_camera(cam_path);
    Rng rng(seed);
    Rng seed_rng = rng.fork("render");
    const PointCloud3 cloud = deform(model, body_point_cloud(body), code, seed_rng);
    const RasterBuffer raster = rasterize_descriptors(cloud, descriptors, &body, cam);
    const RenderOutput out = render_head_eval(head, raster);

    save_p6(out_rgb, out.rgb);
    Mask mask = Mask::zeros(cam.width, cam.height);
    for (size_t i = 0; i < out.mask.size(); ++i) mask.on[i] = out.mask[i] >= 0.5;
    save_p5(out_mask, mask);
    std::printf("render: %s %s\n", out_rgb.c_str(), out_mask.c_str());
    return 0;
}

int cmd_appearance(const std::string& ckpt, const std::string& codes_path, int outfit,
                   const std::string& frames_path, const std::string& tmpl_base,
                   const std::string& out_ckpt, const Config& cfg) {
    const BodyTemplate tmpl = resolve_template(tmpl_base);
    DrapingModel model = model_from_checkpoint(Checkpoint::load(ckpt));
    const Tensor code = load_code_row(codes_path, outfit, model.dims.code_dim);

    // frame list: tab-separated rgb.ppm, mask.pgm, camera, pose per line
    std::ifstream in(frames_path);
    if (!in) throw ParseError(frames_path + ": cannot open");
    const fs::path dir = fs::path(frames_path).parent_path();
    std::vector<AppearanceFrame> frames;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> f;
        size_t start = 0;
        while (true) {
            const size_t tab = line.find('\t', start);
            f.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (f.size() != 4)
            throw ParseError(frames_path + ":" + std::to_string(lineno) +
                             ": expected rgb<TAB>mask<TAB>camera<TAB>pose");
        AppearanceFrame frame;
        frame.rgb = load_p6((dir / f[0]).string());
        frame.mask = load_p5((dir / f[1]).string());
        frame.cam = load_camera((dir / f[2]).string());
        frame.pose = load_pose((dir / f[3]).string());
        frames.push_back(std::move(frame));
    }

    AppearanceConfig ac;
    ac.steps = int(cfg.get_int("appearance.steps"));
    ac.lr = cfg.get_double("appearance.lr");
    ac.descriptor_dim = int(cfg.get_int("render.descriptors"));
    ac.seed = cfg.get_seed("appearance.seed");
    ac.on_log = [](int step, double loss) {
        std::printf("step %5d  loss %.6f\n", step, loss);
        std::fflush(stdout);
    };

    const AppearanceResult r = fit_appearance(model, code, tmpl, frames, ac);
    Checkpoint out = checkpoint_from_model(model);
    checkpoint_add_appearance(out, r.descriptors, r.head);
    out.blocks.emplace_back("code", code.data);
    out.save(out_ckpt);
    std::printf("appearance: final loss %.6f -> %s\n",
                r.loss_history.empty() ? 0.0 : r.loss_history.back(), out_ckpt.c_str());
    return 0;
}

int cmd_eval(const std::string& a_path, const std::string& b_path) {
    const PointCloud3 a = cloud_from_file(a_path);
    const PointCloud3 b = cloud_from_file(b_path);
    std::printf("%-12s %s vs %s\n", "metric", a_path.c_str(), b_path.c_str());
    std::printf("%-12s %.9f\n", "chamfer3", chamfer3(a, b));
    if (a.count() == b.count()) {
        std::printf("%-12s %.9f\n", "emd", emd_approx(a, b).value);
    } else {
        std::printf("%-12s skipped (sizes %d vs %d)\n", "emd", a.count(), b.count());
    }
    return 0;
}

int cmd_gradcheck(double tol);

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gc: latent-conditioned garment draping, fitting, and point-splat rendering"};
    app.require_subcommand(1);

    Config cfg;
    std::string config_path;
    std::uint64_t seed = env_seed_default();
    bool seed_set = false;
    int jobs = -1;
    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--seed", seed, "global seed (fallback: GC_SEED env)")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--jobs", jobs, "worker cap (0 = hardware)");

    // synth
    auto* synth = app.add_subcommand("synth", "generate the procedural toy dataset");
    std::string out_dir, tmpl_base;
    int outfits = -1, frames = -1, stride = -1;
    synth->add_option("--out", out_dir, "output directory")->required();
    synth->add_option("--template", tmpl_base, "template base path (BASE.ply/BASE.rig)");
    synth->add_option("--outfits", outfits);
    synth->add_option("--frames", frames);
    synth->add_option("--stride", stride);

    // train
    auto* train = app.add_subcommand("train", "GLO-train the draping model");
    std::string manifest, out_ckpt, codes_out;
    int steps = -1, batch = -1;
    double lr_code = -1, lr_net = -1;
    train->add_option("--data", manifest, "dataset manifest.tsv")->required();
    train->add_option("--out", out_ckpt, "output checkpoint")->required();
    train->add_option("--codes-out", codes_out, "output code table (default <out>.codes.txt)");
    train->add_option("--steps", steps);
    train->add_option("--batch", batch);
    train->add_option("--lr-code", lr_code);
    train->add_option("--lr-net", lr_net);

    // fit
    auto* fit = app.add_subcommand("fit", "estimate an outfit code from silhouettes");
    std::string fit_ckpt, fit_pose, fit_out;
    std::vector<std::string> fit_masks, fit_cams;
    fit->add_option("--model", fit_ckpt)->required();
    fit->add_option("--mask", fit_masks, "P5 mask (repeatable)")->required();
    fit->add_option("--camera", fit_cams, "camera file (repeatable)")->required();
    fit->add_option("--pose", fit_pose, "gcpose file")->required();
    fit->add_option("--template", tmpl_base);
    fit->add_option("--out", fit_out, "output code table")->required();

    // drape
    auto* drape = app.add_subcommand("drape", "deform a garment cloud for a pose");
    std::string drape_ckpt, drape_codes, drape_pose, drape_out;
    int drape_outfit = 0;
    drape->add_option("--model", drape_ckpt)->required();
    drape->add_option("--codes", drape_codes, "code table")->required();
    drape->add_option("--outfit", drape_outfit, "row in the code table");
    drape->add_option("--pose", drape_pose)->required();
    drape->add_option("--template", tmpl_base);
    drape->add_option("--out", drape_out, "output PLY")->required();

    // render
    auto* render = app.add_subcommand("render", "render a captured outfit");
    std::string render_ckpt, render_pose, render_cam, render_rgb, render_mask;
    render->add_option("--model", render_ckpt, "checkpoint with appearance blocks")->required();
    render->add_option("--pose", render_pose)->required();
    render->add_option("--camera", render_cam)->required();
    render->add_option("--template", tmpl_base);
    render->add_option("--out-rgb", render_rgb)->required();
    render->add_option("--out-mask", render_mask)->required();

    // appearance
    auto* appear = app.add_subcommand("appearance", "fit descriptors and the renderer head");
    std::string app_ckpt, app_codes, app_frames, app_out;
    int app_outfit = 0;
    appear->add_option("--model", app_ckpt)->required();
    appear->add_option("--codes", app_codes)->required();
    appear->add_option("--outfit", app_outfit);
    appear->add_option("--frames", app_frames, "frame list (rgb/mask/camera/pose per line)")
        ->required();
    appear->add_option("--template", tmpl_base);
    appear->add_option("--out", app_out, "output checkpoint")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "chamfer/emd between two clouds");
    std::string eval_a, eval_b;
    eval->add_option("a", eval_a, "first cloud (.ply/.obj)")->required();
    eval->add_option("b", eval_b, "second cloud (.ply/.obj)")->required();

    // gradcheck
    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    double gc_tol = 1e-5;
    gradcheck_cmd->add_option("--tol", gc_tol, "relative error tolerance");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) cfg.load_file(config_path);
        auto override_int = [&](const char* key, long long v) {
            if (v >= 0) cfg.set(key, std::to_string(v));
        };
        auto override_double = [&](const char* key, double v) {
            if (v >= 0) {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.17g", v);
                cfg.set(key, buf);
            }
        };
        if (jobs >= 0) cfg.set("jobs", std::to_string(jobs));
        if (seed_set || std::getenv("GC_SEED")) {
            const std::string s = std::to_string(seed);
            for (const char* k : {"data.seed", "train.seed", "fit.seed", "appearance.seed"})
                cfg.set(k, s);
        }

        if (*synth) {
            override_int("data.outfits", outfits);
            override_int("data.frames", frames);
            override_int("data.stride", stride);
            return cmd_synth(out_dir, cfg, tmpl_base);
        }
        if (*train) {
            override_int("train.steps", steps);
            override_int("train.batch", batch);
            override_double("train.lr_code", lr_code);
            override_double("train.lr_net", lr_net);
            return cmd_train(manifest, out_ckpt, codes_out, cfg);
        }
        if (*fit) return cmd_fit(fit_ckpt, fit_masks, fit_cams, fit_pose, tmpl_base, fit_out, cfg);
        if (*drape)
            return cmd_drape(drape_ckpt, drape_codes, drape_outfit, drape_pose, tmpl_base,
                             drape_out, cfg.get_seed("train.seed"));
        if (*render)
            return cmd_render(render_ckpt, render_pose, render_cam, tmpl_base, render_rgb,
                              render_mask, cfg.get_seed("train.seed"));
        if (*appear)
            return cmd_appearance(app_ckpt, app_codes, app_outfit, app_frames, tmpl_base,
                                  app_out, cfg);
        if (*eval) return cmd_eval(eval_a, eval_b);
        if (*gradcheck_cmd) return cmd_gradcheck(gc_tol);
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 1;
}

namespace {

int cmd_gradcheck(double tol) {
    Rng rng(12345);
    bool all_ok = true;
    auto report = [&](const char* name, const GradCheckReport& rep) {
        std::printf("[%s] %s", rep.pass() ? "ok" : "FAIL", name);
        double worst = 0;
        for (const auto& e : rep.entries) worst = std::max(worst, e.max_rel_err);
        std::printf("  max rel err %.3g\n", worst);
        all_ok = all_ok && rep.pass();
    };

    {  // representative op chain
        Tensor a = Tensor::zeros({5, 4}), b = Tensor::zeros({4, 6}), c = Tensor::zeros({6});
        for (auto& v : a.data) v = rng.normal();
        for (auto& v : b.data) v = rng.normal();
        for (auto& v : c.data) v = 0.1 * rng.normal();
        a.requires_grad = b.requires_grad = c.requires_grad = true;
        report("ops (matmul/add_rows/tanh/leaky/mean)",
               grad_check(
                   [&](Tape& t) {
                       Var h = add_rows(matmul(t.param(a), t.param(b)), t.param(c));
                       return reduce_mean(mul(tanh_op(h), leaky_relu(h)));
                   },
                   {{"a", &a}, {"b", &b}, {"c", &c}}, tol));
    }
    {  // draping network at toy width
        DrapingModel model = DrapingModel::init(DrapingDims::toy(), rng);
        Tensor z = random_code(8, rng);
        z.requires_grad = true;
        PointCloud3 body = PointCloud3::with_count(16);
        for (auto& v : body.xyz) v = rng.normal();
        Rng seed(3);
        const SeedDraw draw = draw_seeds(body.count(), model.dims.out_points, seed);
        auto named = model.named_params();
        named.emplace_back("z", &z);
        report("draping network (toy width)",
               grad_check(
                   [&](Tape& t) {
                       Var out = deform_graph(t, model, body, draw, t.param(z, "z"), true);
                       return reduce_mean(mul(out, out));
                   },
                   named, tol));
    }
    {  // renderer head
        RendererHead head = RendererHead::init(3, rng);
        Tensor input = Tensor::zeros({3, 4, 4});
        for (auto& v : input.data) v = rng.normal();
        std::vector<std::pair<std::string, Tensor*>> named;
        int i = 0;
        for (Tensor* t : head.params()) named.emplace_back("h" + std::to_string(i++), t);
        report("renderer head",
               grad_check(
                   [&](Tape& t) {
                       return reduce_mean(render_head_graph(t, head, t.input(input), true));
                   },
                   named, tol));
    }
    {  // emd_approx gradient vs finite differences (frozen matching)
        PointCloud3 a = PointCloud3::with_count(10), b = PointCloud3::with_count(10);
        for (auto& v : a.xyz) v = rng.uniform();
        for (auto& v : b.xyz) v = rng.uniform();
        const EmdResult r = emd_approx(a, b);
        const std::vector<double> g = emd_grad(a, b, r.assignment.perm);
        double worst = 0;
        for (size_t i = 0; i < a.xyz.size(); ++i) {
            const double keep = a.xyz[i];
            const double h = 1e-6;
            a.xyz[i] = keep + h;
            const double fp = emd_frozen(a, b, r.assignment.perm);
            a.xyz[i] = keep - h;
            const double fm = emd_frozen(a, b, r.assignment.perm);
            a.xyz[i] = keep;
            const double num = (fp - fm) / (2 * h);
            worst = std::max(worst, std::fabs(num - g[i]) /
                                        std::max({std::fabs(num), std::fabs(g[i]), 1e-4}));
        }
        std::printf("[%s] emd_approx (frozen matching)  max rel err %.3g\n",
                    worst < tol ? "ok" : "FAIL", worst);
        all_ok = all_ok && worst < tol;
    }
    {  // chamfer2 gradient vs finite differences (frozen correspondences)
        Mask mask = Mask::zeros(20, 20);
        for (int i = 0; i < 25; ++i) mask.set(int(rng.below(20)), int(rng.below(20)), true);
        std::vector<std::array<double, 2>> pts;
        for (int i = 0; i < 7; ++i) pts.push_back({rng.uniform(0, 19), rng.uniform(0, 19)});
        const Chamfer2Eval ev = chamfer2_mask(pts, mask);
        const std::vector<double> g = chamfer2_grad(pts, ev);
        double worst = 0;
        for (size_t i = 0; i < pts.size(); ++i)
            for (int k = 0; k < 2; ++k) {
                auto probe = pts;
                const double h = 1e-6;
                probe[i][size_t(k)] += h;
                const double fp = chamfer2_frozen(probe, ev);
                probe[i][size_t(k)] -= 2 * h;
                const double fm = chamfer2_frozen(probe, ev);
                const double num = (fp - fm) / (2 * h);
                const double an = g[i * 2 + size_t(k)];
                worst = std::max(worst, std::fabs(num - an) /
                                            std::max({std::fabs(num), std::fabs(an), 1e-4}));
            }
        std::printf("[%s] chamfer2_mask (frozen correspondences)  max rel err %.3g\n",
                    worst < tol ? "ok" : "FAIL", worst);
        all_ok = all_ok && worst < tol;
    }

    std::printf("gradcheck: %s\n", all_ok ? "pass" : "FAIL");
    return all_ok ? 0 : 3;
}

}  // namespace
