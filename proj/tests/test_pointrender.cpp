#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "gc/camera.hpp"
#include "gc/error.hpp"
#include "gc/gradcheck.hpp"
#include "gc/raster.hpp"
#include "gc/renderer.hpp"
#include "gc/rng.hpp"

using namespace gc;

namespace {

Camera test_camera() {
    Camera cam;
    cam.fx = cam.fy = 100;
    cam.cx = cam.cy = 50;
    cam.width = cam.height = 101;
    return cam;
}

// Ray through pixel center (x, y): world origin is the camera center, and
// the camera-space direction has unit z, so the Moller-Trumbore t parameter
// IS the camera depth of the hit.
double raycast_depth(const TriMesh& mesh, const Camera& cam, int x, int y) {
    double origin[3], dir[3];
    const double dc[3] = {(x - cam.cx) / cam.fx, (y - cam.cy) / cam.fy, 1.0};
    for (int i = 0; i < 3; ++i) {
        origin[i] = 0;
        dir[i] = 0;
        for (int k = 0; k < 3; ++k) {
            origin[i] -= cam.rotation[size_t(k) * 3 + size_t(i)] * cam.translation[size_t(k)];
            dir[i] += cam.rotation[size_t(k) * 3 + size_t(i)] * dc[k];
        }
    }
    const auto hits = ray_mesh_hits(origin, dir, mesh);
    return hits.empty() ? std::numeric_limits<double>::infinity() : hits.front();
}

TriMesh random_blob(int triangles, Rng& rng, double z_near, double z_far) {
    TriMesh m;
    for (int t = 0; t < triangles; ++t) {
        const double cx = rng.uniform(-0.4, 0.4), cy = rng.uniform(-0.4, 0.4);
        const double cz = rng.uniform(z_near, z_far);
        const int v0 = m.vertex_count();
        for (int k = 0; k < 3; ++k)
            m.verts.insert(m.verts.end(), {cx + 0.15 * rng.normal(), cy + 0.15 * rng.normal(),
                                           cz + 0.1 * rng.normal()});
        m.faces.push_back({v0, v0 + 1, v0 + 2});
    }
    return m;
}

}  // namespace

TEST_CASE("project_points examples") {
    Camera cam = test_camera();
    PointCloud3 pts;
    pts.xyz = {0, 0, 2, 0.5, 0, 2, 0, 0, -1};
    const auto proj = project_points(pts, cam);
    CHECK(proj[0].u == doctest::Approx(50));
    CHECK(proj[0].v == doctest::Approx(50));
    CHECK(proj[0].depth == doctest::Approx(2));
    CHECK(proj[1].u == doctest::Approx(75));
    CHECK(proj[1].v == doctest::Approx(50));
    CHECK_FALSE(proj[1].behind);
    CHECK(proj[2].behind);
}

TEST_CASE("camera validation") {
    Camera cam = test_camera();
    cam.rotation[0] = 2;  // not orthonormal
    CHECK_THROWS_AS(cam.validate(), NumericError);
    Camera cam2 = test_camera();
    cam2.fx = -1;
    CHECK_THROWS_AS(cam2.validate(), NumericError);
}

TEST_CASE("body_depth_map basics") {
    Camera cam = test_camera();
    PosedBody empty;
    const dvec d0 = body_depth_map(empty, cam);
    for (double v : d0) CHECK(std::isinf(v));

    // fronto-parallel triangle at z=2 covering the full frame
    PosedBody body;
    body.mesh.verts = {-10, -10, 2, 10, -10, 2, 0, 10, 2};
    body.mesh.faces = {{0, 1, 2}};
    const dvec d = body_depth_map(body, cam);
    int covered = 0;
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            const double v = d[size_t(y) * cam.width + x];
            if (std::isinf(v)) continue;
            ++covered;
            CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
        }
    CHECK(covered > cam.width * cam.height / 2);
}

TEST_CASE("body_depth_map matches ray casting on random meshes") {
    Rng rng(41);
    Camera cam = test_camera();
    for (int trial = 0; trial < 3; ++trial) {
        PosedBody body;
        body.mesh = random_blob(60, rng, 1.5, 4.0);
        const dvec d = body_depth_map(body, cam);
        for (int y = 0; y < cam.height; y += 3)
            for (int x = 0; x < cam.width; x += 3) {
                const double want = raycast_depth(body.mesh, cam, x, y);
                const double got = d[size_t(y) * cam.width + x];
                if (std::isinf(want)) {
                    CHECK(std::isinf(got));
                } else {
                    CHECK(got == doctest::Approx(want).epsilon(1e-6));
                }
            }
    }
}

TEST_CASE("project_visible flags") {
    Camera cam = test_camera();
    PointCloud3 pts;
    pts.xyz = {0, 0, 2, 0, 0, -1, 5, 5, 2};  // on-axis, behind camera, out of frame
    const VisibleProjection vis = project_visible(pts, dvec{}, cam);
    REQUIRE(vis.index.size() == 1);
    CHECK(vis.index[0] == 0);

    // occluded by a body plane at z=2 covering its pixel
    PosedBody body;
    body.mesh.verts = {-10, -10, 2, 10, -10, 2, 0, 10, 2};
    body.mesh.faces = {{0, 1, 2}};
    PointCloud3 pt;
    pt.xyz = {0, 0, 3};
    CHECK(project_visible(pt, &body, cam).index.empty());
    PointCloud3 front;
    front.xyz = {0, 0, 1.5};
    CHECK(project_visible(front, &body, cam).index.size() == 1);
}

TEST_CASE("project_visible agrees with ray casting outside the depth band") {
    Rng rng(43);
    Camera cam = test_camera();
    PosedBody body;
    body.mesh = random_blob(500 / 3 + 1, rng, 1.5, 3.0);
    const dvec depth = body_depth_map(body, cam);

    PointCloud3 pts = PointCloud3::with_count(1000);
    for (int i = 0; i < 1000; ++i) {
        pts.p(i)[0] = rng.uniform(-0.5, 0.5);
        pts.p(i)[1] = rng.uniform(-0.5, 0.5);
        pts.p(i)[2] = rng.uniform(1.0, 4.0);
    }
    const VisibleProjection vis = project_visible(pts, depth, cam);
    std::vector<char> flag(1000, 0);
    for (int i : vis.index) flag[size_t(i)] = 1;

    const auto proj = project_points(pts, cam);
    int checked = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto& p = proj[size_t(i)];
        if (p.behind) {
            CHECK_FALSE(flag[size_t(i)]);
            continue;
        }
        const long px = std::lround(p.u), py = std::lround(p.v);
        if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) {
            CHECK_FALSE(flag[size_t(i)]);
            continue;
        }
        const double want_depth = raycast_depth(body.mesh, cam, int(px), int(py));
        if (std::fabs(p.depth - want_depth) < 2 * kOcclusionEps) continue;  // tie band
        ++checked;
        const bool want = p.depth < want_depth;
        CHECK(flag[size_t(i)] == (want ? 1 : 0));
    }
    CHECK(checked > 700);  // the band must not swallow the test
}

TEST_CASE("rasterize_descriptors splats, z-buffers, and keeps its invariant") {
    Camera cam = test_camera();
    Tensor desc = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
    PointCloud3 pts;
    // two points on the same pixel at depths 2 and 3, one elsewhere
    pts.xyz = {0, 0, 3, 0, 0, 2, -0.4, -0.4, 2};
    const RasterBuffer buf = rasterize_descriptors(pts, desc, dvec{}, cam);
    CHECK(buf.channel(0, 50, 50) == 3);  // depth-2 point wins
    CHECK(buf.channel(1, 50, 50) == 4);
    CHECK(buf.winner[size_t(50) * cam.width + 50] == 1);
    const long hw = long(cam.width) * cam.height;
    for (long at = 0; at < hw; ++at) {
        if (buf.coverage[size_t(at)]) continue;
        CHECK(std::isinf(buf.depth[size_t(at)]));
        for (int c = 0; c < 2; ++c) CHECK(buf.channels[size_t(c) * hw + at] == 0);
    }
    CHECK_THROWS_AS(rasterize_descriptors(pts, Tensor::matrix({{1, 2}}), dvec{}, cam),
                    NumericError);
}

TEST_CASE("rasterization equals a brute-force min scan and ignores point order") {
    Rng rng(47);
    Camera cam = test_camera();
    const int n = 400;
    PointCloud3 pts = PointCloud3::with_count(n);
    Tensor desc = Tensor::zeros({n, 4});
    for (int i = 0; i < n; ++i) {
        pts.p(i)[0] = rng.uniform(-0.5, 0.5);
        pts.p(i)[1] = rng.uniform(-0.5, 0.5);
        pts.p(i)[2] = rng.uniform(1.0, 3.0);
        for (int c = 0; c < 4; ++c) desc.at(i, c) = rng.normal();
    }
    const RasterBuffer buf = rasterize_descriptors(pts, desc, dvec{}, cam);

    // brute force per pixel
    const auto proj = project_points(pts, cam);
    const size_t hw = size_t(cam.width) * cam.height;
    std::vector<int> want(hw, -1);
    for (int i = 0; i < n; ++i) {
        if (proj[size_t(i)].behind) continue;
        const long px = std::lround(proj[size_t(i)].u), py = std::lround(proj[size_t(i)].v);
        if (px < 0 || px >= cam.width || py < 0 || py >= cam.height) continue;
        int& w = want[size_t(py) * cam.width + size_t(px)];
        if (w < 0 || proj[size_t(i)].depth < proj[size_t(w)].depth) w = i;
    }
    for (size_t at = 0; at < hw; ++at) CHECK(buf.winner[at] == want[at]);

    // permuting points (with their descriptors) leaves the buffer unchanged
    std::vector<int> perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) perm[size_t(i)] = i;
    for (int i = n - 1; i > 0; --i) std::swap(perm[size_t(i)], perm[rng.below(std::uint64_t(i) + 1)]);
    PointCloud3 pp = PointCloud3::with_count(n);
    Tensor pd = Tensor::zeros({n, 4});
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < 3; ++k) pp.p(i)[k] = pts.p(perm[size_t(i)])[k];
        for (int c = 0; c < 4; ++c) pd.at(i, c) = desc.at(perm[size_t(i)], c);
    }
    const RasterBuffer buf2 = rasterize_descriptors(pp, pd, dvec{}, cam);
    CHECK(buf2.channels == buf.channels);
    CHECK(buf2.coverage == buf.coverage);
    CHECK(buf2.depth == buf.depth);
}

TEST_CASE("occlusion culling is monotone in the occluder") {
    Rng rng(53);
    Camera cam = test_camera();
    PosedBody full;
    full.mesh = random_blob(80, rng, 1.4, 2.4);
    PosedBody half = full;
    half.mesh.faces.resize(full.mesh.faces.size() / 2);

    PointCloud3 pts = PointCloud3::with_count(500);
    for (int i = 0; i < 500; ++i) {
        pts.p(i)[0] = rng.uniform(-0.5, 0.5);
        pts.p(i)[1] = rng.uniform(-0.5, 0.5);
        pts.p(i)[2] = rng.uniform(1.0, 4.0);
    }
    const VisibleProjection vf = project_visible(pts, &full, cam);
    const VisibleProjection vh = project_visible(pts, &half, cam);
    // removing body triangles never decreases the visible set
    std::vector<char> in_half(500, 0);
    for (int i : vh.index) in_half[size_t(i)] = 1;
    for (int i : vf.index) CHECK(in_half[size_t(i)]);
}

TEST_CASE("render_head output shape, zero case, and determinism") {
    Rng rng(59);
    RendererHead head = RendererHead::init(4, rng);
    for (auto* t : head.params())
        for (auto& v : t->data) v = 0;  // zero weights and biases

    RasterBuffer buf;
    buf.width = 7;
    buf.height = 5;
    buf.dim = 3;
    buf.channels.assign(size_t(3) * 35, 0.0);
    buf.coverage.assign(35, 0);
    buf.depth.assign(35, std::numeric_limits<double>::infinity());
    buf.winner.assign(35, -1);

    const RenderOutput out = render_head_eval(head, buf);
    CHECK(out.rgb.width == 7);
    CHECK(out.rgb.height == 5);
    CHECK(out.mask.size() == 35);
    for (double v : out.rgb.pix) CHECK(v == 0.0);
    for (double v : out.mask) CHECK(v == doctest::Approx(0.5));

    RendererHead head2 = RendererHead::init(4, rng);
    const RenderOutput a = render_head_eval(head2, buf);
    const RenderOutput b = render_head_eval(head2, buf);
    CHECK(a.rgb.pix == b.rgb.pix);
    CHECK(a.mask == b.mask);
}

TEST_CASE("render_head gradients match finite differences") {
    Rng rng(61);
    RendererHead head = RendererHead::init(3, rng);
    Tensor input = Tensor::zeros({3, 4, 4});
    for (auto& v : input.data) v = rng.normal();

    std::vector<std::pair<std::string, Tensor*>> named;
    const char* names[6] = {"w0", "b0", "w1", "b1", "w2", "b2"};
    auto params = head.params();
    for (size_t i = 0; i < params.size(); ++i) named.emplace_back(names[i], params[i]);

    GradCheckReport rep = grad_check(
        [&](Tape& tape) {
            Var out = render_head_graph(tape, head, tape.input(input), true);
            return reduce_mean(out);
        },
        named, 1e-5);
    INFO(rep.summary());
    CHECK(rep.pass());
}
