#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include "gc/body.hpp"
#include "gc/dataset.hpp"
#include "gc/error.hpp"
#include "gc/garment.hpp"
#include "gc/mesh.hpp"
#include "gc/rng.hpp"

using namespace gc;
namespace fs = std::filesystem;

namespace {

// Tiny rig for the micro LBS cases: an anchor vertex pinned at each joint
// (so the regressor reproduces the joint) plus a probe vertex at (1,0,0).
BodyTemplate micro_template(int joints, double w_root, double w_child) {
    BodyTemplate t;
    t.mesh.verts = {0, 0, 0, 1, 0, 0, 0, 0, 1};
    t.mesh.faces = {{0, 1, 2}};
    t.edges = unique_edges(t.mesh.faces);
    t.groups = {0, 0, 0};
    t.shape_count = 0;
    if (joints == 1) {
        t.parents = {-1};
        t.joint_names = {"root"};
        t.skin_weights = {1, 1, 1};  // V x 1
        t.joint_reg = {1, 0, 0};
        t.joints = {0, 0, 0};
    } else {
        t.parents = {-1, 0};
        t.joint_names = {"root", "child"};
        // all verts split w_root / w_child
        t.skin_weights = {w_root, w_child, w_root, w_child, w_root, w_child};
        t.joint_reg = {1, 0, 0, 1, 0, 0};  // both joints regress to the anchor
        t.joints = {0, 0, 0, 0, 0, 0};
    }
    t.validate();
    return t;
}

PoseShapeParams zero_pose(const BodyTemplate& t) {
    PoseShapeParams p;
    p.pose.assign(size_t(t.joint_count()) * 3, 0.0);
    p.shape.assign(size_t(t.shape_count), 0.0);
    return p;
}

}  // namespace

TEST_CASE("lbs identity pose reproduces the template exactly") {
    const BodyTemplate t = default_template();
    const PosedBody body = pose_body(t, zero_pose(t));
    CHECK(body.mesh.verts == t.mesh.verts);
}

TEST_CASE("lbs rotates a fully weighted vertex") {
    const BodyTemplate t = micro_template(1, 1, 0);
    PoseShapeParams p = zero_pose(t);
    p.pose = {0, 0, M_PI / 2};  // 90 degrees about +z
    const PosedBody body = pose_body(t, p);
    CHECK(body.mesh.verts[3] == doctest::Approx(0).epsilon(1e-12));   // x of probe
    CHECK(body.mesh.verts[4] == doctest::Approx(1).epsilon(1e-12));   // y of probe
    CHECK(body.mesh.verts[5] == doctest::Approx(0).epsilon(1e-12));
}

TEST_CASE("lbs blends joint transforms per the skinning sum") {
    const BodyTemplate t = micro_template(2, 0.5, 0.5);
    PoseShapeParams p = zero_pose(t);
    p.pose = {0, 0, 0, 0, 0, M_PI / 2};  // root identity, child rotated about +z
    const PosedBody body = pose_body(t, p);
    // direct evaluation of the skinning sum for the probe (1,0,0):
    // 0.5 * I * v + 0.5 * Rz(90) * v = (0.5, 0.5, 0)
    CHECK(body.mesh.verts[3] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(body.mesh.verts[4] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(body.mesh.verts[5] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("pose_body rejects a cyclic hierarchy") {
    BodyTemplate t = micro_template(2, 0.5, 0.5);
    t.parents = {1, 0};  // cycle
    CHECK_THROWS_AS(pose_body(t, zero_pose(t)), NumericError);
}

TEST_CASE("root translation is an exact equivariance") {
    const BodyTemplate t = default_template();
    Rng rng(5);
    PoseShapeParams p = zero_pose(t);
    for (auto& v : p.pose) v = 0.2 * rng.normal();
    for (auto& v : p.shape) v = rng.normal();
    const PosedBody a = pose_body(t, p);
    p.root_translation = {0.3, -0.1, 0.25};
    const PosedBody b = pose_body(t, p);
    for (int v = 0; v < a.mesh.vertex_count(); ++v) {
        CHECK(b.mesh.v(v)[0] - a.mesh.v(v)[0] == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(b.mesh.v(v)[1] - a.mesh.v(v)[1] == doctest::Approx(-0.1).epsilon(1e-12));
        CHECK(b.mesh.v(v)[2] - a.mesh.v(v)[2] == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("body_point_cloud count is template-determined and pose-invariant") {
    const BodyTemplate t = default_template();
    int kept_v = 0;
    for (int g : t.groups) kept_v += g == kGroupTorsoLimbs;
    int kept_e = 0;
    for (const auto& e : t.edges)
        kept_e += t.groups[size_t(e[0])] == kGroupTorsoLimbs &&
                  t.groups[size_t(e[1])] == kGroupTorsoLimbs;
    const int expected = kept_v + kept_e;

    const PosedBody rest = pose_body(t, zero_pose(t));
    CHECK(body_point_cloud(rest).count() == expected);

    Rng rng(11);
    PoseShapeParams p = zero_pose(t);
    for (auto& v : p.pose) v = 0.3 * rng.normal();
    CHECK(body_point_cloud(pose_body(t, p)).count() == expected);
}

TEST_CASE("body_point_cloud single kept edge includes the midpoint") {
    BodyTemplate t = micro_template(1, 1, 0);
    t.groups = {0, 0, 1};  // drop the third vertex; kept edge is (0,1)
    const PosedBody body = pose_body(t, zero_pose(t));
    const PointCloud3 c = body_point_cloud(body);
    REQUIRE(c.count() == 3);  // two vertices + one midpoint
    CHECK(c.xyz[6] == doctest::Approx(0.5));
    CHECK(c.xyz[7] == doctest::Approx(0.0));
}

TEST_CASE("body_point_cloud with everything cropped is an error") {
    BodyTemplate t = micro_template(1, 1, 0);
    t.groups = {1, 1, 1};  // all head
    const PosedBody body = pose_body(t, zero_pose(t));
    CHECK_THROWS_AS(body_point_cloud(body), NumericError);
}

TEST_CASE("sample_surface stays on a single triangle and is deterministic") {
    TriMesh m;
    m.verts = {0, 0, 0, 2, 0, 0, 0, 2, 0};
    m.faces = {{0, 1, 2}};
    Rng r1(7), r2(7);
    const PointCloud3 a = sample_surface(m, 500, r1);
    const PointCloud3 b = sample_surface(m, 500, r2);
    CHECK(a.xyz == b.xyz);
    for (int i = 0; i < a.count(); ++i) {
        const double x = a.p(i)[0], y = a.p(i)[1];
        CHECK(x >= -1e-12);
        CHECK(y >= -1e-12);
        CHECK(x / 2 + y / 2 <= 1 + 1e-12);  // inside the triangle
        CHECK(a.p(i)[2] == 0);
    }
}

TEST_CASE("sample_surface splits counts by area (binomial bound)") {
    TriMesh m;
    // areas 1 and 3
    m.verts = {0, 0, 0, 2, 0, 0, 0, 1, 0,  10, 0, 0, 13, 0, 0, 10, 2, 0};
    m.faces = {{0, 1, 2}, {3, 4, 5}};
    Rng rng(13);
    const PointCloud3 c = sample_surface(m, 40000, rng);
    int second = 0;
    for (int i = 0; i < c.count(); ++i) second += c.p(i)[0] > 5;
    CHECK(second > 29500);
    CHECK(second < 30500);
}

TEST_CASE("sample_surface per-triangle counts pass a chi-square test") {
    // k=6 triangles with distinct areas; critical value chi2(5 dof, p=0.01)
    TriMesh m;
    std::vector<double> areas;
    for (int t = 0; t < 6; ++t) {
        const double base = 1.0 + t;  // area = base/2, offset in y
        const double y0 = 10.0 * t;
        const int v0 = m.vertex_count();
        m.verts.insert(m.verts.end(), {0, y0, 0, base, y0, 0, 0, y0 + 1, 0});
        m.faces.push_back({v0, v0 + 1, v0 + 2});
        areas.push_back(base / 2);
    }
    const double total = 21.0 / 2;
    Rng rng(17);
    const int n = 100000;
    const PointCloud3 c = sample_surface(m, n, rng);
    std::vector<int> counts(6, 0);
    for (int i = 0; i < c.count(); ++i) counts[size_t(int(c.p(i)[1] / 10.0 + 0.5))]++;
    double chi2 = 0;
    for (int t = 0; t < 6; ++t) {
        const double expect = n * areas[size_t(t)] / total;
        chi2 += (counts[size_t(t)] - expect) * (counts[size_t(t)] - expect) / expect;
    }
    CHECK(chi2 < 15.0863);  // chi2_{0.99, 5}
}

TEST_CASE("sample_surface rejects degenerate meshes") {
    TriMesh m;
    m.verts = {0, 0, 0, 1, 1, 1, 2, 2, 2};  // collinear
    m.faces = {{0, 1, 2}};
    Rng rng(1);
    CHECK_THROWS_AS(sample_surface(m, 10, rng), NumericError);
}

TEST_CASE("garment offset band: flare 0 keeps vertices near the body") {
    const BodyTemplate t = default_template();
    const PosedBody body = pose_body(t, zero_pose(t));
    GarmentStyle s;
    s.kind = GarmentStyle::kPants;
    s.flare = 0.0;
    s.length = 0.8;
    s.offset = 0.02;
    const TriMesh g = synth_garment(s, body);
    REQUIRE(g.vertex_count() > 100);
    for (int v = 0; v < g.vertex_count(); ++v) {
        const double d = point_mesh_distance(g.v(v), body.mesh);
        CHECK(d >= 0.015);
        CHECK(d <= 0.035);
    }
}

TEST_CASE("longer skirts reach strictly lower") {
    const BodyTemplate t = default_template();
    const PosedBody body = pose_body(t, zero_pose(t));
    GarmentStyle s;
    s.kind = GarmentStyle::kSkirt;
    s.length = 1.0;
    const TriMesh g1 = synth_garment(s, body);
    s.length = 0.5;
    const TriMesh g2 = synth_garment(s, body);
    auto lowest = [](const TriMesh& m) {
        double y = 1e9;
        for (int v = 0; v < m.vertex_count(); ++v) y = std::min(y, m.v(v)[1]);
        return y;
    };
    CHECK(lowest(g1) < lowest(g2));
}

TEST_CASE("synth_garment is deterministic") {
    const BodyTemplate t = default_template();
    Rng rng(3);
    PoseShapeParams p = zero_pose(t);
    for (auto& v : p.pose) v = 0.2 * rng.normal();
    const PosedBody body = pose_body(t, p);
    GarmentStyle s;
    s.kind = GarmentStyle::kDress;
    const TriMesh a = synth_garment(s, body);
    const TriMesh b = synth_garment(s, body);
    CHECK(a.verts == b.verts);
    CHECK(a.faces == b.faces);
}

TEST_CASE("make_dataset applies the stride and the fixed cloud size") {
    const BodyTemplate t = default_template();
    DatasetConfig cfg;
    cfg.outfits = 2;
    cfg.frames = 50;
    cfg.stride = 10;
    cfg.seed = 21;
    const TrainingSet set = make_dataset(t, cfg);
    REQUIRE(set.outfits.size() == 2);
    for (const auto& o : set.outfits) {
        CHECK(o.frames.size() == 5);
        for (const auto& f : o.frames) CHECK(f.target.count() == kGarmentPoints);
    }
}

TEST_CASE("dataset serialization is byte-identical under a fixed seed") {
    const BodyTemplate t = default_template();
    DatasetConfig cfg;
    cfg.outfits = 1;
    cfg.frames = 20;
    cfg.stride = 10;
    cfg.seed = 77;
    const auto dir1 = (fs::temp_directory_path() / "gc_ds1").string();
    const auto dir2 = (fs::temp_directory_path() / "gc_ds2").string();
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    save_dataset(make_dataset(t, cfg), dir1);
    save_dataset(make_dataset(t, cfg), dir2);
    for (const auto& entry : fs::directory_iterator(dir1)) {
        const auto other = fs::path(dir2) / entry.path().filename();
        REQUIRE(fs::exists(other));
        std::ifstream a(entry.path(), std::ios::binary), b(other, std::ios::binary);
        const std::string sa(std::istreambuf_iterator<char>(a), {});
        const std::string sb(std::istreambuf_iterator<char>(b), {});
        CHECK(sa == sb);
    }

    // round trip through the manifest
    const TrainingSet r = load_dataset((fs::path(dir1) / "manifest.tsv").string());
    REQUIRE(r.outfits.size() == 1);
    CHECK(r.outfits[0].frames.size() == 2);
    CHECK(r.stride == 10);
    CHECK(r.outfits[0].frames[0].target.count() == kGarmentPoints);
}

TEST_CASE("template save/load round trip is exact") {
    const BodyTemplate t = default_template();
    const auto ply = (fs::temp_directory_path() / "gc_tmpl.ply").string();
    const auto rig = (fs::temp_directory_path() / "gc_tmpl.rig").string();
    save_template(t, ply, rig);
    const BodyTemplate r = load_template(ply, rig);
    CHECK(r.mesh.verts == t.mesh.verts);
    CHECK(r.mesh.faces == t.mesh.faces);
    CHECK(r.groups == t.groups);
    CHECK(r.joints == t.joints);
    CHECK(r.parents == t.parents);
    CHECK(r.skin_weights == t.skin_weights);
    CHECK(r.joint_reg == t.joint_reg);
    CHECK(r.shape_dirs == t.shape_dirs);
}

TEST_CASE("default template is a sane humanoid") {
    const BodyTemplate t = default_template();
    CHECK(t.joint_count() == 16);
    CHECK(t.shape_count == 4);
    CHECK(t.vertex_count() > 600);
    std::set<int> seen(t.groups.begin(), t.groups.end());
    CHECK(seen.count(kGroupHead) == 1);
    CHECK(seen.count(kGroupHandLeft) == 1);
    CHECK(seen.count(kGroupFootRight) == 1);
}
