#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gc/config.hpp"
#include "gc/error.hpp"
#include "gc/netpbm.hpp"
#include "gc/obj.hpp"
#include "gc/ply.hpp"
#include "gc/rng.hpp"

using namespace gc;
namespace fs = std::filesystem;

namespace {

std::string tmp_path(const std::string& name) {
    return (fs::temp_directory_path() / ("gc_io_" + name)).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("ply binary round trip is exact") {
    Rng rng(3);
    PlyData d;
    for (int i = 0; i < 8192 * 3; ++i) d.xyz.push_back(float(rng.normal()));
    const std::string p = tmp_path("cloud.ply");
    save_ply(p, d, true);
    PlyData r = load_ply(p);
    CHECK(r.xyz == d.xyz);
    CHECK_FALSE(r.has_faces);

    // saving the loaded data reproduces the bytes
    const std::string p2 = tmp_path("cloud2.ply");
    save_ply(p2, r, true);
    CHECK(slurp(p) == slurp(p2));
}

TEST_CASE("ply ascii minimal file") {
    const std::string p = tmp_path("one.ply");
    std::ofstream(p) << "ply\nformat ascii 1.0\nelement vertex 1\n"
                        "property float x\nproperty float y\nproperty float z\n"
                        "end_header\n0 0 0\n";
    PlyData d = load_ply(p);
    REQUIRE(d.vertex_count() == 1);
    CHECK(d.xyz == std::vector<float>{0, 0, 0});
}

TEST_CASE("ply truncated binary payload names byte counts") {
    PlyData d;
    d.xyz = {1, 2, 3, 4, 5, 6};
    const std::string p = tmp_path("trunc.ply");
    save_ply(p, d, true);
    // drop the last 5 bytes
    std::string bytes = slurp(p);
    std::ofstream(p, std::ios::binary) << bytes.substr(0, bytes.size() - 5);
    CHECK_THROWS_WITH_AS(load_ply(p), doctest::Contains("expected 24 bytes"), ParseError);
}

TEST_CASE("ply with groups and faces round trips") {
    PlyData d;
    d.xyz = {0, 0, 0, 1, 0, 0, 0, 1, 0};
    d.groups = {0, 2, 5};
    d.has_groups = true;
    d.faces = {{0, 1, 2}};
    d.has_faces = true;
    for (bool binary : {true, false}) {
        const std::string p = tmp_path(binary ? "g.ply" : "g_ascii.ply");
        save_ply(p, d, binary);
        PlyData r = load_ply(p);
        CHECK(r.groups == d.groups);
        CHECK(r.faces == d.faces);
        CHECK(r.xyz == d.xyz);
    }
}

TEST_CASE("ply rejects unsupported property types") {
    const std::string p = tmp_path("baddouble.ply");
    std::ofstream(p) << "ply\nformat ascii 1.0\nelement vertex 1\n"
                        "property double x\nproperty double y\nproperty double z\n"
                        "end_header\n0 0 0\n";
    CHECK_THROWS_AS(load_ply(p), ParseError);
}

TEST_CASE("p5 mask semantics") {
    const std::string p = tmp_path("m.pgm");
    {
        std::ofstream out(p, std::ios::binary);
        out << "P5\n2 2\n255\n";
        const unsigned char v[4] = {0, 255, 0, 255};
        out.write(reinterpret_cast<const char*>(v), 4);
    }
    Mask m = load_p5(p);
    CHECK(m.on == std::vector<std::uint8_t>{0, 1, 0, 1});

    // round trip
    save_p5(p, m);
    Mask m2 = load_p5(p);
    CHECK(m2.on == m.on);
}

TEST_CASE("p5 with wrong maxval is rejected") {
    const std::string p = tmp_path("m16.pgm");
    std::ofstream(p, std::ios::binary) << "P5\n1 1\n65535\n\0\0";
    CHECK_THROWS_WITH_AS(load_p5(p), doctest::Contains("maxval"), ParseError);
}

TEST_CASE("p6 round trip is byte-identical") {
    Rng rng(9);
    Image img = Image::zeros(7, 5);
    for (auto& v : img.pix) v = rng.uniform();
    const std::string p = tmp_path("img.ppm");
    save_p6(p, img);
    const std::string bytes = slurp(p);
    Image r = load_p6(p);
    save_p6(p, r);
    CHECK(slurp(p) == bytes);
}

TEST_CASE("obj import positions and fan triangulation") {
    const std::string p = tmp_path("quad.obj");
    std::ofstream(p) << "# comment\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
                        "vn 0 0 1\nf 1//1 2//1 3//1 4//1\n";
    TriMesh m = load_obj(p);
    CHECK(m.vertex_count() == 4);
    REQUIRE(m.faces.size() == 2);
    CHECK(m.faces[0] == std::array<int, 3>{0, 1, 2});
    CHECK(m.faces[1] == std::array<int, 3>{0, 2, 3});
}

TEST_CASE("config defaults, overrides, and unknown keys") {
    Config c;
    CHECK(c.get_int("fit.T") == 4);
    CHECK(c.get_int("fit.warmup") == 100);
    CHECK(c.get_double("train.lr_code") == doctest::Approx(0.01));

    const std::string p = tmp_path("conf.cfg");
    std::ofstream(p) << "# comment line\ntrain.steps = 123\nfit.tol=2e-4\n\n";
    c.load_file(p);
    CHECK(c.get_int("train.steps") == 123);
    CHECK(c.get_double("fit.tol") == doctest::Approx(2e-4));

    std::ofstream(p) << "train.sptes = 5\n";
    CHECK_THROWS_WITH_AS(c.load_file(p), doctest::Contains("unknown configuration key"),
                         ParseError);
    CHECK_THROWS_AS(c.set("no.such.key", "1"), ParseError);
    // every registry key has a usable default
    for (const auto& k : Config::registry()) CHECK_NOTHROW((void)c.get(k.key));
}
