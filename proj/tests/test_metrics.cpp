#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gc/distance_transform.hpp"
#include "gc/error.hpp"
#include "gc/metrics.hpp"
#include "gc/rng.hpp"

using namespace gc;

namespace {

PointCloud3 random_cloud(int n, Rng& rng) {
    PointCloud3 c = PointCloud3::with_count(n);
    for (auto& v : c.xyz) v = rng.uniform();
    return c;
}

// independent double-loop oracle (same accumulation order as chamfer3)
double chamfer3_brute(const PointCloud3& a, const PointCloud3& b) {
    auto one_side = [](const PointCloud3& u, const PointCloud3& v) {
        double sum = 0;
        for (int i = 0; i < u.count(); ++i) {
            double best = 1e300;
            for (int j = 0; j < v.count(); ++j) {
                double d2 = 0;
                for (int k = 0; k < 3; ++k) {
                    const double t = u.p(i)[k] - v.p(j)[k];
                    d2 += t * t;
                }
                best = std::min(best, d2);
            }
            sum += best;
        }
        return sum / double(u.count());
    };
    return one_side(a, b) + one_side(b, a);
}

}  // namespace

TEST_CASE("emd_exact basics") {
    PointCloud3 a, b;
    a.xyz = {0, 0, 0};
    b.xyz = {1, 0, 0};
    const Assignment r = emd_exact(a, b);
    CHECK(r.cost == doctest::Approx(1.0));

    PointCloud3 c, d;
    c.xyz = {0, 0, 0, 2, 0, 0};
    d.xyz = {2, 0, 0, 0, 0, 0};
    const Assignment s = emd_exact(c, d);
    CHECK(s.cost == doctest::Approx(0.0));
    CHECK(s.perm == std::vector<int>{1, 0});

    Rng rng(3);
    const PointCloud3 e = random_cloud(32, rng);
    CHECK(emd_exact(e, e).cost == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("emd_exact guards") {
    PointCloud3 a = PointCloud3::with_count(2), b = PointCloud3::with_count(3);
    CHECK_THROWS_AS(emd_exact(a, b), NumericError);
    PointCloud3 big = PointCloud3::with_count(300);
    CHECK_THROWS_AS(emd_exact(big, big), NumericError);
}

TEST_CASE("emd_approx trivial cases") {
    Rng rng(5);
    const PointCloud3 a = random_cloud(64, rng);
    CHECK(emd_approx(a, a).value < 1e-8);

    PointCloud3 s1, s2;
    s1.xyz = {0, 0, 0};
    s2.xyz = {0, 1, 0};
    CHECK(emd_approx(s1, s2).value == doctest::Approx(1.0));
}

TEST_CASE("emd_approx is one-sided and close to the Hungarian oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        const PointCloud3 a = random_cloud(64, rng);
        const PointCloud3 b = random_cloud(64, rng);
        const double exact = emd_exact(a, b).cost;
        const double approx = emd_approx(a, b).value;
        CHECK(approx >= exact - 1e-12);
        CHECK(approx <= exact * 1.05);
    }
}

TEST_CASE("emd invariances") {
    Rng rng(17);
    const PointCloud3 a = random_cloud(48, rng);
    const PointCloud3 b = random_cloud(48, rng);
    const double base = emd_approx(a, b).value;

    // symmetry
    CHECK(emd_approx(b, a).value == doctest::Approx(base).epsilon(1e-9));

    // translation invariance
    PointCloud3 at = a, bt = b;
    for (int i = 0; i < at.count(); ++i)
        for (int k = 0; k < 3; ++k) {
            at.p(i)[k] += k == 0 ? 12.25 : -3.5;
            bt.p(i)[k] += k == 0 ? 12.25 : -3.5;
        }
    CHECK(std::fabs(emd_approx(at, bt).value - base) < 1e-9);

    // scaling by s scales the value by s
    PointCloud3 as = a, bs = b;
    for (auto& v : as.xyz) v *= 3.0;
    for (auto& v : bs.xyz) v *= 3.0;
    CHECK(emd_approx(as, bs).value == doctest::Approx(3.0 * base).epsilon(1e-6));
}

TEST_CASE("emd gradient matches finite differences with frozen matching") {
    Rng rng(23);
    PointCloud3 a = random_cloud(12, rng);
    const PointCloud3 b = random_cloud(12, rng);
    const EmdResult r = emd_approx(a, b);
    const std::vector<double> g = emd_grad(a, b, r.assignment.perm);
    const double h = 1e-6;
    for (size_t i = 0; i < a.xyz.size(); ++i) {
        const double keep = a.xyz[i];
        a.xyz[i] = keep + h;
        const double fp = emd_frozen(a, b, r.assignment.perm);
        a.xyz[i] = keep - h;
        const double fm = emd_frozen(a, b, r.assignment.perm);
        a.xyz[i] = keep;
        const double num = (fp - fm) / (2 * h);
        CHECK(std::fabs(num - g[i]) / std::max({std::fabs(num), std::fabs(g[i]), 1e-4}) < 1e-5);
    }
}

TEST_CASE("chamfer3 basics and brute-force equality") {
    PointCloud3 a, b;
    a.xyz = {0, 0, 0};
    b.xyz = {0, 3, 4};
    CHECK(chamfer3(a, b) == doctest::Approx(50.0));
    CHECK(chamfer3(a, a) == doctest::Approx(0.0));
    CHECK_THROWS_AS(chamfer3(PointCloud3{}, a), NumericError);

    Rng rng(29);
    for (int trial = 0; trial < 10; ++trial) {
        const PointCloud3 u = random_cloud(97, rng);
        const PointCloud3 v = random_cloud(64, rng);
        CHECK(chamfer3(u, v) == chamfer3_brute(u, v));  // exact equality
    }

    // scaling by s scales the value by s^2
    const PointCloud3 u = random_cloud(40, rng), v = random_cloud(40, rng);
    PointCloud3 us = u, vs = v;
    for (auto& x : us.xyz) x *= 2.0;
    for (auto& x : vs.xyz) x *= 2.0;
    CHECK(chamfer3(us, vs) == doctest::Approx(4.0 * chamfer3(u, v)).epsilon(1e-9));
}

TEST_CASE("distance transform equals brute force exactly") {
    Rng rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        Mask m = Mask::zeros(37, 23);
        for (auto& b : m.on) b = rng.uniform() < 0.07 ? 1 : 0;
        if (m.foreground_count() == 0) m.set(5, 5, true);
        const DistanceTransform dt = distance_transform(m);
        for (int y = 0; y < m.height; ++y)
            for (int x = 0; x < m.width; ++x) {
                double best = 1e300;
                for (int yy = 0; yy < m.height; ++yy)
                    for (int xx = 0; xx < m.width; ++xx)
                        if (m.at(yy, xx)) {
                            const double d2 =
                                double(x - xx) * (x - xx) + double(y - yy) * (y - yy);
                            best = std::min(best, d2);
                        }
                CHECK(dt.at(y, x) == best);
                // the recorded site is a foreground pixel at exactly that distance
                const int s = dt.site_at(y, x);
                REQUIRE(s >= 0);
                const int sx = s % m.width, sy = s / m.width;
                CHECK(m.at(sy, sx));
                CHECK(double(x - sx) * (x - sx) + double(y - sy) * (y - sy) == dt.at(y, x));
            }
    }
}

TEST_CASE("chamfer2 basics") {
    Mask m = Mask::zeros(16, 16);
    m.set(5, 5, true);
    const Chamfer2Eval zero = chamfer2_mask({{5.0, 5.0}}, m);
    CHECK(zero.value == doctest::Approx(0.0));

    Mask m2 = Mask::zeros(16, 16);
    m2.set(4, 3, true);  // pixel (x=3, y=4)
    const Chamfer2Eval ev = chamfer2_mask({{0.0, 0.0}}, m2);
    CHECK(ev.value == doctest::Approx(50.0));  // 25 + 25

    CHECK_THROWS_AS(chamfer2_mask({}, m), NumericError);
    CHECK_THROWS_AS(chamfer2_mask({{1.0, 1.0}}, Mask::zeros(4, 4)), NumericError);
}

TEST_CASE("chamfer2 gradient matches finite differences with frozen correspondences") {
    Rng rng(37);
    Mask m = Mask::zeros(24, 24);
    for (int i = 0; i < 30; ++i) m.set(int(rng.below(24)), int(rng.below(24)), true);
    std::vector<std::array<double, 2>> pts;
    for (int i = 0; i < 9; ++i) pts.push_back({rng.uniform(0, 23), rng.uniform(0, 23)});
    const Chamfer2Eval ev = chamfer2_mask(pts, m);
    const std::vector<double> g = chamfer2_grad(pts, ev);
    const double h = 1e-6;
    for (size_t i = 0; i < pts.size(); ++i)
        for (int k = 0; k < 2; ++k) {
            auto probe = pts;
            probe[i][size_t(k)] += h;
            const double fp = chamfer2_frozen(probe, ev);
            probe[i][size_t(k)] -= 2 * h;
            const double fm = chamfer2_frozen(probe, ev);
            const double num = (fp - fm) / (2 * h);
            const double an = g[i * 2 + size_t(k)];
            CHECK(std::fabs(num - an) / std::max({std::fabs(num), std::fabs(an), 1e-4}) < 1e-5);
        }
}

TEST_CASE("dice loss values") {
    Mask gt = Mask::zeros(8, 8);
    for (int i = 0; i < 5; ++i) gt.set(i, i, true);
    std::vector<double> pred(64, 0.0);
    for (int i = 0; i < 5; ++i) pred[size_t(i) * 8 + i] = 1.0;
    // identical: 1 - (2k+1)/(2k+1) = 0
    CHECK(dice_loss(pred, gt) == doctest::Approx(0.0));

    // disjoint with k foreground each: 1 - 1/(2k+1)
    std::vector<double> off(64, 0.0);
    for (int i = 0; i < 5; ++i) off[size_t(i) * 8 + (i + 2)] = 1.0;
    CHECK(dice_loss(off, gt) == doctest::Approx(1.0 - 1.0 / 11.0));

    // 2 px pred, 2 px gt, 1 overlapping: with s=1 the loss is 1 - 3/5;
    // the smoothing-free limit of the same counts is 1/2.
    Mask g2 = Mask::zeros(4, 4);
    g2.set(0, 0, true);
    g2.set(0, 1, true);
    std::vector<double> p2(16, 0.0);
    p2[1] = 1.0;
    p2[2] = 1.0;
    CHECK(dice_loss(p2, g2) == doctest::Approx(1.0 - 3.0 / 5.0));

    // symmetric in pred/gt for hard masks
    std::vector<double> gt_as_pred(64, 0.0);
    for (size_t i = 0; i < 64; ++i) gt_as_pred[i] = gt.on[i];
    Mask off_as_mask = Mask::zeros(8, 8);
    for (size_t i = 0; i < 64; ++i) off_as_mask.on[i] = off[i] > 0.5;
    CHECK(dice_loss(off, gt) == doctest::Approx(dice_loss(gt_as_pred, off_as_mask)));

    CHECK_THROWS_AS(dice_loss(std::vector<double>(4, 0.0), gt), NumericError);
}
