#include "gc/mesh.hpp"

#include <algorithm>
#include <cmath>

#include "gc/error.hpp"

namespace gc {
namespace {

inline void vsub(const double* a, const double* b, double* out) {
    out[0] = a[0] - b[0];
    out[1] = a[1] - b[1];
    out[2] = a[2] - b[2];
}
inline void vcross(const double* a, const double* b, double* out) {
    out[0] = a[1] * b[2] - a[2] * b[1];
    out[1] = a[2] * b[0] - a[0] * b[2];
    out[2] = a[0] * b[1] - a[1] * b[0];
}
inline double vdot(const double* a, const double* b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

}  // namespace

std::vector<std::array<int, 2>> unique_edges(const std::vector<std::array<int, 3>>& faces) {
    std::vector<std::array<int, 2>> edges;
    edges.reserve(faces.size() * 3);
    for (const auto& f : faces)
        for (int k = 0; k < 3; ++k) {
            int a = f[k], b = f[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            edges.push_back({a, b});
        }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    return edges;
}

double triangle_area(const double* a, const double* b, const double* c) {
    double ab[3], ac[3], n[3];
    vsub(b, a, ab);
    vsub(c, a, ac);
    vcross(ab, ac, n);
    return 0.5 * std::sqrt(vdot(n, n));
}

PointCloud3 sample_surface(const TriMesh& mesh, int n, Rng& rng) {
    if (n <= 0) throw NumericError("sample_surface: n must be > 0");
    std::vector<double> cdf(mesh.faces.size());
    double total = 0;
    for (size_t i = 0; i < mesh.faces.size(); ++i) {
        const auto& f = mesh.faces[i];
        total += triangle_area(mesh.v(f[0]), mesh.v(f[1]), mesh.v(f[2]));
        cdf[i] = total;
    }
    if (total <= 0) throw NumericError("sample_surface: all triangles degenerate");

    PointCloud3 cloud = PointCloud3::with_count(n);
    for (int i = 0; i < n; ++i) {
        const double r = rng.uniform() * total;
        const size_t t = size_t(std::lower_bound(cdf.begin(), cdf.end(), r) - cdf.begin());
        const auto& f = mesh.faces[std::min(t, mesh.faces.size() - 1)];
        double u = rng.uniform(), v = rng.uniform();
        if (u + v > 1) {
            u = 1 - u;
            v = 1 - v;
        }
        const double w = 1 - u - v;
        const double *a = mesh.v(f[0]), *b = mesh.v(f[1]), *c = mesh.v(f[2]);
        for (int k = 0; k < 3; ++k) cloud.xyz[size_t(i) * 3 + k] = w * a[k] + u * b[k] + v * c[k];
    }
    return cloud;
}

double point_triangle_dist2(const double* q, const double* a, const double* b, const double* c) {
    // Ericson, Real-Time Collision Detection, closest point on triangle.
    double ab[3], ac[3], aq[3];
    vsub(b, a, ab);
    vsub(c, a, ac);
    vsub(q, a, aq);
    const double d1 = vdot(ab, aq), d2 = vdot(ac, aq);
    auto dist2_to = [&](double px, double py, double pz) {
        const double dx = q[0] - px, dy = q[1] - py, dz = q[2] - pz;
        return dx * dx + dy * dy + dz * dz;
    };
    if (d1 <= 0 && d2 <= 0) return dist2_to(a[0], a[1], a[2]);

    double bq[3];
    vsub(q, b, bq);
    const double d3 = vdot(ab, bq), d4 = vdot(ac, bq);
    if (d3 >= 0 && d4 <= d3) return dist2_to(b[0], b[1], b[2]);

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) {
        const double t = d1 / (d1 - d3);
        return dist2_to(a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]);
    }

    double cq[3];
    vsub(q, c, cq);
    const double d5 = vdot(ab, cq), d6 = vdot(ac, cq);
    if (d6 >= 0 && d5 <= d6) return dist2_to(c[0], c[1], c[2]);

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) {
        const double t = d2 / (d2 - d6);
        return dist2_to(a[0] + t * ac[0], a[1] + t * ac[1], a[2] + t * ac[2]);
    }

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
        const double t = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return dist2_to(b[0] + t * (c[0] - b[0]), b[1] + t * (c[1] - b[1]),
                        b[2] + t * (c[2] - b[2]));
    }

    const double denom = 1.0 / (va + vb + vc);
    const double v = vb * denom, w = vc * denom;
    return dist2_to(a[0] + ab[0] * v + ac[0] * w, a[1] + ab[1] * v + ac[1] * w,
                    a[2] + ab[2] * v + ac[2] * w);
}

double point_mesh_distance(const double* q, const TriMesh& mesh) {
    if (mesh.faces.empty()) throw NumericError("point_mesh_distance: empty mesh");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : mesh.faces)
        best = std::min(best, point_triangle_dist2(q, mesh.v(f[0]), mesh.v(f[1]), mesh.v(f[2])));
    return std::sqrt(best);
}

std::vector<double> ray_mesh_hits(const double* origin, const double* dir, const TriMesh& mesh) {
    std::vector<double> hits;
    for (const auto& f : mesh.faces) {
        // Moller-Trumbore
        const double *a = mesh.v(f[0]), *b = mesh.v(f[1]), *c = mesh.v(f[2]);
        double e1[3], e2[3], p[3], s[3], qv[3];
        vsub(b, a, e1);
        vsub(c, a, e2);
        vcross(dir, e2, p);
        const double det = vdot(e1, p);
        if (std::fabs(det) < 1e-14) continue;
        const double inv = 1.0 / det;
        vsub(origin, a, s);
        const double u = vdot(s, p) * inv;
        if (u < 0 || u > 1) continue;
        vcross(s, e1, qv);
        const double v = vdot(dir, qv) * inv;
        if (v < 0 || u + v > 1) continue;
        const double t = vdot(e2, qv) * inv;
        if (t > 1e-12) hits.push_back(t);
    }
    std::sort(hits.begin(), hits.end());
    return hits;
}

}  // namespace gc
