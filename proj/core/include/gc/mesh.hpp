#pragma once

#include <array>
#include <string>
#include <vector>

#include "gc/rng.hpp"

namespace gc {

// Fixed-size point cloud, row-major xyz, meters.
struct PointCloud3 {
    std::vector<double> xyz;  // 3N

    int count() const { return int(xyz.size() / 3); }
    double* p(int i) { return &xyz[size_t(i) * 3]; }
    const double* p(int i) const { return &xyz[size_t(i) * 3]; }
    static PointCloud3 with_count(int n) { return {std::vector<double>(size_t(n) * 3, 0.0)}; }
};

struct TriMesh {
    std::vector<double> verts;              // 3V
    std::vector<std::array<int, 3>> faces;

    int vertex_count() const { return int(verts.size() / 3); }
    const double* v(int i) const { return &verts[size_t(i) * 3]; }
    double* v(int i) { return &verts[size_t(i) * 3]; }
};

// Unique undirected edges (a < b), sorted lexicographically.
std::vector<std::array<int, 2>> unique_edges(const std::vector<std::array<int, 3>>& faces);

double triangle_area(const double* a, const double* b, const double* c);

// n points sampled uniformly by area: triangle chosen proportionally to its
// area, position uniform in barycentric coordinates. Deterministic given the
// rng state. Throws NumericError when every triangle is degenerate or n <= 0.
PointCloud3 sample_surface(const TriMesh& mesh, int n, Rng& rng);

// Squared distance from point q to the closest point of triangle (a,b,c).
double point_triangle_dist2(const double* q, const double* a, const double* b, const double* c);

// Distance from q to the mesh surface (exact over all triangles).
double point_mesh_distance(const double* q, const TriMesh& mesh);

// All intersections of ray origin+t*dir (t>0) with the mesh; returns sorted t
// values. Used by the garment builder to probe body cross-sections.
std::vector<double> ray_mesh_hits(const double* origin, const double* dir, const TriMesh& mesh);

}  // namespace gc
