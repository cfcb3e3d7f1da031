#include "gc/garment.hpp"

#include <algorithm>
#include <cmath>

#include "gc/error.hpp"

namespace gc {
namespace {

constexpr int kSegments = 32;      // angular samples per ring
constexpr double kRingStep = 0.035;  // vertical ring spacing, meters
constexpr double kFloor = 0.025;     // lowest hem above the ground plane

struct Tube {
    double y_top = 0, y_bottom = 0;
    bool leg_centered = false;  // center follows one leg chain instead of the torso axis
    int hip = -1, knee = -1, ankle = -1;
};

double joint_y(const PosedBody& b, int j) { return b.joints[size_t(j) * 3 + 1]; }

std::array<double, 2> joint_xz(const PosedBody& b, int j) {
    return {b.joints[size_t(j) * 3 + 0], b.joints[size_t(j) * 3 + 2]};
}

// Horizontal position of a leg chain (hip->knee->ankle) at height y,
// clamped to the chain's vertical extent.
std::array<double, 2> leg_at_height(const PosedBody& b, int hip, int knee, int ankle, double y) {
    const int chain[3] = {hip, knee, ankle};
    for (int s = 0; s < 2; ++s) {
        const double ya = joint_y(b, chain[s]), yb = joint_y(b, chain[s + 1]);
        if (y <= ya && y >= yb) {
            const double t = ya == yb ? 0.0 : (ya - y) / (ya - yb);
            const auto a = joint_xz(b, chain[s]), c = joint_xz(b, chain[s + 1]);
            return {a[0] + t * (c[0] - a[0]), a[1] + t * (c[1] - a[1])};
        }
    }
    return joint_xz(b, y > joint_y(b, hip) ? hip : ankle);
}

// Torso axis (pelvis->chest line) at height y, extended below the pelvis.
std::array<double, 2> torso_at_height(const PosedBody& b, double y) {
    const auto p = joint_xz(b, 0), c = joint_xz(b, 2);
    const double yp = joint_y(b, 0), yc = joint_y(b, 2);
    const double t = yc == yp ? 0.0 : (y - yp) / (yc - yp);
    return {p[0] + t * (c[0] - p[0]), p[1] + t * (c[1] - p[1])};
}

// Outer body radius per angular sample, probed by horizontal rays.
// outermost=false takes the first surface crossing (per-leg tubes),
// outermost=true the last (garments wrapping the whole silhouette).
std::vector<double> probe_radii(const PosedBody& body, const std::array<double, 3>& center,
                                bool outermost) {
    std::vector<double> r(kSegments, -1.0);
    int defined = 0;
    for (int k = 0; k < kSegments; ++k) {
        const double a = 2.0 * M_PI * k / kSegments;
        const double dir[3] = {std::cos(a), 0.0, std::sin(a)};
        const auto hits = ray_mesh_hits(center.data(), dir, body.mesh);
        if (!hits.empty()) {
            r[size_t(k)] = outermost ? hits.back() : hits.front();
            ++defined;
        }
    }
    if (defined == 0) return r;
    if (defined < kSegments) {
        // circular fill between the nearest defined neighbors
        const std::vector<double> src = r;
        for (int k = 0; k < kSegments; ++k) {
            if (src[size_t(k)] >= 0) continue;
            int lo = k, hi = k;
            for (int step = 1; step < kSegments; ++step) {
                lo = (k - step + kSegments) % kSegments;
                if (src[size_t(lo)] >= 0) break;
            }
            for (int step = 1; step < kSegments; ++step) {
                hi = (k + step) % kSegments;
                if (src[size_t(hi)] >= 0) break;
            }
            const int span = (hi - lo + kSegments) % kSegments;
            const int off = (k - lo + kSegments) % kSegments;
            const double t = span == 0 ? 0.0 : double(off) / span;
            r[size_t(k)] = src[size_t(lo)] + t * (src[size_t(hi)] - src[size_t(lo)]);
        }
    }
    return r;
}

void append_tube_mesh(TriMesh& mesh, const std::vector<std::array<double, 3>>& centers,
                      const std::vector<std::vector<double>>& radii) {
    const int base = mesh.vertex_count();
    for (size_t ring = 0; ring < centers.size(); ++ring)
        for (int k = 0; k < kSegments; ++k) {
            const double a = 2.0 * M_PI * k / kSegments;
            mesh.verts.insert(mesh.verts.end(),
                              {centers[ring][0] + radii[ring][size_t(k)] * std::cos(a),
                               centers[ring][1],
                               centers[ring][2] + radii[ring][size_t(k)] * std::sin(a)});
        }
    for (size_t ring = 0; ring + 1 < centers.size(); ++ring) {
        const int r0 = base + int(ring) * kSegments;
        const int r1 = r0 + kSegments;
        for (int k = 0; k < kSegments; ++k) {
            const int kn = (k + 1) % kSegments;
            mesh.faces.push_back({r0 + k, r1 + k, r1 + kn});
            mesh.faces.push_back({r0 + k, r1 + kn, r0 + kn});
        }
    }
}

}  // namespace

void GarmentStyle::validate() const {
    if (flare < 0) throw NumericError("garment style: flare must be >= 0");
    if (length < 0.2 || length > 1.0)
        throw NumericError("garment style: length must be in [0.2, 1.0]");
    if (offset <= 0) throw NumericError("garment style: offset must be > 0");
    if (waist_height < 0.5 || waist_height > 1.5)
        throw NumericError("garment style: waist_height out of range");
}

const char* GarmentStyle::kind_name(Kind k) {
    switch (k) {
        case kSkirt: return "skirt";
        case kDress: return "dress";
        case kPants: return "pants";
        case kTop: return "top";
    }
    return "?";
}

GarmentStyle::Kind GarmentStyle::kind_from_name(const std::string& name) {
    for (int k = 0; k < 4; ++k)
        if (name == kind_name(Kind(k))) return Kind(k);
    throw ParseError("unknown garment kind '" + name + "'");
}

double garment_max_drop(const GarmentStyle& style, const PosedBody& body) {
    const double pelvis = joint_y(body, 0);
    const double waist = style.waist_height * pelvis;
    switch (style.kind) {
        case GarmentStyle::kSkirt:
            return waist - std::max(waist - style.length * waist, kFloor);
        case GarmentStyle::kDress: {
            const double top = joint_y(body, 2) + 0.02;
            return top - std::max(waist - style.length * waist, kFloor);
        }
        case GarmentStyle::kPants: {
            const double top = std::min(joint_y(body, 10), joint_y(body, 13)) - 0.045;
            return top - (joint_y(body, 10) -
                          style.length * (joint_y(body, 10) - joint_y(body, 12)));
        }
        case GarmentStyle::kTop: {
            const double neck = joint_y(body, 2) + 0.75 * (joint_y(body, 3) - joint_y(body, 2));
            return style.length * (neck - 0.85 * pelvis);
        }
    }
    return 0;
}

TriMesh synth_garment(const GarmentStyle& style, const PosedBody& body) {
    style.validate();
    if (body.joints.empty()) throw NumericError("synth_garment: body has no joints");

    const double pelvis = joint_y(body, 0);
    const double waist = style.waist_height * pelvis;
    const double crotch = std::min(joint_y(body, 10), joint_y(body, 13)) - 0.03;

    std::vector<Tube> tubes;
    switch (style.kind) {
        case GarmentStyle::kSkirt:
            tubes.push_back({waist, std::max(waist - style.length * waist, kFloor), false});
            break;
        case GarmentStyle::kDress:
            tubes.push_back({joint_y(body, 2) + 0.02,
                             std::max(waist - style.length * waist, kFloor), false});
            break;
        case GarmentStyle::kPants: {
            // leg tubes start just below the crotch so rays only meet the own leg
            for (int side = 0; side < 2; ++side) {
                Tube t;
                t.hip = side ? 13 : 10;
                t.knee = side ? 14 : 11;
                t.ankle = side ? 15 : 12;
                t.leg_centered = true;
                t.y_top = crotch - 0.015;
                t.y_bottom = joint_y(body, t.hip) -
                             style.length * (joint_y(body, t.hip) - joint_y(body, t.ankle));
                tubes.push_back(t);
            }
            break;
        }
        case GarmentStyle::kTop: {
            const double neck = joint_y(body, 2) + 0.75 * (joint_y(body, 3) - joint_y(body, 2));
            tubes.push_back({neck, neck - style.length * (neck - 0.85 * pelvis), false});
            break;
        }
    }

    TriMesh mesh;
    for (const Tube& tube : tubes) {
        if (tube.y_top - tube.y_bottom < 2 * kRingStep)
            throw NumericError("synth_garment: style region empty on this body");
        const int n_rings = int(std::ceil((tube.y_top - tube.y_bottom) / kRingStep)) + 1;
        std::vector<std::array<double, 3>> centers;
        std::vector<std::vector<double>> radii;
        for (int ring = 0; ring < n_rings; ++ring) {
            const double y =
                tube.y_top - (tube.y_top - tube.y_bottom) * double(ring) / (n_rings - 1);
            std::array<double, 2> cxz;
            if (tube.leg_centered) {
                cxz = leg_at_height(body, tube.hip, tube.knee, tube.ankle, y);
            } else if (y < crotch) {
                const auto l = leg_at_height(body, 10, 11, 12, y);
                const auto r = leg_at_height(body, 13, 14, 15, y);
                cxz = {0.5 * (l[0] + r[0]), 0.5 * (l[1] + r[1])};
            } else {
                cxz = torso_at_height(body, y);
            }
            const std::array<double, 3> center = {cxz[0], y, cxz[1]};
            std::vector<double> r = probe_radii(body, center, !tube.leg_centered);

            bool any = false;
            for (double v : r) any = any || v >= 0;
            if (!any) {
                if (radii.empty())
                    throw NumericError("synth_garment: style region empty on this body");
                r = radii.back();  // raw body radii carried down
            }
            // A hanging garment never narrows below the crotch line.
            if (!tube.leg_centered && y < crotch && !radii.empty())
                for (int k = 0; k < kSegments; ++k)
                    r[size_t(k)] = std::max(r[size_t(k)], radii.back()[size_t(k)]);
            centers.push_back(center);
            radii.push_back(std::move(r));
        }
        // Body radii -> garment radii with offset and flare (kept separate so
        // the monotone clamp above compares bare body measurements).
        for (int ring = 0; ring < n_rings; ++ring) {
            const double drop = tube.y_top - centers[size_t(ring)][1];
            for (double& v : radii[size_t(ring)])
                v = std::max(v, 0.01) + style.offset + style.flare * drop;
        }
        append_tube_mesh(mesh, centers, radii);
    }
    return mesh;
}

}  // namespace gc
