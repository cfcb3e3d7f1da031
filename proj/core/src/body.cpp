#include "gc/body.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "gc/error.hpp"
#include "gc/ply.hpp"

namespace gc {
namespace {

constexpr int kJoints = 16;
constexpr int kShapes = 4;

enum JointId {
    jPelvis = 0, jSpine, jChest, jHead,
    jShoulderL, jElbowL, jWristL,
    jShoulderR, jElbowR, jWristR,
    jHipL, jKneeL, jAnkleL,
    jHipR, jKneeR, jAnkleR,
};

const char* kJointNames[kJoints] = {
    "pelvis", "spine", "chest", "head",
    "l_shoulder", "l_elbow", "l_wrist",
    "r_shoulder", "r_elbow", "r_wrist",
    "l_hip", "l_knee", "l_ankle",
    "r_hip", "r_knee", "r_ankle",
};

const int kParents[kJoints] = {-1, 0, 1, 2, 2, 4, 5, 2, 7, 8, 0, 10, 11, 0, 13, 14};

const double kJointPos[kJoints][3] = {
    {0, 0.95, 0}, {0, 1.10, 0}, {0, 1.28, 0}, {0, 1.50, 0},
    {0.17, 1.40, 0}, {0.35, 1.22, 0}, {0.50, 1.06, 0},
    {-0.17, 1.40, 0}, {-0.35, 1.22, 0}, {-0.50, 1.06, 0},
    {0.105, 0.92, 0}, {0.105, 0.50, 0}, {0.105, 0.10, 0},
    {-0.105, 0.92, 0}, {-0.105, 0.50, 0}, {-0.105, 0.10, 0},
};

struct Ring {
    std::array<double, 3> center;
    std::array<double, 3> u, w;  // ring plane basis; vertex = c + rx cos*u + rz sin*w
    double rx, rz;
    int group;
    int ja, jb;     // skin weights: (1-wb) to ja, wb to jb
    double wb;
    int reg_joint;  // regressor ring for this joint, or -1
};

struct Builder {
    TriMesh mesh;
    std::vector<int> groups;
    std::vector<std::pair<int, double>> wa;  // per-vertex (joint, weight)
    std::vector<std::pair<int, double>> wb;
    std::vector<std::vector<int>> reg_rings;  // per joint: vertex ids

    Builder() : reg_rings(kJoints) {}

    int add_vertex(double x, double y, double z, int group, int ja, double wja, int jb,
                   double wjb) {
        mesh.verts.insert(mesh.verts.end(), {x, y, z});
        groups.push_back(group);
        wa.emplace_back(ja, wja);
        wb.emplace_back(jb, wjb);
        return mesh.vertex_count() - 1;
    }

    // One tube: rings connected by triangle bands. Returns first/last ring start ids.
    void add_tube(const std::vector<Ring>& rings, int segs, bool cap_end) {
        int prev_start = -1;
        for (const Ring& r : rings) {
            const int start = mesh.vertex_count();
            for (int s = 0; s < segs; ++s) {
                const double a = 2.0 * M_PI * s / segs;
                const double cx = r.rx * std::cos(a), cz = r.rz * std::sin(a);
                const int vid = add_vertex(r.center[0] + cx * r.u[0] + cz * r.w[0],
                                           r.center[1] + cx * r.u[1] + cz * r.w[1],
                                           r.center[2] + cx * r.u[2] + cz * r.w[2], r.group,
                                           r.ja, 1.0 - r.wb, r.jb, r.wb);
                if (r.reg_joint >= 0) reg_rings[size_t(r.reg_joint)].push_back(vid);
            }
            if (prev_start >= 0)
                for (int s = 0; s < segs; ++s) {
                    const int sn = (s + 1) % segs;
                    mesh.faces.push_back({prev_start + s, start + s, start + sn});
                    mesh.faces.push_back({prev_start + s, start + sn, prev_start + sn});
                }
            prev_start = start;
        }
        if (cap_end && !rings.empty()) {
            const Ring& r = rings.back();
            const int c = add_vertex(r.center[0], r.center[1], r.center[2], r.group, r.ja,
                                     1.0 - r.wb, r.jb, r.wb);
            for (int s = 0; s < segs; ++s)
                mesh.faces.push_back({prev_start + s, c, prev_start + (s + 1) % segs});
        }
    }
};

std::array<double, 3> normalized(std::array<double, 3> v) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    return {v[0] / n, v[1] / n, v[2] / n};
}

// Ring basis perpendicular to a bone direction.
void limb_basis(const std::array<double, 3>& dir, std::array<double, 3>& u,
                std::array<double, 3>& w) {
    const std::array<double, 3> ref =
        std::fabs(dir[1]) < 0.9 ? std::array<double, 3>{0, 1, 0} : std::array<double, 3>{1, 0, 0};
    w = normalized({dir[1] * ref[2] - dir[2] * ref[1], dir[2] * ref[0] - dir[0] * ref[2],
                    dir[0] * ref[1] - dir[1] * ref[0]});
    u = {w[1] * dir[2] - w[2] * dir[1], w[2] * dir[0] - w[0] * dir[2],
         w[0] * dir[1] - w[1] * dir[0]};
    u = normalized(u);
}

std::array<double, 3> lerp3(const double* a, const double* b, double t) {
    return {a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])};
}

// Tube along a joint chain. stations: (t in [0, n_bones], radius, group,
// ja, jb, wb, reg_joint); t=k sits exactly at chain joint k.
void chain_tube(Builder& b, const std::vector<int>& chain, const std::vector<double>& ts,
                const std::vector<double>& radii, const std::vector<int>& grp,
                const std::vector<std::array<double, 3>>& weights,  // (ja, jb, wb)
                const std::vector<int>& reg, int segs, bool cap_end) {
    std::vector<Ring> rings;
    for (size_t i = 0; i < ts.size(); ++i) {
        const double t = ts[i];
        const int k = std::min(int(t), int(chain.size()) - 2);
        const double* a = kJointPos[chain[size_t(k)]];
        const double* c = kJointPos[chain[size_t(k) + 1]];
        Ring r;
        r.center = lerp3(a, c, t - k);
        std::array<double, 3> dir = normalized({c[0] - a[0], c[1] - a[1], c[2] - a[2]});
        limb_basis(dir, r.u, r.w);
        r.rx = r.rz = radii[i];
        r.group = grp[i];
        r.ja = int(weights[i][0]);
        r.jb = int(weights[i][1]);
        r.wb = weights[i][2];
        r.reg_joint = reg[i];
        rings.push_back(r);
    }
    b.add_tube(rings, segs, cap_end);
}

}  // namespace

BodyTemplate default_template() {
    Builder b;

    // Torso: horizontal elliptical rings around the spine axis.
    {
        struct T {
            double y, rx, rz;
            int ja, jb;
            double wb;
            int reg;
        };
        const std::vector<T> st = {
            {0.895, 0.150, 0.100, jPelvis, jPelvis, 0, -1},
            {0.92, 0.152, 0.100, jPelvis, jPelvis, 0, -1},
            {0.95, 0.148, 0.100, jPelvis, jPelvis, 0, jPelvis},
            {1.00, 0.138, 0.095, jPelvis, jSpine, 0.25, -1},
            {1.05, 0.130, 0.092, jPelvis, jSpine, 0.75, -1},
            {1.10, 0.132, 0.093, jSpine, jSpine, 0, jSpine},
            {1.16, 0.140, 0.096, jSpine, jChest, 0.25, -1},
            {1.22, 0.150, 0.100, jSpine, jChest, 0.75, -1},
            {1.28, 0.158, 0.103, jChest, jChest, 0, jChest},
            {1.35, 0.163, 0.103, jChest, jChest, 0, -1},
            {1.42, 0.150, 0.095, jChest, jChest, 0, -1},
        };
        std::vector<Ring> rings;
        for (const T& t : st) {
            Ring r;
            r.center = {0, t.y, 0};
            r.u = {1, 0, 0};
            r.w = {0, 0, 1};
            r.rx = t.rx;
            r.rz = t.rz;
            r.group = kGroupTorsoLimbs;
            r.ja = t.ja;
            r.jb = t.jb;
            r.wb = t.wb;
            r.reg_joint = t.reg;
            rings.push_back(r);
        }
        b.add_tube(rings, 18, false);
    }

    // Neck and head.
    {
        struct T {
            double y, r;
            int grp, ja, jb;
            double wb;
            int reg;
        };
        const std::vector<T> st = {
            {1.44, 0.055, kGroupTorsoLimbs, jChest, jChest, 0, -1},
            {1.50, 0.050, kGroupTorsoLimbs, jChest, jHead, 0.5, jHead},
            {1.56, 0.062, kGroupHead, jHead, jHead, 0, -1},
            {1.62, 0.080, kGroupHead, jHead, jHead, 0, -1},
            {1.68, 0.078, kGroupHead, jHead, jHead, 0, -1},
            {1.73, 0.055, kGroupHead, jHead, jHead, 0, -1},
        };
        std::vector<Ring> rings;
        for (const T& t : st) {
            Ring r;
            r.center = {0, t.y, 0};
            r.u = {1, 0, 0};
            r.w = {0, 0, 1};
            r.rx = r.rz = t.r;
            r.group = t.grp;
            r.ja = t.ja;
            r.jb = t.jb;
            r.wb = t.wb;
            r.reg_joint = t.reg;
            rings.push_back(r);
        }
        b.add_tube(rings, 14, true);
    }

    // Arms (shoulder -> elbow -> wrist -> hand tip).
    for (int side = 0; side < 2; ++side) {
        const int sh = side ? jShoulderR : jShoulderL;
        const int el = side ? jElbowR : jElbowL;
        const int wr = side ? jWristR : jWristL;
        const int hand_grp = side ? kGroupHandRight : kGroupHandLeft;
        const std::vector<int> chain = {sh, el, wr};
        chain_tube(b, chain,
                   {0.0, 0.5, 1.0, 1.5, 2.0},
                   {0.055, 0.048, 0.042, 0.036, 0.032},
                   std::vector<int>(5, kGroupTorsoLimbs),
                   {{double(jChest), double(sh), 0.5},
                    {double(sh), double(sh), 0},
                    {double(sh), double(el), 0.5},
                    {double(el), double(el), 0},
                    {double(el), double(wr), 0.5}},
                   {sh, -1, el, -1, wr}, 12, false);
        // hand as a short taper past the wrist
        const double* w = kJointPos[wr];
        const double* e = kJointPos[el];
        std::array<double, 3> dir = normalized({w[0] - e[0], w[1] - e[1], w[2] - e[2]});
        std::vector<Ring> hand;
        for (int i = 0; i < 3; ++i) {
            const double t = 0.02 + 0.05 * i;
            Ring r;
            r.center = {w[0] + dir[0] * t, w[1] + dir[1] * t, w[2] + dir[2] * t};
            limb_basis(dir, r.u, r.w);
            r.rx = r.rz = 0.035 - 0.007 * i;
            r.group = hand_grp;
            r.ja = wr;
            r.jb = wr;
            r.wb = 0;
            r.reg_joint = -1;
            hand.push_back(r);
        }
        b.add_tube(hand, 8, true);
    }

    // Legs (hip -> knee -> ankle).
    for (int side = 0; side < 2; ++side) {
        const int hp = side ? jHipR : jHipL;
        const int kn = side ? jKneeR : jKneeL;
        const int an = side ? jAnkleR : jAnkleL;
        const int foot_grp = side ? kGroupFootRight : kGroupFootLeft;
        const std::vector<int> chain = {hp, kn, an};
        chain_tube(b, chain,
                   {0.0, 0.33, 0.66, 1.0, 1.33, 1.66, 2.0},
                   {0.070, 0.066, 0.060, 0.054, 0.048, 0.043, 0.040},
                   std::vector<int>(7, kGroupTorsoLimbs),
                   {{double(jPelvis), double(hp), 0.5},
                    {double(hp), double(hp), 0},
                    {double(hp), double(hp), 0},
                    {double(hp), double(kn), 0.5},
                    {double(kn), double(kn), 0},
                    {double(kn), double(kn), 0},
                    {double(kn), double(an), 0.5}},
                   {hp, -1, -1, kn, -1, -1, an}, 14, false);
        // foot pointing +z
        const double* a = kJointPos[an];
        std::vector<Ring> foot;
        for (int i = 0; i < 3; ++i) {
            Ring r;
            r.center = {a[0], 0.055 - 0.008 * i, a[2] + 0.03 + 0.055 * i};
            r.u = {1, 0, 0};
            r.w = {0, 1, 0};
            r.rx = 0.040 - 0.004 * i;
            r.rz = 0.034 - 0.004 * i;
            r.group = foot_grp;
            r.ja = an;
            r.jb = an;
            r.wb = 0;
            r.reg_joint = -1;
            foot.push_back(r);
        }
        b.add_tube(foot, 10, true);
    }

    BodyTemplate t;
    t.mesh = std::move(b.mesh);
    t.groups = std::move(b.groups);
    // Canonical template stores float32 coordinates (the PLY precision).
    for (double& v : t.mesh.verts) v = double(float(v));

    const int V = t.mesh.vertex_count();
    t.parents.assign(kParents, kParents + kJoints);
    t.joint_names.assign(kJointNames, kJointNames + kJoints);

    t.skin_weights.assign(size_t(V) * kJoints, 0.0);
    for (int v = 0; v < V; ++v) {
        const auto [ja, wja] = b.wa[size_t(v)];
        const auto [jb, wjb] = b.wb[size_t(v)];
        t.skin_weights[size_t(v) * kJoints + ja] += wja;
        t.skin_weights[size_t(v) * kJoints + jb] += wjb;
    }

    t.joint_reg.assign(size_t(kJoints) * V, 0.0);
    for (int j = 0; j < kJoints; ++j) {
        const auto& ring = b.reg_rings[size_t(j)];
        if (ring.empty()) throw NumericError("default_template: joint without regressor ring");
        for (int vid : ring) t.joint_reg[size_t(j) * V + vid] = 1.0 / double(ring.size());
    }
    // Rest joints from the regressor so that posing is self-consistent.
    t.joints.assign(size_t(kJoints) * 3, 0.0);
    for (int j = 0; j < kJoints; ++j)
        for (int v = 0; v < V; ++v) {
            const double w = t.joint_reg[size_t(j) * V + v];
            if (w == 0) continue;
            for (int k = 0; k < 3; ++k) t.joints[size_t(j) * 3 + k] += w * t.mesh.verts[size_t(v) * 3 + k];
        }

    // Shape directions: height, girth, leg length, shoulder width.
    t.shape_count = kShapes;
    t.shape_dirs.assign(size_t(kShapes) * V * 3, 0.0);
    auto dir = [&](int s, int v) { return &t.shape_dirs[(size_t(s) * V + v) * 3]; };
    for (int v = 0; v < V; ++v) {
        const double x = t.mesh.verts[size_t(v) * 3 + 0];
        const double y = t.mesh.verts[size_t(v) * 3 + 1];
        const double z = t.mesh.verts[size_t(v) * 3 + 2];
        dir(0, v)[1] = 0.10 * y;
        const double torso = std::clamp((0.32 - std::fabs(x)) / 0.32, 0.0, 1.0);
        dir(1, v)[0] = 0.09 * x * torso;
        dir(1, v)[2] = 0.09 * z * torso;
        if (y < 0.92) dir(2, v)[1] = -0.07 * (0.92 - y);
        const double upper = std::clamp((y - 1.15) / 0.15, 0.0, 1.0);
        dir(3, v)[0] = 0.06 * x * upper;
    }

    t.edges = unique_edges(t.mesh.faces);
    t.validate();
    return t;
}

void BodyTemplate::validate() const {
    const int V = vertex_count(), J = joint_count();
    if (J == 0 || V == 0) throw NumericError("template: empty");
    if (int(joints.size()) != 3 * J || int(skin_weights.size()) != V * J ||
        int(joint_reg.size()) != J * V || int(groups.size()) != V ||
        int(shape_dirs.size()) != shape_count * V * 3)
        throw NumericError("template: inconsistent array sizes");

    int roots = 0;
    for (int j = 0; j < J; ++j) {
        if (parents[size_t(j)] < 0) {
            ++roots;
            continue;
        }
        // walk to the root; cycles never terminate within J steps
        int p = j, steps = 0;
        while (p >= 0 && steps <= J) {
            p = parents[size_t(p)];
            ++steps;
        }
        if (steps > J) throw NumericError("template: joint hierarchy has a cycle");
    }
    if (roots != 1) throw NumericError("template: joint hierarchy must have exactly one root");

    for (int v = 0; v < V; ++v) {
        double sum = 0;
        for (int j = 0; j < J; ++j) {
            const double w = skin_weights[size_t(v) * J + j];
            if (w < 0) throw NumericError("template: negative skin weight");
            sum += w;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw NumericError("template: skin weight row " + std::to_string(v) +
                               " sums to " + std::to_string(sum));
    }
    for (const auto& f : mesh.faces)
        for (int k : f)
            if (k < 0 || k >= V) throw NumericError("template: face index out of range");
    for (size_t e = 1; e < edges.size(); ++e)
        if (!(edges[e - 1] < edges[e])) throw NumericError("template: duplicate edge");
}

void canonicalize_pose(std::vector<double>& pose) {
    for (size_t j = 0; j * 3 < pose.size(); ++j) {
        double* aa = &pose[j * 3];
        double ang = std::sqrt(aa[0] * aa[0] + aa[1] * aa[1] + aa[2] * aa[2]);
        if (ang <= M_PI || ang == 0) continue;
        double wrapped = std::fmod(ang, 2.0 * M_PI);
        if (wrapped > M_PI) wrapped -= 2.0 * M_PI;  // in (-pi, pi]
        const double s = wrapped / ang;
        for (int k = 0; k < 3; ++k) aa[k] *= s;
    }
}

namespace {

// Rodrigues: axis-angle to 3x3 rotation (row-major).
void axis_angle_to_matrix(const double* aa, double* R) {
    const double ang = std::sqrt(aa[0] * aa[0] + aa[1] * aa[1] + aa[2] * aa[2]);
    if (ang < 1e-12) {
        R[0] = R[4] = R[8] = 1;
        R[1] = R[2] = R[3] = R[5] = R[6] = R[7] = 0;
        return;
    }
    const double x = aa[0] / ang, y = aa[1] / ang, z = aa[2] / ang;
    const double c = std::cos(ang), s = std::sin(ang), t = 1 - c;
    R[0] = t * x * x + c;     R[1] = t * x * y - s * z; R[2] = t * x * z + s * y;
    R[3] = t * x * y + s * z; R[4] = t * y * y + c;     R[5] = t * y * z - s * x;
    R[6] = t * x * z - s * y; R[7] = t * y * z + s * x; R[8] = t * z * z + c;
}

}  // namespace

PosedBody pose_body(const BodyTemplate& tmpl, const PoseShapeParams& params) {
    const int V = tmpl.vertex_count(), J = tmpl.joint_count();
    if (int(params.pose.size()) != 3 * J)
        throw NumericError("pose_body: expected " + std::to_string(3 * J) + " pose values");
    if (int(params.shape.size()) != tmpl.shape_count)
        throw NumericError("pose_body: expected " + std::to_string(tmpl.shape_count) +
                           " shape values");
    {
        // non-tree hierarchies are rejected up front
        int roots = 0;
        for (int j = 0; j < J; ++j) {
            int p = j, steps = 0;
            while (p >= 0 && steps <= J) p = tmpl.parents[size_t(p)], ++steps;
            if (steps > J) throw NumericError("pose_body: joint hierarchy has a cycle");
            if (tmpl.parents[size_t(j)] < 0) ++roots;
        }
        if (roots != 1) throw NumericError("pose_body: need exactly one root joint");
    }

    PoseShapeParams canon = params;
    canonicalize_pose(canon.pose);

    // Shape blend, then joint regression from the shaped vertices.
    std::vector<double> verts = tmpl.mesh.verts;
    for (int s = 0; s < tmpl.shape_count; ++s) {
        const double c = canon.shape[size_t(s)];
        if (c == 0) continue;
        const double* d = &tmpl.shape_dirs[size_t(s) * V * 3];
        for (int i = 0; i < 3 * V; ++i) verts[size_t(i)] += c * d[i];
    }
    std::vector<double> joints(size_t(J) * 3, 0.0);
    for (int j = 0; j < J; ++j)
        for (int v = 0; v < V; ++v) {
            const double w = tmpl.joint_reg[size_t(j) * V + v];
            if (w == 0) continue;
            for (int k = 0; k < 3; ++k) joints[size_t(j) * 3 + k] += w * verts[size_t(v) * 3 + k];
        }

    // Kinematics as a per-joint delta walk: S_j(x) = x + d_j(x) with
    // d_j(x) = (R_j - I)(x - j_j) + d_parent(x + (R_j - I)(x - j_j)).
    // Identity rotations contribute exactly zero at every level, so the
    // rest pose is reproduced bit for bit.
    std::vector<double> rot(size_t(J) * 9);
    std::vector<std::vector<int>> up_chain(static_cast<size_t>(J));
    for (int j = 0; j < J; ++j) {
        axis_angle_to_matrix(&canon.pose[size_t(j) * 3], &rot[size_t(j) * 9]);
        int p = j, steps = 0;
        while (p >= 0) {
            up_chain[size_t(j)].push_back(p);
            p = tmpl.parents[size_t(p)];
            if (++steps > J) throw NumericError("pose_body: joint hierarchy has a cycle");
        }
    }
    // apply_chain: y <- S_j(y) walking joint-to-root.
    auto apply_chain = [&](int j, double* y) {
        for (int k : up_chain[size_t(j)]) {
            const double* R = &rot[size_t(k) * 9];
            const double* jk = &joints[size_t(k) * 3];
            const double lx = y[0] - jk[0], ly = y[1] - jk[1], lz = y[2] - jk[2];
            y[0] += (R[0] - 1) * lx + R[1] * ly + R[2] * lz;
            y[1] += R[3] * lx + (R[4] - 1) * ly + R[5] * lz;
            y[2] += R[6] * lx + R[7] * ly + (R[8] - 1) * lz;
        }
    };

    PosedBody body;
    body.source = &tmpl;
    body.provenance = canon;
    body.mesh.faces = tmpl.mesh.faces;
    body.mesh.verts.assign(size_t(V) * 3, 0.0);
    const auto& rt = params.root_translation;
    for (int v = 0; v < V; ++v) {
        const double* x = &verts[size_t(v) * 3];
        double out[3] = {x[0], x[1], x[2]};
        for (int j = 0; j < J; ++j) {
            const double w = tmpl.skin_weights[size_t(v) * J + j];
            if (w == 0) continue;
            double y[3] = {x[0], x[1], x[2]};
            apply_chain(j, y);
            for (int i = 0; i < 3; ++i) out[i] += w * (y[i] - x[i]);
        }
        for (int i = 0; i < 3; ++i) body.mesh.verts[size_t(v) * 3 + i] = out[i] + rt[size_t(i)];
    }
    body.joints.assign(static_cast<size_t>(J) * 3, 0.0);
    for (int j = 0; j < J; ++j) {
        double y[3] = {joints[size_t(j) * 3], joints[size_t(j) * 3 + 1], joints[size_t(j) * 3 + 2]};
        apply_chain(j, y);
        for (int i = 0; i < 3; ++i) body.joints[size_t(j) * 3 + i] = y[i] + rt[size_t(i)];
    }
    return body;
}

PointCloud3 body_point_cloud(const PosedBody& body) {
    if (!body.source) throw NumericError("body_point_cloud: body lacks its template");
    const BodyTemplate& tmpl = *body.source;
    if (tmpl.groups.size() != size_t(body.mesh.vertex_count()))
        throw NumericError("body_point_cloud: template lacks per-vertex group labels");

    std::vector<char> keep(tmpl.groups.size());
    int kept = 0;
    for (size_t v = 0; v < tmpl.groups.size(); ++v) {
        keep[v] = tmpl.groups[v] == kGroupTorsoLimbs;
        kept += keep[v];
    }
    if (kept == 0) throw NumericError("body_point_cloud: no vertices outside cropped groups");

    PointCloud3 cloud;
    cloud.xyz.reserve(size_t(kept) * 3 * 4);
    for (size_t v = 0; v < keep.size(); ++v)
        if (keep[v])
            cloud.xyz.insert(cloud.xyz.end(), body.mesh.v(int(v)), body.mesh.v(int(v)) + 3);
    for (const auto& e : tmpl.edges) {
        if (!keep[size_t(e[0])] || !keep[size_t(e[1])]) continue;
        const double* a = body.mesh.v(e[0]);
        const double* b = body.mesh.v(e[1]);
        cloud.xyz.insert(cloud.xyz.end(),
                         {0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])});
    }
    return cloud;
}

// ---- template file pair ----------------------------------------------------

void save_template(const BodyTemplate& t, const std::string& ply_path,
                   const std::string& rig_path) {
    PlyData ply;
    ply.xyz.assign(t.mesh.verts.begin(), t.mesh.verts.end());
    ply.faces = t.mesh.faces;
    ply.has_faces = true;
    ply.groups = t.groups;
    ply.has_groups = true;
    save_ply(ply_path, ply, true);

    std::ofstream out(rig_path);
    if (!out) throw ParseError(rig_path + ": cannot open for writing");
    const int V = t.vertex_count(), J = t.joint_count();
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, " %.17g", v);
        out << buf;
    };
    out << "gcrig 1\n";
    out << "joints " << J << "\n";
    for (int j = 0; j < J; ++j) {
        out << t.joint_names[size_t(j)] << " " << t.parents[size_t(j)];
        for (int k = 0; k < 3; ++k) put(t.joints[size_t(j) * 3 + k]);
        out << "\n";
    }
    out << "weights " << V << " " << J << "\n";
    for (int v = 0; v < V; ++v) {
        for (int j = 0; j < J; ++j) put(t.skin_weights[size_t(v) * J + j]);
        out << "\n";
    }
    out << "joint_reg " << J << " " << V << "\n";
    for (int j = 0; j < J; ++j) {
        for (int v = 0; v < V; ++v) put(t.joint_reg[size_t(j) * V + v]);
        out << "\n";
    }
    out << "shape_dirs " << t.shape_count << " " << V << "\n";
    for (int s = 0; s < t.shape_count; ++s)
        for (int v = 0; v < V; ++v) {
            for (int k = 0; k < 3; ++k) put(t.shape_dirs[(size_t(s) * V + v) * 3 + k]);
            out << "\n";
        }
    out << "end\n";
    if (!out) throw ParseError(rig_path + ": write failed");
}

BodyTemplate load_template(const std::string& ply_path, const std::string& rig_path) {
    const PlyData ply = load_ply(ply_path);
    if (!ply.has_groups) throw ParseError(ply_path + ": template PLY lacks the group property");
    if (!ply.has_faces) throw ParseError(ply_path + ": template PLY lacks faces");

    BodyTemplate t;
    t.mesh.verts.assign(ply.xyz.begin(), ply.xyz.end());
    t.mesh.faces = ply.faces;
    t.groups = ply.groups;
    t.edges = unique_edges(t.mesh.faces);
    const int V = t.vertex_count();

    std::ifstream in(rig_path);
    if (!in) throw ParseError(rig_path + ": cannot open");
    std::string tok;
    int version = 0;
    in >> tok >> version;
    if (tok != "gcrig" || version != 1) throw ParseError(rig_path + ": not a gcrig v1 file");

    int J = 0;
    in >> tok >> J;
    if (tok != "joints" || J <= 0) throw ParseError(rig_path + ": bad joints header");
    t.parents.resize(size_t(J));
    t.joint_names.resize(size_t(J));
    t.joints.resize(size_t(J) * 3);
    for (int j = 0; j < J; ++j) {
        in >> t.joint_names[size_t(j)] >> t.parents[size_t(j)];
        for (int k = 0; k < 3; ++k) in >> t.joints[size_t(j) * 3 + k];
    }

    int wv = 0, wj = 0;
    in >> tok >> wv >> wj;
    if (tok != "weights" || wv != V || wj != J)
        throw ParseError(rig_path + ": weights header mismatch (" + std::to_string(wv) + "x" +
                         std::to_string(wj) + " vs " + std::to_string(V) + " vertices)");
    t.skin_weights.resize(size_t(V) * J);
    for (double& w : t.skin_weights) in >> w;

    in >> tok >> wj >> wv;
    if (tok != "joint_reg" || wj != J || wv != V) throw ParseError(rig_path + ": joint_reg header mismatch");
    t.joint_reg.resize(size_t(J) * V);
    for (double& w : t.joint_reg) in >> w;

    in >> tok >> t.shape_count >> wv;
    if (tok != "shape_dirs" || wv != V || t.shape_count < 0)
        throw ParseError(rig_path + ": shape_dirs header mismatch");
    t.shape_dirs.resize(size_t(t.shape_count) * V * 3);
    for (double& w : t.shape_dirs) in >> w;

    in >> tok;
    if (!in || tok != "end") throw ParseError(rig_path + ": truncated (missing 'end')");
    t.validate();
    return t;
}

// ---- pose sequences ---------------------------------------------------------

namespace {

struct JointRange {
    double sigma[3];
    double clip[3];
};

// Per-joint keyframe ranges (radians). Indexed by JointId.
const JointRange kRanges[kJoints] = {
    {{0.00, 0.08, 0.00}, {0.00, 0.20, 0.00}},  // pelvis: slight turn only
    {{0.05, 0.05, 0.05}, {0.12, 0.12, 0.12}},  // spine
    {{0.05, 0.05, 0.05}, {0.12, 0.12, 0.12}},  // chest
    {{0.08, 0.08, 0.08}, {0.20, 0.20, 0.20}},  // head
    {{0.22, 0.22, 0.22}, {0.50, 0.50, 0.50}},  // l_shoulder
    {{0.20, 0.20, 0.20}, {0.50, 0.50, 0.50}},  // l_elbow
    {{0.08, 0.08, 0.08}, {0.20, 0.20, 0.20}},  // l_wrist
    {{0.22, 0.22, 0.22}, {0.50, 0.50, 0.50}},  // r_shoulder
    {{0.20, 0.20, 0.20}, {0.50, 0.50, 0.50}},  // r_elbow
    {{0.08, 0.08, 0.08}, {0.20, 0.20, 0.20}},  // r_wrist
    {{0.20, 0.05, 0.05}, {0.45, 0.12, 0.10}},  // l_hip
    {{0.20, 0.00, 0.00}, {0.50, 0.00, 0.00}},  // l_knee
    {{0.08, 0.08, 0.08}, {0.20, 0.20, 0.20}},  // l_ankle
    {{0.20, 0.05, 0.05}, {0.45, 0.12, 0.10}},  // r_hip
    {{0.20, 0.00, 0.00}, {0.50, 0.00, 0.00}},  // r_knee
    {{0.08, 0.08, 0.08}, {0.20, 0.20, 0.20}},  // r_ankle
};

PoseShapeParams sample_keyframe(const BodyTemplate& tmpl, Rng& rng) {
    PoseShapeParams p;
    const int J = tmpl.joint_count();
    p.pose.assign(size_t(J) * 3, 0.0);
    for (int j = 0; j < J && j < kJoints; ++j)
        for (int k = 0; k < 3; ++k) {
            const JointRange& r = kRanges[j];
            if (r.sigma[k] == 0) continue;
            p.pose[size_t(j) * 3 + k] =
                std::clamp(rng.normal(0.0, r.sigma[k]), -r.clip[k], r.clip[k]);
        }
    p.shape.resize(size_t(tmpl.shape_count));
    for (double& s : p.shape) s = std::clamp(rng.normal(0.0, 0.8), -2.0, 2.0);
    p.root_translation = {std::clamp(rng.normal(0.0, 0.04), -0.1, 0.1), 0.0,
                          std::clamp(rng.normal(0.0, 0.04), -0.1, 0.1)};
    return p;
}

}  // namespace

std::vector<PoseShapeParams> sample_pose_sequence(const BodyTemplate& tmpl, int frames,
                                                  Rng& rng) {
    if (frames <= 0) throw NumericError("sample_pose_sequence: frames must be > 0");
    const int key_every = 25;
    const int keys = frames / key_every + 2;
    std::vector<PoseShapeParams> keyframes;
    keyframes.reserve(size_t(keys));
    for (int k = 0; k < keys; ++k) keyframes.push_back(sample_keyframe(tmpl, rng));

    std::vector<PoseShapeParams> seq;
    seq.reserve(size_t(frames));
    for (int f = 0; f < frames; ++f) {
        const int k = f / key_every;
        const double u = double(f % key_every) / key_every;
        const PoseShapeParams& a = keyframes[size_t(k)];
        const PoseShapeParams& b = keyframes[size_t(k) + 1];
        PoseShapeParams p;
        p.pose.resize(a.pose.size());
        for (size_t i = 0; i < p.pose.size(); ++i) p.pose[i] = a.pose[i] + u * (b.pose[i] - a.pose[i]);
        p.shape.resize(a.shape.size());
        for (size_t i = 0; i < p.shape.size(); ++i)
            p.shape[i] = a.shape[i] + u * (b.shape[i] - a.shape[i]);
        for (size_t i = 0; i < 3; ++i)
            p.root_translation[i] =
                a.root_translation[i] + u * (b.root_translation[i] - a.root_translation[i]);
        seq.push_back(std::move(p));
    }
    return seq;
}

}  // namespace gc
