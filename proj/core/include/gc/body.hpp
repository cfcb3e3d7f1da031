#pragma once

#include <array>
#include <string>
#include <vector>

#include "gc/mesh.hpp"

namespace gc {

// Semantic vertex groups; the draping input keeps torso_limbs only.
enum VertexGroup : int {
    kGroupTorsoLimbs = 0,
    kGroupHead = 1,
    kGroupHandLeft = 2,
    kGroupHandRight = 3,
    kGroupFootLeft = 4,
    kGroupFootRight = 5,
};

// Parametric articulated body: low-poly humanoid with J=16 joints and B=4
// shape blend directions (height, girth, leg length, shoulder width).
struct BodyTemplate {
    TriMesh mesh;                              // rest pose
    std::vector<std::array<int, 2>> edges;     // unique undirected, sorted
    std::vector<int> groups;                   // per vertex, VertexGroup
    std::vector<double> joints;                // 3J rest positions
    std::vector<int> parents;                  // J entries, -1 at the root
    std::vector<std::string> joint_names;
    std::vector<double> skin_weights;          // V x J row-major, rows sum to 1
    std::vector<double> joint_reg;             // J x V row-major, rows sum to 1
    std::vector<double> shape_dirs;            // B x V x 3
    int shape_count = 0;

    int joint_count() const { return int(parents.size()); }
    int vertex_count() const { return mesh.vertex_count(); }
    // Throws NumericError when any invariant is broken (weight rows not
    // normalized, parent cycles, face/edge indices out of range).
    void validate() const;
};

struct PoseShapeParams {
    std::vector<double> pose;   // 3J axis-angle, |angle| <= pi after canonicalization
    std::vector<double> shape;  // B blend coefficients
    std::array<double, 3> root_translation{0, 0, 0};
};

struct PosedBody {
    TriMesh mesh;                       // posed vertices, template face list
    std::vector<double> joints;         // 3J posed joint positions
    PoseShapeParams provenance;
    const BodyTemplate* source = nullptr;  // non-owning; must outlive the body
};

// Deterministic analytic humanoid (~900 vertices). The same geometry is
// shipped under assets/ via save_template.
BodyTemplate default_template();

// Linear blend skinning with shape blending applied first; joints are
// regressed from the shaped vertices so limbs pivot correctly on resized
// bodies.
PosedBody pose_body(const BodyTemplate& tmpl, const PoseShapeParams& params);

// Draping-network input cloud: vertices outside head/hand/foot groups plus
// the midpoints of edges whose endpoints both survive. The count depends
// only on the template.
PointCloud3 body_point_cloud(const PosedBody& body);

// Wraps an axis-angle vector to magnitude <= pi (flipping the axis).
void canonicalize_pose(std::vector<double>& pose);

// Template file pair: a PLY with per-vertex group labels and a text sidecar
// with joints, weights, regressor, and shape directions (schema in
// FORMATS.md).
void save_template(const BodyTemplate& tmpl, const std::string& ply_path,
                   const std::string& rig_path);
BodyTemplate load_template(const std::string& ply_path, const std::string& rig_path);

// Random pose/shape sequences: keyframes drawn from per-joint ranges, linear
// interpolation in between. Used by the dataset generator.
std::vector<PoseShapeParams> sample_pose_sequence(const BodyTemplate& tmpl, int frames,
                                                  Rng& rng);

}  // namespace gc
