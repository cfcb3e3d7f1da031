#pragma once

#include <array>
#include <string>
#include <vector>

#include "gc/mesh.hpp"
#include "gc/rng.hpp"
#include "gc/tape.hpp"
#include "gc/tensor.hpp"

namespace gc {

// Outfit codes are plain tensors of shape [code_dim] constrained to the
// unit ball after every optimizer step.
Tensor random_code(int dim, Rng& rng);  // uniform inside the unit ball
void clip_code(Tensor& z);              // project onto the unit ball
double code_norm(const Tensor& z);
// Elementwise mean of several codes (the multi-start averaging step).
Tensor average_codes(const std::vector<Tensor>& codes);

struct DrapingDims {
    int code_dim = 8;
    std::array<int, 5> encoder{64, 128, 256, 512, 512};  // FC widths; last = latent
    std::array<int, 3> trunk{64, 128, 256};              // per-point widths, modulated
    std::array<int, 2> head{96, 48};                     // decoder widths before the xyz output
    int out_points = 8192;

    static DrapingDims toy();  // small widths for gradient checks
    int latent() const { return encoder[4]; }
};

// Latent-conditioned draping network: a per-point trunk over body seed
// points whose layers are affinely modulated (scale, shift) by an encoding
// of the outfit code; a max-pooled global feature and the seed coordinates
// feed a per-point head that emits absolute output coordinates.
struct DrapingModel {
    DrapingDims dims;
    // declaration order is the checkpoint block order
    std::array<Tensor, 5> enc_w, enc_b;
    std::array<Tensor, 3> mod_scale_w, mod_scale_b, mod_shift_w, mod_shift_b;
    std::array<Tensor, 3> trunk_w, trunk_b;
    std::array<Tensor, 3> head_w, head_b;

    static DrapingModel init(const DrapingDims& dims, Rng& rng);
    std::vector<Tensor*> params();
    std::vector<std::pair<std::string, Tensor*>> named_params();
    long long param_count() const;
};

// Fixed resampling of a body cloud to out_points seeds: indices with
// repetition plus Gaussian jitter (sigma 5 mm). Reusing one draw across
// frames keeps output point identities consistent across poses.
struct SeedDraw {
    std::vector<int> index;  // out_points entries into the body cloud
    dvec jitter;             // 3 * out_points
};
SeedDraw draw_seeds(int body_count, int out_points, Rng& rng);

// Code encoding: the latent vector plus per-trunk-layer (scale, shift).
struct CodeEncoding {
    Var latent;
    std::array<Var, 3> scale, shift;
};
CodeEncoding encode_code_graph(Tape& tape, DrapingModel& model, Var z, bool train);

// Plain-evaluation variant of the encoder output.
std::vector<double> encode_code(DrapingModel& model, const Tensor& z);

// Full draping graph: seeds are the body cloud rows selected by the draw,
// centered on the cloud centroid, jittered; the network output is absolute
// coordinates with the centroid added back, so translating the body
// translates the output exactly. Differentiable w.r.t. z (and the model
// parameters when train=true).
Var deform_graph(Tape& tape, DrapingModel& model, const PointCloud3& body_cloud,
                 const SeedDraw& draw, Var z, bool train);

// Convenience: fresh seed draw from rng, returns the output cloud.
PointCloud3 deform(DrapingModel& model, const PointCloud3& body_cloud, const Tensor& z,
                   Rng& rng);
PointCloud3 deform_with_draw(DrapingModel& model, const PointCloud3& body_cloud,
                             const SeedDraw& draw, const Tensor& z);

}  // namespace gc
