#pragma once

#include "gc/image.hpp"
#include "gc/raster.hpp"
#include "gc/rng.hpp"
#include "gc/tape.hpp"

namespace gc {

// Compact convolutional decoder: (p+1) input planes (descriptors plus the
// coverage mask) -> 16 -> 16 -> 4 with 3x3 kernels; the fourth output
// channel is squashed to [0,1] and read as the predicted garment mask.
struct RendererHead {
    int in_channels = 9;
    Tensor w0, b0, w1, b1, w2, b2;

    static RendererHead init(int in_channels, Rng& rng);
    std::vector<Tensor*> params();
    std::vector<const Tensor*> params() const;
};

// Graph from a [p+1, H, W] input to [4, H, W] with the mask row squashed.
// train=false registers the head as constants (no parameter gradients).
Var render_head_graph(Tape& tape, RendererHead& head, Var input, bool train);

// Builds the [p+1, H, W] input Var from a descriptor matrix and a raster:
// descriptor rows are gathered by the per-pixel winners and scattered into
// the image, then the coverage plane is appended.
Var splat_input_graph(Tape& tape, Var descriptors, const RasterBuffer& raster);

// Plain evaluation: raster -> RGB image + soft mask (H*W, row-major).
struct RenderOutput {
    Image rgb;
    std::vector<double> mask;
};
RenderOutput render_head_eval(RendererHead& head, const RasterBuffer& raster);

}  // namespace gc
