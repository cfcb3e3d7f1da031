#include "gc/renderer.hpp"

#include <cmath>

#include "gc/error.hpp"

namespace gc {
namespace {

Tensor he_conv(int cout, int cin, Rng& rng) {
    Tensor w = Tensor::zeros({cout, cin, 3, 3});
    const double s = std::sqrt(2.0 / (cin * 9.0));
    for (auto& v : w.data) v = s * rng.normal();
    w.requires_grad = true;
    return w;
}

Tensor zero_bias(int n) {
    Tensor b = Tensor::zeros({n});
    b.requires_grad = true;
    return b;
}

}  // namespace

RendererHead RendererHead::init(int in_channels, Rng& rng) {
    RendererHead h;
    h.in_channels = in_channels;
    h.w0 = he_conv(16, in_channels, rng);
    h.b0 = zero_bias(16);
    h.w1 = he_conv(16, 16, rng);
    h.b1 = zero_bias(16);
    h.w2 = he_conv(4, 16, rng);
    h.b2 = zero_bias(4);
    return h;
}

std::vector<Tensor*> RendererHead::params() {
    return {&w0, &b0, &w1, &b1, &w2, &b2};
}

std::vector<const Tensor*> RendererHead::params() const {
    return {&w0, &b0, &w1, &b1, &w2, &b2};
}

Var render_head_graph(Tape& tape, RendererHead& head, Var input, bool train) {
    const auto& shape = input.shape();
    if (shape.size() != 3 || shape[0] != head.in_channels)
        throw NumericError("render_head: expected [" + std::to_string(head.in_channels) +
                           ",H,W] input, got " + shape_str(shape));
    auto reg = [&](Tensor& t, const char* name) {
        return train ? tape.param(t, name) : tape.input(t, name);
    };
    Var h = leaky_relu(conv3x3(input, reg(head.w0, "head.w0"), reg(head.b0, "head.b0")));
    h = leaky_relu(conv3x3(h, reg(head.w1, "head.w1"), reg(head.b1, "head.b1")));
    h = conv3x3(h, reg(head.w2, "head.w2"), reg(head.b2, "head.b2"));

    // squash the mask channel only
    const int H = shape[1], W = shape[2];
    Var flat = reshape(h, {4, H * W});
    Var rgb = gather_rows(flat, {0, 1, 2});
    Var mask = logistic(gather_rows(flat, {3}));
    return reshape(concat({rgb, mask}, 0), {4, H, W});
}

Var splat_input_graph(Tape& tape, Var descriptors, const RasterBuffer& raster) {
    const auto& dshape = descriptors.shape();
    if (dshape.size() != 2 || dshape[1] != raster.dim)
        throw NumericError("splat_input_graph: descriptor shape mismatch");
    const int H = raster.height, W = raster.width;
    const size_t hw = size_t(H) * W;

    std::vector<int> covered, winners;
    for (size_t at = 0; at < hw; ++at)
        if (raster.winner[at] >= 0) {
            covered.push_back(int(at));
            winners.push_back(raster.winner[at]);
        }
    Var planes;
    if (covered.empty()) {
        planes = tape.constant(Tensor::zeros({raster.dim, H, W}));
    } else {
        Var rows = gather_rows(descriptors, winners);
        Var img = scatter_rows(rows, covered, H * W);
        planes = reshape(transpose(img), {raster.dim, H, W});
    }
    Tensor cov = Tensor::zeros({1, H, W});
    for (size_t at = 0; at < hw; ++at) cov.data[at] = raster.coverage[at] ? 1.0 : 0.0;
    return concat({planes, tape.constant(std::move(cov))}, 0);
}

RenderOutput render_head_eval(RendererHead& head, const RasterBuffer& raster) {
    Tape tape;
    // channels + coverage as one constant input block
    Tensor input = Tensor::zeros({raster.dim + 1, raster.height, raster.width});
    const size_t hw = size_t(raster.height) * raster.width;
    std::copy(raster.channels.begin(), raster.channels.end(), input.data.begin());
    for (size_t at = 0; at < hw; ++at)
        input.data[size_t(raster.dim) * hw + at] = raster.coverage[at] ? 1.0 : 0.0;
    Var out = render_head_graph(tape, head, tape.constant(std::move(input)), false);

    RenderOutput r;
    r.rgb = Image::zeros(raster.width, raster.height);
    r.mask.assign(hw, 0.0);
    const Tensor& o = out.value();
    for (int y = 0; y < raster.height; ++y)
        for (int x = 0; x < raster.width; ++x) {
            const size_t at = size_t(y) * raster.width + x;
            for (int c = 0; c < 3; ++c) r.rgb.at(y, x, c) = o.data[size_t(c) * hw + at];
            r.mask[at] = o.data[size_t(3) * hw + at];
        }
    return r;
}

}  // namespace gc
