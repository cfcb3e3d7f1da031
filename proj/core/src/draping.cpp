#include "gc/draping.hpp"

#include <cmath>

#include "gc/error.hpp"

namespace gc {
namespace {

Tensor he_matrix(int rows, int cols, double gain, Rng& rng) {
    Tensor w = Tensor::zeros({rows, cols});
    const double s = gain * std::sqrt(2.0 / rows);
    for (auto& v : w.data) v = s * rng.normal();
    w.requires_grad = true;
    return w;
}

Tensor const_bias(int n, double value) {
    Tensor b = Tensor::full({n}, value);
    b.requires_grad = true;
    return b;
}

}  // namespace

Tensor random_code(int dim, Rng& rng) {
    Tensor z = Tensor::zeros({dim});
    double norm2 = 0;
    for (auto& v : z.data) {
        v = rng.normal();
        norm2 += v * v;
    }
    const double norm = std::sqrt(norm2);
    // radius ~ u^(1/d) places the point uniformly inside the ball
    const double r = std::pow(rng.uniform(), 1.0 / dim);
    if (norm > 0)
        for (auto& v : z.data) v *= r / norm;
    z.requires_grad = true;
    return z;
}

double code_norm(const Tensor& z) {
    double n2 = 0;
    for (double v : z.data) n2 += v * v;
    return std::sqrt(n2);
}

void clip_code(Tensor& z) {
    const double n = code_norm(z);
    if (n > 1.0)
        for (auto& v : z.data) v /= n;
}

Tensor average_codes(const std::vector<Tensor>& codes) {
    if (codes.empty()) throw NumericError("average_codes: no codes");
    Tensor out = Tensor::zeros(codes[0].shape);
    for (const Tensor& z : codes) {
        if (z.shape != out.shape) throw NumericError("average_codes: shape mismatch");
        for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += z.data[i];
    }
    for (auto& v : out.data) v /= double(codes.size());
    out.requires_grad = true;
    return out;
}

DrapingDims DrapingDims::toy() {
    DrapingDims d;
    d.encoder = {8, 8, 8, 12, 16};
    d.trunk = {6, 8, 12};
    d.head = {10, 8};
    d.out_points = 24;
    return d;
}

DrapingModel DrapingModel::init(const DrapingDims& dims, Rng& rng) {
    DrapingModel m;
    m.dims = dims;
    int in = dims.code_dim;
    for (int l = 0; l < 5; ++l) {
        m.enc_w[size_t(l)] = he_matrix(in, dims.encoder[size_t(l)], 1.0, rng);
        m.enc_b[size_t(l)] = const_bias(dims.encoder[size_t(l)], 0.0);
        in = dims.encoder[size_t(l)];
    }
    for (int l = 0; l < 3; ++l) {
        const int w = dims.trunk[size_t(l)];
        // modulation heads start near identity: small weights, scale bias 1
        m.mod_scale_w[size_t(l)] = he_matrix(dims.latent(), w, 0.05, rng);
        m.mod_scale_b[size_t(l)] = const_bias(w, 1.0);
        m.mod_shift_w[size_t(l)] = he_matrix(dims.latent(), w, 0.05, rng);
        m.mod_shift_b[size_t(l)] = const_bias(w, 0.0);
    }
    const int trunk_in[3] = {3, dims.trunk[0], dims.trunk[1]};
    for (int l = 0; l < 3; ++l) {
        m.trunk_w[size_t(l)] = he_matrix(trunk_in[l], dims.trunk[size_t(l)], 1.0, rng);
        m.trunk_b[size_t(l)] = const_bias(dims.trunk[size_t(l)], 0.0);
    }
    const int head_in = dims.trunk[2] * 2 + 3;
    const int head_dims[4] = {head_in, dims.head[0], dims.head[1], 3};
    for (int l = 0; l < 3; ++l) {
        // a moderate last-layer gain spreads the initial cloud to garment
        // scale, which keeps the first auction rounds well-conditioned
        const double gain = l == 2 ? 0.3 : 1.0;
        m.head_w[size_t(l)] = he_matrix(head_dims[l], head_dims[l + 1], gain, rng);
        m.head_b[size_t(l)] = const_bias(head_dims[l + 1], 0.0);
    }
    return m;
}

std::vector<Tensor*> DrapingModel::params() {
    std::vector<Tensor*> out;
    for (auto& t : enc_w) out.push_back(&t);
    for (auto& t : enc_b) out.push_back(&t);
    for (int l = 0; l < 3; ++l) {
        out.push_back(&mod_scale_w[size_t(l)]);
        out.push_back(&mod_scale_b[size_t(l)]);
        out.push_back(&mod_shift_w[size_t(l)]);
        out.push_back(&mod_shift_b[size_t(l)]);
    }
    for (auto& t : trunk_w) out.push_back(&t);
    for (auto& t : trunk_b) out.push_back(&t);
    for (auto& t : head_w) out.push_back(&t);
    for (auto& t : head_b) out.push_back(&t);
    return out;
}

std::vector<std::pair<std::string, Tensor*>> DrapingModel::named_params() {
    std::vector<std::pair<std::string, Tensor*>> out;
    int i = 0;
    for (Tensor* t : params()) out.emplace_back("p" + std::to_string(i++), t);
    return out;
}

long long DrapingModel::param_count() const {
    long long n = 0;
    for (const Tensor* t : const_cast<DrapingModel*>(this)->params()) n += t->numel();
    return n;
}

SeedDraw draw_seeds(int body_count, int out_points, Rng& rng) {
    if (body_count <= 0) throw NumericError("draw_seeds: empty body cloud");
    SeedDraw d;
    d.index.resize(size_t(out_points));
    d.jitter.resize(size_t(out_points) * 3);
    for (int i = 0; i < out_points; ++i) d.index[size_t(i)] = int(rng.below(std::uint64_t(body_count)));
    for (auto& j : d.jitter) j = rng.normal(0.0, 0.005);
    return d;
}

CodeEncoding encode_code_graph(Tape& tape, DrapingModel& model, Var z, bool train) {
    auto reg = [&](Tensor& t, const std::string& name) {
        return train ? tape.param(t, name) : tape.input(t, name);
    };
    // z enters as a 1 x d row
    Var h = reshape(z, {1, model.dims.code_dim});
    for (int l = 0; l < 5; ++l) {
        h = add_rows(matmul(h, reg(model.enc_w[size_t(l)], "enc_w")),
                     reg(model.enc_b[size_t(l)], "enc_b"));
        if (l < 4) h = leaky_relu(h);
    }
    CodeEncoding enc;
    enc.latent = h;  // [1, latent]
    for (int l = 0; l < 3; ++l) {
        const int w = model.dims.trunk[size_t(l)];
        enc.scale[size_t(l)] = reshape(
            add_rows(matmul(h, reg(model.mod_scale_w[size_t(l)], "mod_scale_w")),
                     reg(model.mod_scale_b[size_t(l)], "mod_scale_b")),
            {w});
        enc.shift[size_t(l)] = reshape(
            add_rows(matmul(h, reg(model.mod_shift_w[size_t(l)], "mod_shift_w")),
                     reg(model.mod_shift_b[size_t(l)], "mod_shift_b")),
            {w});
    }
    return enc;
}

std::vector<double> encode_code(DrapingModel& model, const Tensor& z) {
    Tape tape;
    Tensor zc = z;
    zc.requires_grad = false;
    const CodeEncoding enc = encode_code_graph(tape, model, tape.constant(std::move(zc)), false);
    const auto& d = enc.latent.value().data;
    return std::vector<double>(d.begin(), d.end());
}

Var deform_graph(Tape& tape, DrapingModel& model, const PointCloud3& body_cloud,
                 const SeedDraw& draw, Var z, bool train) {
    if (body_cloud.count() == 0) throw NumericError("deform: empty body cloud");
    const int n = int(draw.index.size());
    if (n != model.dims.out_points)
        throw NumericError("deform: seed draw does not match out_points");

    // root-center on the cloud centroid
    double center[3] = {0, 0, 0};
    for (int i = 0; i < body_cloud.count(); ++i)
        for (int k = 0; k < 3; ++k) center[k] += body_cloud.p(i)[k];
    for (double& c : center) c /= double(body_cloud.count());

    Tensor seeds = Tensor::zeros({n, 3});
    for (int i = 0; i < n; ++i) {
        const double* p = body_cloud.p(draw.index[size_t(i)]);
        for (int k = 0; k < 3; ++k)
            seeds.at(i, k) = p[k] - center[k] + draw.jitter[size_t(i) * 3 + k];
    }

    auto reg = [&](Tensor& t, const std::string& name) {
        return train ? tape.param(t, name) : tape.input(t, name);
    };
    const CodeEncoding enc = encode_code_graph(tape, model, z, train);

    Var pts = tape.constant(std::move(seeds));
    Var h = pts;
    for (int l = 0; l < 3; ++l) {
        h = add_rows(matmul(h, reg(model.trunk_w[size_t(l)], "trunk_w")),
                     reg(model.trunk_b[size_t(l)], "trunk_b"));
        h = leaky_relu(modulate(h, enc.scale[size_t(l)], enc.shift[size_t(l)]));
    }
    Var global = reduce_max0(h);  // [trunk2]

    // First head layer on [h || global || seeds] without materializing the
    // concat: split the weight rows, and multiply the (identical) global
    // row once instead of per point.
    const int t2 = model.dims.trunk[2];
    Var w0 = reg(model.head_w[0], "head_w");
    std::vector<int> rows_h(static_cast<size_t>(t2)), rows_g(static_cast<size_t>(t2)), rows_s(3);
    for (int r = 0; r < t2; ++r) rows_h[size_t(r)] = r;
    for (int r = 0; r < t2; ++r) rows_g[size_t(r)] = t2 + r;
    for (int r = 0; r < 3; ++r) rows_s[size_t(r)] = 2 * t2 + r;
    Var g_row = matmul(reshape(global, {1, t2}), gather_rows(w0, rows_g));  // [1, head0]
    Var o = add(matmul(h, gather_rows(w0, rows_h)), matmul(pts, gather_rows(w0, rows_s)));
    o = add_rows(o, reshape(g_row, {model.dims.head[0]}));
    o = leaky_relu(add_rows(o, reg(model.head_b[0], "head_b")));
    for (int l = 1; l < 3; ++l) {
        o = add_rows(matmul(o, reg(model.head_w[size_t(l)], "head_w")),
                     reg(model.head_b[size_t(l)], "head_b"));
        if (l < 2) o = leaky_relu(o);
    }
    Tensor center_row({3}, {center[0], center[1], center[2]});
    return add_rows(o, tape.constant(std::move(center_row)));
}

PointCloud3 deform_with_draw(DrapingModel& model, const PointCloud3& body_cloud,
                             const SeedDraw& draw, const Tensor& z) {
    Tape tape;
    Tensor zc = z;
    zc.requires_grad = false;
    Var out = deform_graph(tape, model, body_cloud, draw, tape.constant(std::move(zc)), false);
    PointCloud3 cloud;
    cloud.xyz.assign(out.value().data.begin(), out.value().data.end());
    return cloud;
}

PointCloud3 deform(DrapingModel& model, const PointCloud3& body_cloud, const Tensor& z,
                   Rng& rng) {
    const SeedDraw draw = draw_seeds(body_cloud.count(), model.dims.out_points, rng);
    return deform_with_draw(model, body_cloud, draw, z);
}

}  // namespace gc
