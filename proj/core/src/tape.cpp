#include "gc/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <deque>

#include "gc/error.hpp"

namespace gc {
namespace {

enum class Op {
    Leaf, Add, Sub, Mul, Div, MatMul, AddRows, Modulate, Concat, GatherRows,
    ScatterRows, RepeatRow, ReduceMax0, ReduceMean, ReduceSum, LeakyRelu,
    Tanh, Logistic, Sqrt, Abs, Reshape, Transpose, Conv3x3,
};

const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "multiply";
        case Op::Div: return "divide";
        case Op::MatMul: return "matmul";
        case Op::AddRows: return "add_rows";
        case Op::Modulate: return "modulate";
        case Op::Concat: return "concat";
        case Op::GatherRows: return "gather_rows";
        case Op::ScatterRows: return "scatter_rows";
        case Op::RepeatRow: return "repeat_row";
        case Op::ReduceMax0: return "reduce_max0";
        case Op::ReduceMean: return "reduce_mean";
        case Op::ReduceSum: return "reduce_sum";
        case Op::LeakyRelu: return "leaky_relu";
        case Op::Tanh: return "tanh";
        case Op::Logistic: return "logistic";
        case Op::Sqrt: return "sqrt";
        case Op::Abs: return "abs";
        case Op::Reshape: return "reshape";
        case Op::Transpose: return "transpose";
        case Op::Conv3x3: return "conv3x3";
    }
    return "?";
}

constexpr double kLeakySlope = 0.2;

using CM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using MapCM = Eigen::Map<CM>;
using MapCCM = Eigen::Map<const CM>;

struct Node {
    Op op = Op::Leaf;
    int a = -1, b = -1, c = -1;     // input node ids (c for conv bias)
    std::vector<int> extra;          // additional inputs (concat)
    const Tensor* ext = nullptr;     // external leaf storage
    Tensor* ext_mut = nullptr;       // param leaf (gradient sink)
    Tensor owned;                    // value of non-leaf nodes / owned constants
    dvec grad;                       // filled during backward
    std::vector<int> idx;            // gather/scatter/argmax bookkeeping
    int iattr = 0;                   // axis or out_rows
    bool needs_grad = false;
    std::string name;
};

}  // namespace

struct Tape::Impl {
    std::deque<Node> nodes;
    bool backward_ran = false;

    const Tensor& val(int id) const {
        const Node& n = nodes[size_t(id)];
        return n.ext ? *n.ext : n.owned;
    }
    std::string label(int id) const {
        const Node& n = nodes[size_t(id)];
        std::string s = "node " + std::to_string(id) + " (" + op_name(n.op);
        if (!n.name.empty()) s += " '" + n.name + "'";
        return s + ")";
    }
};

Tape::Tape() : impl_(new Impl) {}
Tape::~Tape() { delete impl_; }
int Tape::size() const { return int(impl_->nodes.size()); }
const Tensor& Tape::value(int id) const { return impl_->val(id); }
bool Tape::backward_done() const { return impl_->backward_ran; }

const Tensor& Var::value() const { return tape->value(id); }
const std::vector<int>& Var::shape() const { return value().shape; }

namespace {

[[noreturn]] void fail(Tape::Impl* t, Op op, const std::string& msg) {
    throw NumericError(std::string(op_name(op)) + ": " + msg +
                       " (node " + std::to_string(t->nodes.size()) + ")");
}

Node& push(Tape::Impl* t, Node n) {
    if (t->backward_ran)
        throw NumericError("tape already ran backward; build a fresh graph");
    t->nodes.push_back(std::move(n));
    return t->nodes.back();
}

Var wrap(Tape* tape, Tape::Impl* t) { return Var{tape, int(t->nodes.size()) - 1}; }

void check_same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw NumericError("operands belong to different tapes");
}

}  // namespace

Var Tape::input(const Tensor& t, std::string name) {
    t.validate_finite(name.empty() ? "input leaf" : name);
    Node n;
    n.op = Op::Leaf;
    n.ext = &t;
    n.name = std::move(name);
    push(impl_, std::move(n));
    return wrap(this, impl_);
}

Var Tape::param(Tensor& t, std::string name) {
    if (!t.requires_grad)
        throw NumericError("param leaf '" + name + "' lacks requires_grad");
    t.validate_finite(name.empty() ? "param leaf" : name);
    Node n;
    n.op = Op::Leaf;
    n.ext = &t;
    n.ext_mut = &t;
    n.needs_grad = true;
    n.name = std::move(name);
    push(impl_, std::move(n));
    return wrap(this, impl_);
}

Var Tape::constant(Tensor t) {
    t.validate_finite("constant leaf");
    Node n;
    n.op = Op::Leaf;
    n.owned = std::move(t);
    push(impl_, std::move(n));
    return wrap(this, impl_);
}

namespace {

// Shared helper: elementwise binary with scalar broadcast on either side.
Var binary(Var av, Var bv, Op op) {
    check_same_tape(av, bv);
    Tape::Impl* t = av.tape->impl_;
    const Tensor& a = t->val(av.id);
    const Tensor& b = t->val(bv.id);
    const bool a_scalar = a.numel() == 1;
    const bool b_scalar = b.numel() == 1;
    if (!a.same_shape(b) && !a_scalar && !b_scalar)
        fail(t, op, "shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape) +
                    " between " + t->label(av.id) + " and " + t->label(bv.id));

    Node n;
    n.op = op;
    n.a = av.id;
    n.b = bv.id;
    n.needs_grad = t->nodes[av.id].needs_grad || t->nodes[bv.id].needs_grad;
    n.owned.shape = a_scalar && !b_scalar ? b.shape : a.shape;
    const size_t m = size_t(n.owned.numel());
    n.owned.data.resize(m);
    const double* pa = a.data.data();
    const double* pb = b.data.data();
    double* po = n.owned.data.data();
    const size_t sa = a_scalar ? 0 : 1, sb = b_scalar ? 0 : 1;
    switch (op) {
        case Op::Add: for (size_t i = 0; i < m; ++i) po[i] = pa[i * sa] + pb[i * sb]; break;
        case Op::Sub: for (size_t i = 0; i < m; ++i) po[i] = pa[i * sa] - pb[i * sb]; break;
        case Op::Mul: for (size_t i = 0; i < m; ++i) po[i] = pa[i * sa] * pb[i * sb]; break;
        case Op::Div: for (size_t i = 0; i < m; ++i) po[i] = pa[i * sa] / pb[i * sb]; break;
        default: fail(t, op, "not a binary op");
    }
    push(t, std::move(n));
    return wrap(av.tape, t);
}

Var unary(Var av, Op op) {
    Tape::Impl* t = av.tape->impl_;
    const Tensor& a = t->val(av.id);
    Node n;
    n.op = op;
    n.a = av.id;
    n.needs_grad = t->nodes[av.id].needs_grad;
    n.owned.shape = a.shape;
    n.owned.data.resize(a.data.size());
    const double* pa = a.data.data();
    double* po = n.owned.data.data();
    const size_t m = a.data.size();
    switch (op) {
        case Op::LeakyRelu:
            for (size_t i = 0; i < m; ++i) po[i] = pa[i] > 0 ? pa[i] : kLeakySlope * pa[i];
            break;
        case Op::Tanh:
            for (size_t i = 0; i < m; ++i) po[i] = std::tanh(pa[i]);
            break;
        case Op::Logistic:
            for (size_t i = 0; i < m; ++i) po[i] = 1.0 / (1.0 + std::exp(-pa[i]));
            break;
        case Op::Sqrt:
            for (size_t i = 0; i < m; ++i) {
                if (pa[i] < 0) fail(t, op, "negative operand");
                po[i] = std::sqrt(pa[i]);
            }
            break;
        case Op::Abs:
            for (size_t i = 0; i < m; ++i) po[i] = std::fabs(pa[i]);
            break;
        default: fail(t, op, "not a unary op");
    }
    push(t, std::move(n));
    return wrap(av.tape, t);
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, Op::Add); }
Var sub(Var a, Var b) { return binary(a, b, Op::Sub); }
Var mul(Var a, Var b) { return binary(a, b, Op::Mul); }
Var divide(Var a, Var b) { return binary(a, b, Op::Div); }
Var leaky_relu(Var a) { return unary(a, Op::LeakyRelu); }
Var tanh_op(Var a) { return unary(a, Op::Tanh); }
Var logistic(Var a) { return unary(a, Op::Logistic); }
Var sqrt_op(Var a) { return unary(a, Op::Sqrt); }
Var abs_op(Var a) { return unary(a, Op::Abs); }

Var matmul(Var av, Var bv) {
    check_same_tape(av, bv);
    Tape::Impl* t = av.tape->impl_;
    const Tensor& a = t->val(av.id);
    const Tensor& b = t->val(bv.id);
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        fail(t, Op::MatMul, "incompatible shapes " + shape_str(a.shape) + " x " +
                          shape_str(b.shape) + " at " + t->label(av.id));
    const int m = a.rows(), k = a.cols(), n2 = b.cols();
    Node n;
    n.op = Op::MatMul;
    n.a = av.id;
    n.b = bv.id;
    n.needs_grad = t->nodes[av.id].needs_grad || t->nodes[bv.id].needs_grad;
    n.owned.shape = {m, n2};
    n.owned.data.resize(size_t(m) * n2);
    // Row-major data viewed as column-major transposes: C^T = B^T A^T.
    MapCCM At(a.data.data(), k, m), Bt(b.data.data(), n2, k);
    MapCM Ct(n.owned.data.data(), n2, m);
    Ct.noalias() = Bt * At;
    push(t, std::move(n));
    return wrap(av.tape, t);
}

Var add_rows(Var av, Var rv) {
    check_same_tape(av, rv);
    Tape::Impl* t = av.tape->impl_;
    const Tensor& a = t->val(av.id);
    const Tensor& r = t->val(rv.id);
    if (a.rank() != 2 || r.rank() != 1 || r.shape[0] != a.cols())
        fail(t, Op::AddRows, "expected [m,n] + [n], got " + shape_str(a.shape) + " + " +
                           shape_str(r.shape));
    Node n;
    n.op = Op::AddRows;
    n.a = av.id;
    n.b = rv.id;
    n.needs_grad = t->nodes[av.id].needs_grad || t->nodes[rv.id].needs_grad;
    n.owned.shape = a.shape;
    n.owned.data.resize(a.data.size());
    const int rows = a.rows(), cols = a.cols();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            n.owned.data[size_t(i) * cols + j] = a.data[size_t(i) * cols + j] + r.data[j];
    push(t, std::move(n));
    return wrap(av.tape, t);
}

Var modulate(Var xv, Var sv, Var bv) {
    check_same_tape(xv, sv);
    check_same_tape(xv, bv);
    Tape::Impl* t = xv.tape->impl_;
    const Tensor& x = t->val(xv.id);
    const Tensor& s = t->val(sv.id);
    const Tensor& b = t->val(bv.id);
    if (x.rank() != 2 || s.rank() != 1 || b.rank() != 1 || s.shape[0] != x.cols() ||
        b.shape[0] != x.cols())
        fail(t, Op::Modulate, "expected x[m,n], scale[n], shift[n]; got " +
                            shape_str(x.shape) + ", " + shape_str(s.shape) + ", " +
                            shape_str(b.shape));
    Node n;
    n.op = Op::Modulate;
    n.a = xv.id;
    n.b = sv.id;
    n.c = bv.id;
    n.needs_grad = t->nodes[xv.id].needs_grad || t->nodes[sv.id].needs_grad ||
                   t->nodes[bv.id].needs_grad;
    n.owned.shape = x.shape;
    n.owned.data.resize(x.data.size());
    const int rows = x.rows(), cols = x.cols();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            n.owned.data[size_t(i) * cols + j] =
                x.data[size_t(i) * cols + j] * s.data[j] + b.data[j];
    push(t, std::move(n));
    return wrap(xv.tape, t);
}

Var concat(const std::vector<Var>& parts, int axis) {
    if (parts.empty()) throw NumericError("concat: no operands");
    Tape::Impl* t = parts[0].tape->impl_;
    for (const Var& p : parts) check_same_tape(parts[0], p);
    const Tensor& first = t->val(parts[0].id);
    if (axis != 0 && axis != 1) fail(t, Op::Concat, "axis must be 0 or 1");
    if (axis == 1 && first.rank() != 2) fail(t, Op::Concat, "axis 1 requires 2-d operands");

    Node n;
    n.op = Op::Concat;
    n.iattr = axis;
    n.needs_grad = false;
    for (const Var& p : parts) {
        n.extra.push_back(p.id);
        n.needs_grad = n.needs_grad || t->nodes[p.id].needs_grad;
    }
    if (axis == 0) {
        std::vector<int> trailing(first.shape.begin() + 1, first.shape.end());
        int total = 0;
        for (const Var& p : parts) {
            const Tensor& v = t->val(p.id);
            std::vector<int> tr(v.shape.begin() + 1, v.shape.end());
            if (v.rank() != first.rank() || tr != trailing)
                fail(t, Op::Concat, "trailing dims differ: " + shape_str(first.shape) +
                                  " vs " + shape_str(v.shape));
            total += v.shape[0];
        }
        n.owned.shape = first.shape;
        n.owned.shape[0] = total;
        n.owned.data.reserve(size_t(shape_numel(n.owned.shape)));
        for (const Var& p : parts) {
            const Tensor& v = t->val(p.id);
            n.owned.data.insert(n.owned.data.end(), v.data.begin(), v.data.end());
        }
    } else {
        const int rows = first.rows();
        int total = 0;
        for (const Var& p : parts) {
            const Tensor& v = t->val(p.id);
            if (v.rank() != 2 || v.rows() != rows)
                fail(t, Op::Concat, "row counts differ: " + shape_str(first.shape) + " vs " +
                                  shape_str(v.shape));
            total += v.cols();
        }
        n.owned.shape = {rows, total};
        n.owned.data.resize(size_t(rows) * total);
        int off = 0;
        for (const Var& p : parts) {
            const Tensor& v = t->val(p.id);
            const int c = v.cols();
            for (int i = 0; i < rows; ++i)
                std::copy_n(v.data.begin() + size_t(i) * c, c,
                            n.owned.data.begin() + size_t(i) * total + off);
            off += c;
        }
    }
    push(t, std::move(n));
    return wrap(parts[0].tape, t);
}

Var gather_rows(Var av, std::vector<int> idx) {
    Tape::Impl* t = av.tape->impl_;
    const Tensor& a = t->val(av.id);
    if (a.rank() != 2) fail(t, Op::GatherRows, "expected 2-d operand");
    for (int i : idx)
        if (i < 0 || i >= a.rows())
            fail(t, Op::GatherRows, "index " + std::to_string(i) + " out of range for " +
                                  shape_str(a.shape));
    Node n;
    n.op = Op::GatherRows;
    n.a = av.id;
    n.needs_grad = t->nodes[av.id].needs_grad;
    const int cols = a.cols();
    n.owned.shape = {int(idx.size()), cols};
    n.owned.data.resize(idx.size() * size_t(cols));
    for (size_t r = 0; r < idx.size(); ++r)
        std::copy_n(a.data.begin() + size_t(idx[r]) * cols, cols,
                    n.owned.data.begin() + r * cols);
    n.idx = std::move(idx);
    push(t, std::move(n));
    return wrap(av.tape, t);
}

Var scatter_rows(Var av, std::vector<int> idx, int out_rows) {
    Tape::Impl* t = av.tape->impl_;
    const Tensor& a = t->val(av.id);
    if (a.rank() != 2 || int(idx.size()) != a.rows())
        fail(t, Op::ScatterRows, "index count must equal rows of " + shape_str(a.shape));
    for (int i : idx)
        if (i < 0 || i >= out_rows)
            fail(t, Op::ScatterRows, "target row " + std::to_string(i) + " out of range");
    Node n;
    n.op = Op::ScatterRows;
    n.a = av.id;
    n.iattr = out_rows;
    n.needs_grad = t->nodes[av.id].needs_grad;
    const int cols = a.cols();
    n.owned.shape = {out_rows, cols};
    n.owned.data.assign(size_t(out_rows) * cols, 0.0);
    for (size_t r = 0; r < idx.size(); ++r)
        for (int j = 0; j < cols; ++j)
            n.owned.data[size_t(idx[r]) * cols + j] += a.data[r * cols + j];
    n.idx = std::move(idx);
    push(t, std::move(n));
    return wrap(av.tape, t);
}

Var repeat_row(Var vv, int rows) {
    Tape::Impl* t = vv.tape->impl_;
    const Tensor& v = t->val(vv.id);
    if (v.rank() != 1 || rows <= 0) fail(t, Op::RepeatRow, "expected 1-d operand, rows > 0");
    Node n;
    n.op = Op::RepeatRow;
    n.a = vv.id;
    n.needs_grad = t->nodes[vv.id].needs_grad;
    const int cols = v.shape[0];
    n.owned.shape = {rows, cols};
    n.owned.data.resize(size_t(rows) * cols);
    for (int i = 0; i < rows; ++i)
        std::copy_n(v.data.begin(), cols, n.owned.data.begin() + size_t(i) * cols);
    push(t, std::move(n));
    return wrap(vv.tape, t);
}

Var reduce_max0(Var av) {
    Tape::Impl* t = av.tape->impl_;
    const Tensor& a = t->val(av.id);
    if (a.rank() != 2 || a.rows() == 0) fail(t, Op::ReduceMax0, "expected nonempty 2-d operand");
    Node n;
    n.op = Op::ReduceMax0;
    n.a = av.id;
    n.needs_grad = t->nodes[av.id].needs_grad;
    const int rows = a.rows(), cols = a.cols();
    n.owned.shape = {cols};
    n.owned.data.assign(size_t(cols), 0.0);
    n.idx.assign(size_t(cols), 0);
    for (int j = 0; j < cols; ++j) n.owned.data[j] = a.data[j];
    for (int i = 1; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            const double v = a.data[size_t(i) * cols + j];
            if (v > n.owned.data[j]) {
                n.owned.data[j] = v;
                n.idx[j] = i;
            }
        }
    push(t, std::move(n));
    return wrap(av.tape, t);
}

namespace {
Var reduce_all(Var av, Op op) {
    Tape::Impl* t = av.tape->impl_;
    const Tensor& a = t->val(av.id);
    if (a.numel() == 0) fail(t, op, "empty operand");
    Node n;
    n.op = op;
    n.a = av.id;
    n.needs_grad = t->nodes[av.id].needs_grad;
    double s = 0;
    for (double x : a.data) s += x;
    n.owned.shape = {1};
    n.owned.data = {op == Op::ReduceMean ? s / double(a.numel()) : s};
    push(t, std::move(n));
    return wrap(av.tape, t);
}
}  // namespace

Var reduce_mean(Var a) { return reduce_all(a, Op::ReduceMean); }
Var reduce_sum(Var a) { return reduce_all(a, Op::ReduceSum); }

Var reshape(Var av, std::vector<int> shape) {
    Tape::Impl* t = av.tape->impl_;
    const Tensor& a = t->val(av.id);
    if (shape_numel(shape) != a.numel())
        fail(t, Op::Reshape, "cannot view " + shape_str(a.shape) + " as " + shape_str(shape));
    Node n;
    n.op = Op::Reshape;
    n.a = av.id;
    n.needs_grad = t->nodes[av.id].needs_grad;
    n.owned.shape = std::move(shape);
    n.owned.data = a.data;
    push(t, std::move(n));
    return wrap(av.tape, t);
}

Var transpose(Var av) {
    Tape::Impl* t = av.tape->impl_;
    const Tensor& a = t->val(av.id);
    if (a.rank() != 2) fail(t, Op::Transpose, "expected 2-d operand");
    Node n;
    n.op = Op::Transpose;
    n.a = av.id;
    n.needs_grad = t->nodes[av.id].needs_grad;
    const int rows = a.rows(), cols = a.cols();
    n.owned.shape = {cols, rows};
    n.owned.data.resize(a.data.size());
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            n.owned.data[size_t(j) * rows + i] = a.data[size_t(i) * cols + j];
    push(t, std::move(n));
    return wrap(av.tape, t);
}

namespace {

// col buffer layout: [H*W, Cin*9]; row p=(y*W+x) holds the 3x3 patch around
// (y,x) for every input channel, zero outside the image.
void im2col(const double* in, int C, int H, int W, double* col) {
    const size_t plane = size_t(H) * W;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double* row = col + (size_t(y) * W + x) * (size_t(C) * 9);
            for (int c = 0; c < C; ++c)
                for (int ky = -1; ky <= 1; ++ky)
                    for (int kx = -1; kx <= 1; ++kx) {
                        const int yy = y + ky, xx = x + kx;
                        *row++ = (yy < 0 || yy >= H || xx < 0 || xx >= W)
                                     ? 0.0
                                     : in[size_t(c) * plane + size_t(yy) * W + xx];
                    }
        }
}

void col2im_add(const double* col, int C, int H, int W, double* in_grad) {
    const size_t plane = size_t(H) * W;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double* row = col + (size_t(y) * W + x) * (size_t(C) * 9);
            for (int c = 0; c < C; ++c)
                for (int ky = -1; ky <= 1; ++ky)
                    for (int kx = -1; kx <= 1; ++kx) {
                        const int yy = y + ky, xx = x + kx;
                        const double v = *row++;
                        if (yy >= 0 && yy < H && xx >= 0 && xx < W)
                            in_grad[size_t(c) * plane + size_t(yy) * W + xx] += v;
                    }
        }
}

}  // namespace

Var conv3x3(Var iv, Var wv, Var bv) {
    check_same_tape(iv, wv);
    check_same_tape(iv, bv);
    Tape::Impl* t = iv.tape->impl_;
    const Tensor& in = t->val(iv.id);
    const Tensor& w = t->val(wv.id);
    const Tensor& b = t->val(bv.id);
    if (in.rank() != 3 || w.rank() != 4 || w.shape[2] != 3 || w.shape[3] != 3 ||
        w.shape[1] != in.shape[0] || b.rank() != 1 || b.shape[0] != w.shape[0])
        fail(t, Op::Conv3x3, "expected input[Cin,H,W], weight[Cout,Cin,3,3], bias[Cout]; got " +
                           shape_str(in.shape) + ", " + shape_str(w.shape) + ", " +
                           shape_str(b.shape));
    const int C = in.shape[0], H = in.shape[1], W = in.shape[2];
    const int Cout = w.shape[0], K = C * 9;
    const size_t hw = size_t(H) * W;

    Node n;
    n.op = Op::Conv3x3;
    n.a = iv.id;
    n.b = wv.id;
    n.c = bv.id;
    n.needs_grad = t->nodes[iv.id].needs_grad || t->nodes[wv.id].needs_grad ||
                   t->nodes[bv.id].needs_grad;
    n.owned.shape = {Cout, H, W};
    n.owned.data.resize(size_t(Cout) * hw);

    dvec col(hw * size_t(K));
    im2col(in.data.data(), C, H, W, col.data());
    // out[co, p] = sum_k col[p,k] w[co,k] + b[co]. The output planes viewed
    // column-major as (HW x Cout) address exactly out[co][p].
    MapCCM ColT(col.data(), K, Eigen::Index(hw));  // col row-major => col^T
    MapCCM Wt(w.data.data(), K, Cout);             // weight row-major => W^T
    MapCM OutT(n.owned.data.data(), Eigen::Index(hw), Cout);
    OutT.noalias() = ColT.transpose() * Wt;
    for (int co = 0; co < Cout; ++co) {
        double* plane = n.owned.data.data() + size_t(co) * hw;
        for (size_t p = 0; p < hw; ++p) plane[p] += b.data[co];
    }
    push(t, std::move(n));
    return wrap(iv.tape, t);
}

void Tape::backward(Var loss) {
    Impl* t = impl_;
    if (loss.tape != this) throw NumericError("backward: loss from another tape");
    if (t->backward_ran) throw NumericError("backward already ran on this tape");
    const Tensor& lv = t->val(loss.id);
    if (lv.numel() != 1)
        throw NumericError("backward: loss must be scalar, got shape " + shape_str(lv.shape));
    t->backward_ran = true;

    auto ensure = [&](int id) -> dvec& {
        Node& n = t->nodes[size_t(id)];
        if (n.grad.empty()) n.grad.assign(t->val(id).data.size(), 0.0);
        return n.grad;
    };

    if (!t->nodes[size_t(loss.id)].needs_grad) return;  // constant graph
    ensure(loss.id)[0] = 1.0;

    for (int id = loss.id; id >= 0; --id) {
        Node& n = t->nodes[size_t(id)];
        if (!n.needs_grad || n.grad.empty()) continue;
        const dvec& g = n.grad;
        auto in_needs = [&](int i) { return i >= 0 && t->nodes[size_t(i)].needs_grad; };

        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Add:
            case Op::Sub: {
                const double sign_b = n.op == Op::Sub ? -1.0 : 1.0;
                for (int side = 0; side < 2; ++side) {
                    const int src = side == 0 ? n.a : n.b;
                    if (!in_needs(src)) continue;
                    dvec& gi = ensure(src);
                    const double s = side == 0 ? 1.0 : sign_b;
                    if (gi.size() == g.size())
                        for (size_t i = 0; i < g.size(); ++i) gi[i] += s * g[i];
                    else  // scalar operand broadcast
                        for (size_t i = 0; i < g.size(); ++i) gi[0] += s * g[i];
                }
                break;
            }
            case Op::Mul:
            case Op::Div: {
                const Tensor& a = t->val(n.a);
                const Tensor& b = t->val(n.b);
                const size_t sa = a.numel() == 1 && g.size() > 1 ? 0 : 1;
                const size_t sb = b.numel() == 1 && g.size() > 1 ? 0 : 1;
                if (in_needs(n.a)) {
                    dvec& ga = ensure(n.a);
                    for (size_t i = 0; i < g.size(); ++i) {
                        const double db = b.data[i * sb];
                        ga[i * sa] += n.op == Op::Mul ? g[i] * db : g[i] / db;
                    }
                }
                if (in_needs(n.b)) {
                    dvec& gb = ensure(n.b);
                    for (size_t i = 0; i < g.size(); ++i) {
                        const double da = a.data[i * sa], db = b.data[i * sb];
                        gb[i * sb] += n.op == Op::Mul ? g[i] * da : -g[i] * da / (db * db);
                    }
                }
                break;
            }
            case Op::MatMul: {
                const Tensor& a = t->val(n.a);
                const Tensor& b = t->val(n.b);
                const int m = a.rows(), k = a.cols(), n2 = b.cols();
                MapCCM Gt(g.data(), n2, m);  // dC^T
                if (in_needs(n.a)) {         // dA = dC B^T  =>  dA^T = B dC^T
                    MapCM dAt(ensure(n.a).data(), k, m);
                    MapCCM Bt(b.data.data(), n2, k);
                    dAt.noalias() += Bt.transpose() * Gt;
                }
                if (in_needs(n.b)) {  // dB = A^T dC  =>  dB^T = dC^T A
                    MapCM dBt(ensure(n.b).data(), n2, k);
                    MapCCM At(a.data.data(), k, m);
                    dBt.noalias() += Gt * At.transpose();
                }
                break;
            }
            case Op::AddRows: {
                const Tensor& a = t->val(n.a);
                const int rows = a.rows(), cols = a.cols();
                if (in_needs(n.a)) {
                    dvec& ga = ensure(n.a);
                    for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                }
                if (in_needs(n.b)) {
                    dvec& gr = ensure(n.b);
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < cols; ++j) gr[j] += g[size_t(i) * cols + j];
                }
                break;
            }
            case Op::Modulate: {
                const Tensor& x = t->val(n.a);
                const Tensor& s = t->val(n.b);
                const int rows = x.rows(), cols = x.cols();
                if (in_needs(n.a)) {
                    dvec& gx = ensure(n.a);
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < cols; ++j)
                            gx[size_t(i) * cols + j] += g[size_t(i) * cols + j] * s.data[j];
                }
                if (in_needs(n.b)) {
                    dvec& gs = ensure(n.b);
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < cols; ++j)
                            gs[j] += g[size_t(i) * cols + j] * x.data[size_t(i) * cols + j];
                }
                if (in_needs(n.c)) {
                    dvec& gb = ensure(n.c);
                    for (int i = 0; i < rows; ++i)
                        for (int j = 0; j < cols; ++j) gb[j] += g[size_t(i) * cols + j];
                }
                break;
            }
            case Op::Concat: {
                if (n.iattr == 0) {
                    size_t off = 0;
                    for (int src : n.extra) {
                        const size_t sz = t->val(src).data.size();
                        if (in_needs(src)) {
                            dvec& gi = ensure(src);
                            for (size_t i = 0; i < sz; ++i) gi[i] += g[off + i];
                        }
                        off += sz;
                    }
                } else {
                    const int rows = n.owned.rows(), total = n.owned.cols();
                    int off = 0;
                    for (int src : n.extra) {
                        const Tensor& v = t->val(src);
                        const int c = v.cols();
                        if (in_needs(src)) {
                            dvec& gi = ensure(src);
                            for (int i = 0; i < rows; ++i)
                                for (int j = 0; j < c; ++j)
                                    gi[size_t(i) * c + j] += g[size_t(i) * total + off + j];
                        }
                        off += c;
                    }
                }
                break;
            }
            case Op::GatherRows: {
                if (!in_needs(n.a)) break;
                dvec& ga = ensure(n.a);
                const int cols = n.owned.cols();
                for (size_t r = 0; r < n.idx.size(); ++r)
                    for (int j = 0; j < cols; ++j)
                        ga[size_t(n.idx[r]) * cols + j] += g[r * cols + j];
                break;
            }
            case Op::ScatterRows: {
                if (!in_needs(n.a)) break;
                dvec& ga = ensure(n.a);
                const int cols = n.owned.cols();
                for (size_t r = 0; r < n.idx.size(); ++r)
                    for (int j = 0; j < cols; ++j)
                        ga[r * cols + j] += g[size_t(n.idx[r]) * cols + j];
                break;
            }
            case Op::RepeatRow: {
                if (!in_needs(n.a)) break;
                dvec& ga = ensure(n.a);
                const int rows = n.owned.rows(), cols = n.owned.cols();
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j) ga[j] += g[size_t(i) * cols + j];
                break;
            }
            case Op::ReduceMax0: {
                if (!in_needs(n.a)) break;
                dvec& ga = ensure(n.a);
                const int cols = n.owned.shape[0];
                for (int j = 0; j < cols; ++j) ga[size_t(n.idx[j]) * cols + j] += g[j];
                break;
            }
            case Op::ReduceMean:
            case Op::ReduceSum: {
                if (!in_needs(n.a)) break;
                dvec& ga = ensure(n.a);
                const double s = n.op == Op::ReduceMean ? g[0] / double(ga.size()) : g[0];
                for (double& x : ga) x += s;
                break;
            }
            case Op::LeakyRelu: {
                if (!in_needs(n.a)) break;
                const Tensor& a = t->val(n.a);
                dvec& ga = ensure(n.a);
                for (size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * (a.data[i] > 0 ? 1.0 : kLeakySlope);
                break;
            }
            case Op::Tanh: {
                if (!in_needs(n.a)) break;
                dvec& ga = ensure(n.a);
                for (size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * (1.0 - n.owned.data[i] * n.owned.data[i]);
                break;
            }
            case Op::Logistic: {
                if (!in_needs(n.a)) break;
                dvec& ga = ensure(n.a);
                for (size_t i = 0; i < g.size(); ++i) {
                    const double y = n.owned.data[i];
                    ga[i] += g[i] * y * (1.0 - y);
                }
                break;
            }
            case Op::Sqrt: {
                if (!in_needs(n.a)) break;
                dvec& ga = ensure(n.a);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * 0.5 / n.owned.data[i];
                break;
            }
            case Op::Abs: {
                if (!in_needs(n.a)) break;
                const Tensor& a = t->val(n.a);
                dvec& ga = ensure(n.a);
                for (size_t i = 0; i < g.size(); ++i) {
                    const double s = a.data[i] > 0 ? 1.0 : (a.data[i] < 0 ? -1.0 : 0.0);
                    ga[i] += g[i] * s;
                }
                break;
            }
            case Op::Reshape: {
                if (!in_needs(n.a)) break;
                dvec& ga = ensure(n.a);
                for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                break;
            }
            case Op::Transpose: {
                if (!in_needs(n.a)) break;
                dvec& ga = ensure(n.a);
                const int rows = n.owned.rows(), cols = n.owned.cols();  // transposed dims
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j)
                        ga[size_t(j) * rows + i] += g[size_t(i) * cols + j];
                break;
            }
            case Op::Conv3x3: {
                const Tensor& in = t->val(n.a);
                const Tensor& w = t->val(n.b);
                const int C = in.shape[0], H = in.shape[1], W = in.shape[2];
                const int Cout = w.shape[0], K = C * 9;
                const size_t hw = size_t(H) * W;
                // dOut as HW x Cout (column-major view of the row-major planes).
                MapCCM dOutT(g.data(), Eigen::Index(hw), Cout);
                if (in_needs(n.c)) {
                    dvec& gb = ensure(n.c);
                    for (int co = 0; co < Cout; ++co) {
                        double s = 0;
                        const double* plane = g.data() + size_t(co) * hw;
                        for (size_t p = 0; p < hw; ++p) s += plane[p];
                        gb[co] += s;
                    }
                }
                if (in_needs(n.b) || in_needs(n.a)) {
                    dvec col(hw * size_t(K));
                    im2col(in.data.data(), C, H, W, col.data());
                    MapCCM ColT(col.data(), K, Eigen::Index(hw));
                    if (in_needs(n.b)) {  // dW^T (K x Cout) = Col^T' ... dW = dOut^T col
                        MapCM dWt(ensure(n.b).data(), K, Cout);
                        dWt.noalias() += ColT * dOutT;
                    }
                    if (in_needs(n.a)) {  // dcol (HW x K) = dOut W
                        dvec dcol(hw * size_t(K));
                        MapCM dColT(dcol.data(), K, Eigen::Index(hw));
                        MapCCM Wt(w.data.data(), K, Cout);
                        dColT.noalias() = Wt * dOutT.transpose();
                        col2im_add(dcol.data(), C, H, W, ensure(n.a).data());
                    }
                }
                break;
            }
        }
    }

    // Deposit leaf gradients into external tensors.
    for (size_t id = 0; id < t->nodes.size(); ++id) {
        Node& n = t->nodes[id];
        if (n.op != Op::Leaf || !n.ext_mut || n.grad.empty()) continue;
        Tensor& p = *n.ext_mut;
        if (p.grad.size() != p.data.size()) p.grad.assign(p.data.size(), 0.0);
        for (size_t i = 0; i < n.grad.size(); ++i) p.grad[i] += n.grad[i];
    }
}

Tensor Tape::grad_of(Var v) const {
    if (v.tape != this) throw NumericError("grad_of: var from another tape");
    const Node& n = impl_->nodes[size_t(v.id)];
    Tensor g;
    g.shape = impl_->val(v.id).shape;
    g.data = n.grad.empty() ? dvec(impl_->val(v.id).data.size(), 0.0) : n.grad;
    return g;
}

}  // namespace gc
