#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gc/adam.hpp"
#include "gc/error.hpp"
#include "gc/gradcheck.hpp"
#include "gc/rng.hpp"
#include "gc/tape.hpp"
#include "gc/tensor.hpp"

using namespace gc;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& x : t.data) x = scale * rng.normal();
    return t;
}

Tensor param_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t = random_tensor(std::move(shape), rng, scale);
    t.requires_grad = true;
    return t;
}

}  // namespace

TEST_CASE("forward op examples") {
    Tape tape;
    // identity matmul
    Tensor eye = Tensor::matrix({{1, 0}, {0, 1}});
    Tensor m = Tensor::matrix({{3, 4}, {5, 6}});
    Var r = matmul(tape.input(eye), tape.input(m));
    CHECK(r.value().data == dvec{3, 4, 5, 6});

    // leaky rectifier slope 0.2
    Tensor x({1}, {-1.0});
    CHECK(leaky_relu(tape.input(x)).value().data[0] == doctest::Approx(-0.2));

    // max-reduce over axis 0
    Tensor mm = Tensor::matrix({{1, 5}, {3, 2}});
    Var mx = reduce_max0(tape.input(mm));
    CHECK(mx.value().data == dvec{3, 5});
}

TEST_CASE("forward determinism is bit-identical") {
    Rng rng(7);
    Tensor a = random_tensor({4, 3}, rng), w = random_tensor({3, 5}, rng);
    auto run = [&] {
        Tape tape;
        return tanh_op(matmul(tape.input(a), tape.input(w))).value().data;
    };
    CHECK(run() == run());
}

TEST_CASE("backward basics") {
    // loss = sum(x*x) -> grad 2x
    Tensor x({3}, {1, 2, 3});
    x.requires_grad = true;
    {
        Tape tape;
        Var xv = tape.param(x, "x");
        tape.backward(reduce_sum(mul(xv, xv)));
        CHECK(x.grad == dvec{2, 4, 6});
    }
    // loss = mean(x) -> grad 1/n
    Tensor y({4}, {5, 6, 7, 8});
    y.requires_grad = true;
    {
        Tape tape;
        tape.backward(reduce_mean(tape.param(y, "y")));
        CHECK(y.grad == dvec(4, 0.25));
    }
}

TEST_CASE("backward errors") {
    Tensor x({2, 2}, {1, 2, 3, 4});
    x.requires_grad = true;
    Tape tape;
    Var xv = tape.param(x, "x");
    CHECK_THROWS_AS(tape.backward(xv), NumericError);  // non-scalar loss
    Tensor bad({2}, {1, std::nan("")});
    Tape t2;
    CHECK_THROWS_AS(t2.input(bad), NumericError);  // non-finite input
    Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b({2, 2}, {1, 2, 3, 4});
    Tape t3;
    CHECK_THROWS_WITH_AS(void(matmul(t3.input(a), t3.input(b))),
                         doctest::Contains("matmul"), NumericError);
}

TEST_CASE("linearity of backward") {
    Rng rng(11);
    Tensor x = param_tensor({6}, rng);
    const double a = 1.7, b = -0.6;
    auto grad_of = [&](bool combined) {
        x.zero_grad();
        Tape tape;
        Var xv = tape.param(x, "x");
        Var l1 = reduce_sum(mul(xv, xv));
        Var l2 = reduce_mean(tanh_op(xv));
        Var loss;
        if (combined)
            loss = add(mul(tape.scalar(a), l1), mul(tape.scalar(b), l2));
        else
            loss = l1;
        tape.backward(loss);
        return x.grad;
    };
    // grad(a*L1 + b*L2) == a*grad(L1) + b*grad(L2)
    dvec g_combined = grad_of(true);
    x.zero_grad();
    dvec g1, g2;
    {
        Tape tape;
        Var xv = tape.param(x, "x");
        tape.backward(reduce_sum(mul(xv, xv)));
        g1 = x.grad;
        x.zero_grad();
    }
    {
        Tape tape;
        Var xv = tape.param(x, "x");
        tape.backward(reduce_mean(tanh_op(xv)));
        g2 = x.grad;
        x.zero_grad();
    }
    for (size_t i = 0; i < g_combined.size(); ++i)
        CHECK(g_combined[i] == doctest::Approx(a * g1[i] + b * g2[i]).epsilon(1e-12));
}

TEST_CASE("finite differences agree for every op") {
    Rng rng(23);
    auto check = [&](const char* name, auto builder, std::vector<Tensor*> params) {
        std::vector<std::pair<std::string, Tensor*>> named;
        for (size_t i = 0; i < params.size(); ++i)
            named.emplace_back(std::string(name) + "#" + std::to_string(i), params[i]);
        GradCheckReport rep = grad_check(builder, named, 1e-5);
        INFO(name, ": ", rep.summary());
        CHECK(rep.pass());
    };

    Tensor a = param_tensor({3, 4}, rng), b = param_tensor({3, 4}, rng);
    Tensor s = param_tensor({1}, rng);
    check("add", [&](Tape& t) { return reduce_sum(add(t.param(a), t.param(b))); }, {&a, &b});
    check("sub_scalar", [&](Tape& t) { return reduce_sum(sub(t.param(a), t.param(s))); },
          {&a, &s});
    check("mul", [&](Tape& t) { return reduce_sum(mul(t.param(a), t.param(b))); }, {&a, &b});
    check("div", [&](Tape& t) {
        return reduce_sum(divide(t.param(a), add(mul(t.param(b), t.param(b)), t.scalar(1))));
    }, {&a, &b});
    check("scalar_mul", [&](Tape& t) { return reduce_sum(mul(t.param(s), t.param(a))); },
          {&s, &a});

    Tensor w = param_tensor({4, 5}, rng), bias = param_tensor({5}, rng);
    check("matmul+add_rows", [&](Tape& t) {
        return reduce_mean(add_rows(matmul(t.param(a), t.param(w)), t.param(bias)));
    }, {&a, &w, &bias});

    Tensor scale = param_tensor({4}, rng), shift = param_tensor({4}, rng);
    check("modulate", [&](Tape& t) {
        return reduce_mean(modulate(t.param(a), t.param(scale), t.param(shift)));
    }, {&a, &scale, &shift});

    check("concat0+tanh", [&](Tape& t) {
        return reduce_sum(tanh_op(concat({t.param(a), t.param(b)}, 0)));
    }, {&a, &b});
    check("concat1", [&](Tape& t) {
        return reduce_sum(mul(concat({t.param(a), t.param(b)}, 1),
                              concat({t.param(b), t.param(a)}, 1)));
    }, {&a, &b});

    check("gather_rows", [&](Tape& t) {
        return reduce_sum(mul(gather_rows(t.param(a), {0, 2, 2, 1}),
                              gather_rows(t.param(a), {1, 1, 0, 2})));
    }, {&a});
    check("scatter_rows", [&](Tape& t) {
        return reduce_sum(tanh_op(scatter_rows(t.param(a), {4, 1, 1}, 6)));
    }, {&a});
    check("repeat_row", [&](Tape& t) {
        return reduce_mean(mul(repeat_row(t.param(bias), 3), repeat_row(t.param(bias), 3)));
    }, {&bias});

    // distinct values so the max is stable under the probe
    Tensor mr = Tensor::matrix({{0.1, 1.9, -0.4}, {1.2, 0.3, 0.8}, {-0.7, 0.6, 2.2}});
    mr.requires_grad = true;
    check("reduce_max0", [&](Tape& t) { return reduce_sum(mul(reduce_max0(t.param(mr)),
                                                              reduce_max0(t.param(mr)))); },
          {&mr});

    Tensor pos = param_tensor({3, 4}, rng);
    for (auto& v : pos.data) v = std::fabs(v) + 0.5;
    check("sqrt", [&](Tape& t) { return reduce_sum(sqrt_op(t.param(pos))); }, {&pos});
    check("abs", [&](Tape& t) { return reduce_sum(abs_op(t.param(pos))); }, {&pos});
    check("leaky", [&](Tape& t) { return reduce_sum(leaky_relu(t.param(a))); }, {&a});
    check("logistic", [&](Tape& t) { return reduce_sum(logistic(t.param(a))); }, {&a});
    check("reshape+transpose", [&](Tape& t) {
        return reduce_sum(mul(transpose(reshape(t.param(a), {4, 3})), t.param(a)));
    }, {&a});

    Tensor img = param_tensor({2, 5, 6}, rng);
    Tensor kw = param_tensor({3, 2, 3, 3}, rng, 0.5);
    Tensor kb = param_tensor({3}, rng, 0.1);
    check("conv3x3", [&](Tape& t) {
        return reduce_mean(tanh_op(conv3x3(t.param(img), t.param(kw), t.param(kb))));
    }, {&img, &kw, &kb});
}

TEST_CASE("random 3-layer perceptron matches finite differences") {
    Rng rng(5);
    Tensor x = random_tensor({4, 6}, rng);
    Tensor w1 = param_tensor({6, 8}, rng, 0.5), b1 = param_tensor({8}, rng, 0.1);
    Tensor w2 = param_tensor({8, 8}, rng, 0.5), b2 = param_tensor({8}, rng, 0.1);
    Tensor w3 = param_tensor({8, 2}, rng, 0.5), b3 = param_tensor({2}, rng, 0.1);
    auto net = [&](Tape& t) {
        Var h = leaky_relu(add_rows(matmul(t.input(x), t.param(w1)), t.param(b1)));
        h = tanh_op(add_rows(matmul(h, t.param(w2)), t.param(b2)));
        h = add_rows(matmul(h, t.param(w3)), t.param(b3));
        return reduce_mean(mul(h, h));
    };
    GradCheckReport rep = grad_check(
        net, {{"w1", &w1}, {"b1", &b1}, {"w2", &w2}, {"b2", &b2}, {"w3", &w3}, {"b3", &b3}},
        1e-5);
    INFO(rep.summary());
    CHECK(rep.pass());
}

TEST_CASE("grad_check on a linear layer is tight") {
    Rng rng(3);
    Tensor x = random_tensor({5, 7}, rng);
    Tensor w = param_tensor({7, 4}, rng);
    GradCheckReport rep = grad_check(
        [&](Tape& t) { return reduce_sum(matmul(t.input(x), t.param(w))); }, {{"W", &w}},
        1e-5);
    REQUIRE(rep.entries.size() == 1);
    CHECK(rep.entries[0].max_rel_err < 1e-8);
}

TEST_CASE("grad_check of a constant graph is an empty pass") {
    Tensor c({2}, {1, 2});
    GradCheckReport rep =
        grad_check([&](Tape& t) { return reduce_sum(t.input(c)); }, {}, 1e-5);
    CHECK(rep.entries.empty());
    CHECK(rep.pass());
}

TEST_CASE("adam zero gradient is the identity") {
    Tensor p({3}, {1, 2, 3});
    p.requires_grad = true;
    AdamState st;
    st.learning_rate = 0.05;
    adam_step({&p}, st);
    CHECK(p.data == dvec{1, 2, 3});
    CHECK(st.step == 1);
}

TEST_CASE("adam first step moves by about lr for g >> eps") {
    Tensor p({1}, {0.0});
    p.requires_grad = true;
    p.grad = {4.2};
    AdamState st;
    st.learning_rate = 0.01;
    adam_step({&p}, st);
    // first-step identity: delta = lr * g / (|g| + eps)
    CHECK(p.data[0] == doctest::Approx(-0.01 * 4.2 / (4.2 + st.epsilon)).epsilon(1e-12));
    CHECK(p.grad.empty());  // consumed
}

TEST_CASE("adam on f(x)=x^2 strictly shrinks |x|, matches direct recurrence") {
    Tensor p({1}, {1.0});
    p.requires_grad = true;
    AdamState st;
    st.learning_rate = 0.1;

    // independent recurrence evaluation
    double x = 1.0, m = 0.0, v = 0.0;
    std::vector<double> expected;
    for (int k = 1; k <= 10; ++k) {
        const double g = 2.0 * x;
        m = st.beta1 * m + (1 - st.beta1) * g;
        v = st.beta2 * v + (1 - st.beta2) * g * g;
        const double mh = m / (1 - std::pow(st.beta1, k));
        const double vh = v / (1 - std::pow(st.beta2, k));
        x -= st.learning_rate * mh / (std::sqrt(vh) + st.epsilon);
        expected.push_back(x);
    }

    double prev = 1.0;
    for (int k = 0; k < 10; ++k) {
        p.grad = {2.0 * p.data[0]};
        adam_step({&p}, st);
        CHECK(p.data[0] == doctest::Approx(expected[size_t(k)]).epsilon(1e-12));
        CHECK(std::fabs(p.data[0]) < std::fabs(prev));
        prev = p.data[0];
    }
}

TEST_CASE("adam size mismatch is an error") {
    Tensor p({3}, {1, 2, 3});
    p.requires_grad = true;
    p.grad = {1.0};  // wrong size
    AdamState st;
    CHECK_THROWS_AS(adam_step({&p}, st), NumericError);
}

TEST_CASE("gradient accumulates across fan-out") {
    Tensor x({2}, {3, 4});
    x.requires_grad = true;
    Tape tape;
    Var xv = tape.param(x, "x");
    // y used twice: loss = sum(x) + sum(x) -> grad 2
    tape.backward(add(reduce_sum(xv), reduce_sum(xv)));
    CHECK(x.grad == dvec{2, 2});
}
