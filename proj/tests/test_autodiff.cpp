#include <doctest.h>

#include <cmath>

#include "grbert/gradcheck.hpp"
#include "grbert/numeric.hpp"
#include "grbert/rng.hpp"
#include "grbert/tape.hpp"

using namespace grbert;

namespace {

Tensor randn(std::vector<std::size_t> shape, Rng& rng, double s = 0.5) {
    return Tensor::randn(std::move(shape), rng, s);
}

}  // namespace

TEST_CASE("softmax matches frozen references") {
    const std::vector<double> uniform = softmax(std::vector<double>{0.0, 0.0, 0.0});
    for (double v : uniform) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    // exp-normalize reference for [1, 2, 3]
    const std::vector<double> ref = {0.09003057317038046, 0.24472847105479764,
                                     0.6652409557748219};
    const std::vector<double> got = softmax(std::vector<double>{1.0, 2.0, 3.0});
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(got[i] - ref[i]) < 1e-9);
}

TEST_CASE("softmax sums to one and is shift invariant") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.uniform_index(12);
        std::vector<double> logits(n);
        for (double& v : logits) v = rng.uniform(-1e3, 1e3);
        const std::vector<double> p = softmax(logits);
        double total = 0.0;
        for (double v : p) total += v;
        CHECK(std::abs(total - 1.0) < 1e-12);

        const double shift = rng.uniform(-100.0, 100.0);
        std::vector<double> shifted = logits;
        for (double& v : shifted) v += shift;
        const std::vector<double> q = softmax(shifted);
        for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(p[i] - q[i]) < 1e-12);
    }
}

TEST_CASE("softmax rejects non-finite input") {
    std::vector<double> bad = {1.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(softmax(bad), NumericError);
}

TEST_CASE("cosine similarity basics") {
    std::vector<double> v = {0.3, -1.2, 2.0};
    std::vector<double> neg = {-0.3, 1.2, -2.0};
    CHECK(cosine_similarity(v, v) == doctest::Approx(1.0));
    CHECK(cosine_similarity(v, neg) == doctest::Approx(-1.0));
    std::vector<double> a = {1.0, 0.0};
    std::vector<double> b = {1.0, 1.0};
    CHECK(cosine_similarity(a, b) == doctest::Approx(0.70710678).epsilon(1e-8));
    std::vector<double> zero = {0.0, 0.0};
    CHECK_THROWS_AS(cosine_similarity(a, zero), DegenerateInputError);
}

TEST_CASE("backprop of linear and quadratic functionals") {
    Tape tape;
    Tensor x({2, 3}, {1.0, -2.0, 0.5, 3.0, 0.0, -1.0});
    x.set_requires_grad(true);
    Value vx = tape.leaf(x);
    Value loss = tape.sum(vx);
    tape.backward(loss);
    for (std::size_t i = 0; i < 6; ++i) CHECK(tape.grad(vx)[i] == 1.0);

    Tape tape2;
    Tensor y({1}, {3.0});
    y.set_requires_grad(true);
    Value vy = tape2.leaf(y);
    Value q = tape2.dot(vy, vy);
    tape2.backward(q);
    CHECK(tape2.grad(vy)[0] == doctest::Approx(6.0));
}

TEST_CASE("backprop is deterministic bit for bit") {
    auto run = [] {
        Rng rng(99);
        Tape tape;
        Tensor w = randn({4, 4}, rng);
        w.set_requires_grad(true);
        Tensor x = randn({2, 4}, rng);
        Value vw = tape.leaf(w);
        Value vx = tape.constant(x);
        Value h = tape.gelu(tape.matmul(vx, vw));
        Value loss = tape.sum(h);
        tape.backward(loss);
        return tape.grad(vw).data();
    };
    const std::vector<double> a = run();
    const std::vector<double> b = run();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

namespace {

// Two-layer perceptron with every dense op exercised: matmul, bias, gelu,
// layer norm, row softmax, cross entropy.
double mlp_loss(const ParamSet& p, Tape* out_tape = nullptr, Value* out_loss = nullptr) {
    Tape local;
    Tape& tape = out_tape ? *out_tape : local;
    Value x = tape.constant(Tensor({3, 4}, {0.1, -0.2, 0.4, 0.9, -0.5, 0.3, 0.2, -0.8, 1.1,
                                            0.0, -0.3, 0.6}));
    Value w1 = tape.leaf(p.at("w1"));
    Value b1 = tape.leaf(p.at("b1"));
    Value w2 = tape.leaf(p.at("w2"));
    Value b2 = tape.leaf(p.at("b2"));
    Value gain = tape.leaf(p.at("gain"));
    Value bias = tape.leaf(p.at("bias"));
    Value h = tape.gelu(tape.add_bias(tape.matmul(x, w1), b1));
    h = tape.layer_norm(h, gain, bias, 1e-5);
    Value logits = tape.add_bias(tape.matmul(h, w2), b2);
    Value loss = tape.cross_entropy_mean(logits, {1, 0, 3});
    if (out_loss) *out_loss = loss;
    return tape.value(loss).scalar_value();
}

ParamSet mlp_params(std::uint64_t seed) {
    Rng rng(seed);
    ParamSet p;
    Tensor w1 = randn({4, 5}, rng);
    Tensor b1 = randn({5}, rng, 0.1);
    Tensor gain = Tensor::full({5}, 1.0);
    Tensor bias = Tensor::zeros({5});
    Tensor w2 = randn({5, 4}, rng);
    Tensor b2 = randn({4}, rng, 0.1);
    for (Tensor* t : {&w1, &b1, &gain, &bias, &w2, &b2}) t->set_requires_grad(true);
    p.add("w1", w1);
    p.add("b1", b1);
    p.add("w2", w2);
    p.add("b2", b2);
    p.add("gain", gain);
    p.add("bias", bias);
    return p;
}

std::vector<Tensor> mlp_grads(const ParamSet& p) {
    Tape tape;
    Value loss;
    mlp_loss(p, &tape, &loss);
    tape.backward(loss);
    // Leaves are pushed in the order mlp_loss binds them.
    std::vector<Tensor> grads;
    // leaf order: x(const), w1, b1, w2... have to rebind: instead rebuild with handles
    return grads;
}

}  // namespace

TEST_CASE("perceptron gradients match central finite differences") {
    // Rebind with explicit handles so gradient order matches the ParamSet.
    auto eval = [](const ParamSet& p) { return mlp_loss(p); };
    auto grad = [](const ParamSet& p) {
        Tape tape;
        Value x = tape.constant(Tensor({3, 4}, {0.1, -0.2, 0.4, 0.9, -0.5, 0.3, 0.2, -0.8,
                                                1.1, 0.0, -0.3, 0.6}));
        std::vector<Value> handles;
        Value w1 = tape.leaf(p.at("w1"));
        Value b1 = tape.leaf(p.at("b1"));
        Value w2 = tape.leaf(p.at("w2"));
        Value b2 = tape.leaf(p.at("b2"));
        Value gain = tape.leaf(p.at("gain"));
        Value bias = tape.leaf(p.at("bias"));
        handles = {w1, b1, w2, b2, gain, bias};
        Value h = tape.gelu(tape.add_bias(tape.matmul(x, w1), b1));
        h = tape.layer_norm(h, gain, bias, 1e-5);
        Value logits = tape.add_bias(tape.matmul(h, w2), b2);
        Value loss = tape.cross_entropy_mean(logits, {1, 0, 3});
        tape.backward(loss);
        std::vector<Tensor> grads;
        for (Value v : handles) grads.push_back(tape.grad(v));
        return grads;
    };
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        GradCheckReport report =
            finite_diff_check(eval, grad, mlp_params(seed), 1e-5, 1e-4, 0, seed);
        CAPTURE(seed);
        CAPTURE(report.max_rel_dev);
        CHECK(report.pass);
    }
}

TEST_CASE("finite_diff_check on x squared is tight") {
    ParamSet p;
    Tensor x({1}, {1.0});
    x.set_requires_grad(true);
    p.add("x", x);
    auto eval = [](const ParamSet& q) {
        const double v = q.at("x")[0];
        return v * v;
    };
    auto grad = [](const ParamSet& q) {
        Tensor g({1}, {2.0 * q.at("x")[0]});
        return std::vector<Tensor>{g};
    };
    GradCheckReport report = finite_diff_check(eval, grad, p, 1e-5, 1e-6);
    CHECK(report.pass);
    CHECK(report.max_rel_dev < 1e-6);
}

TEST_CASE("masked row softmax and masked mean gradients") {
    auto build = [](const ParamSet& p, Tape& tape, Value& loss) {
        Value x = tape.leaf(p.at("x"));
        Value sm = tape.softmax_rows(x, {true, true, false, true});
        Value pooled = tape.mean_rows(sm, {true, false, true});
        Value picked = tape.pick(pooled, 1);
        Value lse = tape.log_sum_exp(pooled);
        loss = tape.add(tape.scale(picked, 0.7), lse);
    };
    auto eval = [&](const ParamSet& p) {
        Tape tape;
        Value loss;
        build(p, tape, loss);
        return tape.value(loss).scalar_value();
    };
    auto grad = [&](const ParamSet& p) {
        Tape tape;
        Value loss;
        build(p, tape, loss);
        Value x{0};  // first node pushed is the leaf
        tape.backward(loss);
        return std::vector<Tensor>{tape.grad(x)};
    };
    Rng rng(5);
    ParamSet p;
    Tensor x = randn({3, 4}, rng);
    x.set_requires_grad(true);
    p.add("x", x);
    GradCheckReport report = finite_diff_check(eval, grad, p, 1e-6, 1e-5);
    CHECK(report.pass);
    // masked column stays exactly zero
    Tape tape;
    Value vx = tape.leaf(p.at("x"));
    Value sm = tape.softmax_rows(vx, {true, true, false, true});
    for (std::size_t i = 0; i < 3; ++i) CHECK(tape.value(sm).at(i, 2) == 0.0);
}

TEST_CASE("cosine, slicing and stacking gradients") {
    auto build = [](const ParamSet& p, Tape& tape, std::vector<Value>& leaves, Value& loss) {
        Value a = tape.leaf(p.at("a"));
        Value b = tape.leaf(p.at("b"));
        leaves = {a, b};
        Value left = tape.col_slice(a, 0, 2);
        Value right = tape.col_slice(a, 2, 4);
        Value joined = tape.concat_cols({right, left});
        Value r0 = tape.row(joined, 0);
        Value r1 = tape.row(joined, 1);
        Value c0 = tape.cosine(r0, b);
        Value c1 = tape.cosine(r1, b);
        Value sims = tape.stack_scalars({c0, c1});
        loss = tape.sub(tape.log_sum_exp(sims), tape.pick(sims, 0));
    };
    auto eval = [&](const ParamSet& p) {
        Tape tape;
        std::vector<Value> leaves;
        Value loss;
        build(p, tape, leaves, loss);
        return tape.value(loss).scalar_value();
    };
    auto grad = [&](const ParamSet& p) {
        Tape tape;
        std::vector<Value> leaves;
        Value loss;
        build(p, tape, leaves, loss);
        tape.backward(loss);
        std::vector<Tensor> g;
        for (Value v : leaves) g.push_back(tape.grad(v));
        return g;
    };
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(seed);
        ParamSet p;
        Tensor a = randn({2, 4}, rng);
        Tensor b = randn({4}, rng);
        a.set_requires_grad(true);
        b.set_requires_grad(true);
        p.add("a", a);
        p.add("b", b);
        GradCheckReport report = finite_diff_check(eval, grad, p, 1e-6, 1e-5);
        CAPTURE(seed);
        CHECK(report.pass);
    }
}

TEST_CASE("rows_select scatters gradients back") {
    Tape tape;
    Tensor e({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    e.set_requires_grad(true);
    Value ve = tape.leaf(e);
    Value sel = tape.rows_select(ve, {2, 0, 2});
    Value loss = tape.sum(sel);
    tape.backward(loss);
    const Tensor& g = tape.grad(ve);
    CHECK(g.at(0, 0) == 1.0);
    CHECK(g.at(1, 0) == 0.0);
    CHECK(g.at(2, 0) == 2.0);  // selected twice
    CHECK(g.at(3, 1) == 0.0);
}

TEST_CASE("backward rejects non-scalar loss") {
    Tape tape;
    Tensor x({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    Value vx = tape.leaf(x);
    CHECK_THROWS_AS(tape.backward(vx), ContractError);
}
