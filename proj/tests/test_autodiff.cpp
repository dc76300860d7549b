#include <doctest.h>

#include <cmath>
#include <cstring>

#include "kgfuse/grad_check.hpp"
#include "kgfuse/rng.hpp"
#include "support/oracles.hpp"

using namespace kgfuse;
using kgfuse::testing::random_tensor;

namespace {

// random tensor that keeps every element away from activation kinks
Tensor random_away_from_kinks(Shape shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.size(); ++i) {
        double x = 0.0;
        do {
            x = rng.uniform(-2.0, 2.0);
        } while (std::abs(x) < 1e-3);
        t.flat(i) = x;
    }
    return t;
}

GradCheckOptions primitive_opts() {
    GradCheckOptions opts;
    opts.step = 1e-5;
    opts.tol = 1e-6;
    return opts;
}

} // namespace

TEST_SUITE("autodiff") {

TEST_CASE("leaky_relu values and subgradient convention") {
    Tape tape;
    Param x("x", Tensor::vector({2.0, -1.0, 0.0}));
    Tape::Var out = tape.leaky_relu(tape.param(x), 0.2);
    CHECK(tape.value(out).flat(0) == doctest::Approx(2.0));
    CHECK(tape.value(out).flat(1) == doctest::Approx(-0.2));
    CHECK(tape.value(out).flat(2) == 0.0);

    tape.backward(tape.sum(out));
    CHECK(x.grad.flat(0) == doctest::Approx(1.0));
    CHECK(x.grad.flat(1) == doctest::Approx(0.2));
    CHECK(x.grad.flat(2) == doctest::Approx(0.2)); // negative-side slope at 0

    CHECK_THROWS_AS(tape.leaky_relu(tape.constant(Tensor::vector({1.0})), 1.5), ValidationError);
    CHECK_THROWS_AS(
        tape.leaky_relu(tape.constant(Tensor::vector({std::nan("")})), 0.2), NumericError);
}

TEST_CASE("matmul gradient matches central finite differences") {
    Rng rng(41);
    Param a("a", random_tensor({3, 4}, rng));
    Param b("b", random_tensor({4, 2}, rng));
    const Tensor weights = random_tensor({3, 2}, rng);
    auto fn = [&](Tape& t) {
        return t.sum(t.mul(t.matmul(t.param(a), t.param(b)), t.constant(weights)));
    };
    auto report = grad_check(fn, {&a, &b}, primitive_opts());
    CHECK(report.pass);
    CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("every differentiable primitive matches finite differences") {
    Rng rng(1234);

    SUBCASE("matvec, transpose, slice1d") {
        Param m("m", random_tensor({4, 3}, rng));
        Param v("v", random_tensor({4}, rng));
        const Tensor w = random_tensor({2}, rng);
        auto fn = [&](Tape& t) {
            Tape::Var mt = t.transpose(t.param(m)); // [3x4]
            Tape::Var y = t.matvec(mt, t.param(v)); // [3]
            return t.sum(t.mul(t.slice1d(y, 1, 3), t.constant(w)));
        };
        CHECK(grad_check(fn, {&m, &v}, primitive_opts()).pass);
    }

    SUBCASE("add, add_row_broadcast, scale, mul") {
        Param a("a", random_tensor({3, 5}, rng));
        Param b("b", random_tensor({3, 5}, rng));
        Param bias("bias", random_tensor({5}, rng));
        const Tensor w = random_tensor({3, 5}, rng);
        auto fn = [&](Tape& t) {
            Tape::Var s = t.add(t.param(a), t.scale(t.param(b), -1.7));
            s = t.add_row_broadcast(s, t.param(bias));
            return t.sum(t.mul(s, t.constant(w)));
        };
        CHECK(grad_check(fn, {&a, &b, &bias}, primitive_opts()).pass);
    }

    SUBCASE("relu and leaky_relu away from kinks") {
        Param x("x", random_away_from_kinks({4, 4}, rng));
        const Tensor w = random_tensor({4, 4}, rng);
        auto fn = [&](Tape& t) {
            Tape::Var y = t.add(t.relu(t.param(x)), t.leaky_relu(t.param(x), 0.2));
            return t.sum(t.mul(y, t.constant(w)));
        };
        CHECK(grad_check(fn, {&x}, primitive_opts()).pass);
    }

    SUBCASE("concat_vecs, concat_cols, concat_rows") {
        Param a("a", random_tensor({2, 3}, rng));
        Param b("b", random_tensor({2, 2}, rng));
        Param c("c", random_tensor({1, 5}, rng));
        Param v1("v1", random_tensor({3}, rng));
        Param v2("v2", random_tensor({2}, rng));
        const Tensor w = random_tensor({3, 5}, rng);
        const Tensor wv = random_tensor({5}, rng);
        auto fn = [&](Tape& t) {
            std::vector<Tape::Var> cols = {t.param(a), t.param(b)};
            Tape::Var wide = t.concat_cols(cols); // [2x5]
            std::vector<Tape::Var> rows = {wide, t.param(c)};
            Tape::Var tall = t.concat_rows(rows); // [3x5]
            std::vector<Tape::Var> vecs = {t.param(v1), t.param(v2)};
            Tape::Var vec = t.concat_vecs(vecs); // [5]
            return t.add(t.sum(t.mul(tall, t.constant(w))),
                         t.sum(t.mul(vec, t.constant(wv))));
        };
        CHECK(grad_check(fn, {&a, &b, &c, &v1, &v2}, primitive_opts()).pass);
    }

    SUBCASE("global_concat") {
        Param m("m", random_tensor({5, 3}, rng));
        const Tensor w = random_tensor({5, 15}, rng);
        auto fn = [&](Tape& t) {
            Tape::Var g = t.global_concat(t.param(m), {0, 1, 3, 4});
            return t.sum(t.mul(g, t.constant(w)));
        };
        CHECK(grad_check(fn, {&m}, primitive_opts()).pass);
    }

    SUBCASE("outer_sum and row_softmax with edge factors") {
        Param s1("s1", random_tensor({4}, rng));
        Param s2("s2", random_tensor({4}, rng));
        Tensor factors({4, 4});
        for (std::int64_t i = 0; i < factors.size(); ++i) {
            factors.flat(i) = rng.uniform(0.05, 1.0);
        }
        const Tensor w = random_tensor({4, 4}, rng);
        auto fn = [&](Tape& t) {
            Tape::Var logits = t.outer_sum(t.param(s1), t.param(s2));
            Tape::Var gamma = t.row_softmax(logits, factors);
            return t.sum(t.mul(gamma, t.constant(w)));
        };
        CHECK(grad_check(fn, {&s1, &s2}, primitive_opts()).pass);
    }

    SUBCASE("mean_rows, softmax, cross_entropy") {
        Param m("m", random_tensor({6, 4}, rng));
        auto fn = [&](Tape& t) {
            Tape::Var pooled = t.mean_rows(t.param(m));
            Tape::Var probs = t.softmax(pooled);
            return t.cross_entropy(probs, 2);
        };
        CHECK(grad_check(fn, {&m}, primitive_opts()).pass);
    }

    SUBCASE("masked softmax gradient") {
        Param x("x", random_tensor({5}, rng));
        std::vector<bool> mask{true, true, false, true, false};
        const Tensor w = random_tensor({5}, rng);
        auto fn = [&](Tape& t) {
            Tape::Var p = t.softmax(t.param(x), &mask);
            return t.sum(t.mul(p, t.constant(w)));
        };
        CHECK(grad_check(fn, {&x}, primitive_opts()).pass);
    }
}

TEST_CASE("softmax composed with cross entropy yields probs minus onehot") {
    Param logits("logits", Tensor::vector({0.3, -1.2, 2.0, 0.5}));
    Tape tape;
    Tape::Var probs = tape.softmax(tape.param(logits));
    Tape::Var loss = tape.cross_entropy(probs, 2);
    tape.backward(loss);
    const Tensor p = tape.value(probs);
    for (int i = 0; i < 4; ++i) {
        const double expected = p.flat(i) - (i == 2 ? 1.0 : 0.0);
        CHECK(logits.grad.flat(i) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("tape replay determinism: identical loss bits") {
    Rng rng(99);
    Param a("a", random_tensor({4, 4}, rng));
    Param b("b", random_tensor({4, 4}, rng));
    auto run = [&] {
        Tape tape;
        Tape::Var z = tape.matmul(tape.param(a), tape.param(b));
        Tape::Var p = tape.softmax(tape.mean_rows(tape.leaky_relu(z, 0.2)));
        return tape.scalar(tape.cross_entropy(p, 1));
    };
    const double first = run();
    const double second = run();
    CHECK(std::memcmp(&first, &second, sizeof(double)) == 0);
}

TEST_CASE("backward accumulates into params only once per leaf use") {
    Param x("x", Tensor::vector({3.0}));
    Tape tape;
    Tape::Var v = tape.param(x);
    Tape::Var y = tape.mul(v, v); // x^2 through two uses of the same leaf
    tape.backward(tape.sum(y));
    CHECK(x.grad.flat(0) == doctest::Approx(6.0));
}

} // TEST_SUITE
