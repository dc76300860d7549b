#include <doctest.h>

#include "kgfuse/grad_check.hpp"
#include "kgfuse/rng.hpp"
#include "support/oracles.hpp"

using namespace kgfuse;
using kgfuse::testing::random_tensor;

TEST_SUITE("gradcheck") {

TEST_CASE("linear function has analytic gradient 1 everywhere") {
    Rng rng(5);
    Param w("w", random_tensor({64}, rng));
    auto fn = [&](Tape& t) { return t.sum(t.param(w)); };
    GradCheckOptions opts;
    opts.tol = 1e-9;
    auto report = grad_check(fn, {&w}, opts);
    CHECK(report.pass);
    CHECK(report.max_rel_err < 1e-9);
    for (const auto& entry : report.entries) {
        CHECK(entry.analytic == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("deliberately corrupted gradient fails the check") {
    Rng rng(6);
    Param a("a", random_tensor({3, 3}, rng));
    Param b("b", random_tensor({3, 3}, rng));
    const Tensor w = random_tensor({3, 3}, rng);
    auto fn = [&](Tape& t) {
        return t.sum(t.mul(t.matmul(t.param(a), t.param(b)), t.constant(w)));
    };
    auto corrupt = [](const ParamRefs& params) {
        for (Param* p : params) {
            if (p->name != "a") continue;
            for (std::int64_t i = 0; i < p->grad.size(); ++i) p->grad.flat(i) *= 1.1;
        }
    };
    auto report = grad_check(fn, {&a, &b}, {}, corrupt);
    CHECK_FALSE(report.pass);
    CHECK(report.worst.param == "a");
}

TEST_CASE("non-deterministic forward is detected") {
    Param w("w", Tensor::vector({1.0}));
    int calls = 0;
    auto fn = [&](Tape& t) {
        ++calls;
        return t.sum(t.scale(t.param(w), static_cast<double>(calls)));
    };
    CHECK_THROWS_AS(grad_check(fn, {&w}), NumericError);
}

TEST_CASE("step outside [1e-6, 1e-4] is rejected") {
    Param w("w", Tensor::vector({1.0}));
    auto fn = [&](Tape& t) { return t.sum(t.param(w)); };
    GradCheckOptions opts;
    opts.step = 1e-2;
    CHECK_THROWS_AS(grad_check(fn, {&w}, opts), ValidationError);
}

TEST_CASE("sampling caps the number of checked elements per tensor") {
    Rng rng(7);
    Param w("w", random_tensor({30, 30}, rng)); // 900 elements
    auto fn = [&](Tape& t) { return t.sum(t.param(w)); };
    GradCheckOptions opts;
    opts.max_samples_per_tensor = 50;
    opts.tol = 1e-8;
    auto report = grad_check(fn, {&w}, opts);
    REQUIRE(report.per_param.size() == 1);
    CHECK(report.per_param[0].checked == 50);
    CHECK(report.pass);
}

} // TEST_SUITE
