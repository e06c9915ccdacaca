#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "tsrnet/optimizer.hpp"
#include "tsrnet/rng.hpp"

using namespace tsrnet;

namespace {

struct Slot {
    Tensor value;
    Tensor grad;
    explicit Slot(std::vector<int> shape) : value(shape), grad(shape) {}
    ParamRef ref(const char* name) { return {name, &value, &grad, true}; }
};

} // namespace

TEST_CASE("cosine schedule endpoints and midpoint") {
    CHECK_THAT(cosine_lr(0, 100, 2e-3), Catch::Matchers::WithinAbs(2e-3, 1e-15));
    CHECK_THAT(cosine_lr(100, 100, 2e-3), Catch::Matchers::WithinAbs(0.0, 1e-15));
    CHECK_THAT(cosine_lr(50, 100, 2e-3), Catch::Matchers::WithinAbs(1e-3, 1e-15));
    // monotone nonincreasing
    double prev = cosine_lr(0, 200, 1.0);
    for (long s = 1; s <= 200; ++s) {
        const double cur = cosine_lr(s, 200, 1.0);
        CHECK(cur <= prev + 1e-15);
        prev = cur;
    }
    CHECK_THROWS_AS(cosine_lr(-1, 10, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(cosine_lr(11, 10, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(cosine_lr(0, 0, 1.0), std::invalid_argument);
}

TEST_CASE("zero gradient with zero decay is a no-op") {
    Slot s({3, 2});
    Rng rng(1);
    for (std::size_t i = 0; i < s.value.size(); ++i) s.value[i] = rng.normal();
    Tensor before = s.value;
    AdamW opt(AdamWConfig{0.9, 0.999, 1e-8, 0.0});
    std::vector<ParamRef> params = {s.ref("w")};
    opt.step(params, 1e-2);
    for (std::size_t i = 0; i < s.value.size(); ++i) CHECK(s.value[i] == before[i]);
}

TEST_CASE("zero gradient with decay only rescales weights") {
    Slot s({4});
    for (std::size_t i = 0; i < s.value.size(); ++i) s.value[i] = 2.0;
    AdamW opt(AdamWConfig{0.9, 0.999, 1e-8, 1e-2});
    std::vector<ParamRef> params = {s.ref("w")};
    const double lr = 1e-3;
    opt.step(params, lr);
    for (std::size_t i = 0; i < s.value.size(); ++i)
        CHECK_THAT(s.value[i], Catch::Matchers::WithinRel(2.0 * (1.0 - lr * 1e-2), 1e-12));
}

TEST_CASE("first step moves by about lr in the negative gradient direction") {
    // with bias correction the first update is lr * g / (|g| + eps)
    Slot s({5});
    Rng rng(3);
    for (std::size_t i = 0; i < s.value.size(); ++i) {
        s.value[i] = rng.normal();
        s.grad[i] = rng.normal();
    }
    Tensor before = s.value;
    AdamW opt(AdamWConfig{0.9, 0.999, 1e-8, 0.0});
    std::vector<ParamRef> params = {s.ref("w")};
    const double lr = 1e-3;
    opt.step(params, lr);
    for (std::size_t i = 0; i < s.value.size(); ++i) {
        const double expected = before[i] - lr * s.grad[i] / (std::fabs(s.grad[i]) + 1e-8);
        CHECK_THAT(s.value[i], Catch::Matchers::WithinAbs(expected, 1e-12));
    }
}

TEST_CASE("repeated steps minimize a quadratic") {
    Slot s({1});
    s.value[0] = 5.0;
    AdamW opt(AdamWConfig{0.9, 0.999, 1e-8, 0.0});
    std::vector<ParamRef> params = {s.ref("w")};
    for (int t = 0; t < 3000; ++t) {
        s.grad[0] = 2.0 * (s.value[0] - 1.5);   // d/dw (w - 1.5)^2
        opt.step(params, 1e-2);
    }
    CHECK_THAT(s.value[0], Catch::Matchers::WithinAbs(1.5, 1e-3));
    CHECK(opt.step_count() == 3000);
}

TEST_CASE("non-learnable parameters are left untouched") {
    Slot s({2});
    s.value[0] = 1.0;
    s.value[1] = 2.0;
    s.grad.fill(10.0);
    AdamW opt;
    std::vector<ParamRef> params = {{"buffer", &s.value, &s.grad, false}};
    opt.step(params, 1e-2);
    CHECK(s.value[0] == 1.0);
    CHECK(s.value[1] == 2.0);
}

TEST_CASE("non-finite gradients abort with the parameter name") {
    Slot s({2});
    s.grad[0] = std::numeric_limits<double>::quiet_NaN();
    AdamW opt;
    std::vector<ParamRef> params = {s.ref("enc.w")};
    CHECK_THROWS_WITH(opt.step(params, 1e-3), Catch::Matchers::ContainsSubstring("enc.w"));
}
