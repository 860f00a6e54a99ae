#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "hoi/autodiff.hpp"
#include "hoi/rng.hpp"

using namespace hoi;
using hoi::testing::check_gradients;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (int i = 0; i < t.size(); ++i) t.flat(i) = scale * rng.normal();
    return t;
}

}  // namespace

TEST_CASE("elementwise and matmul forward values") {
    auto a = constant(Tensor::row_vector({1.0, 2.0, 3.0}));
    auto b = constant(Tensor::row_vector({4.0, 5.0, 6.0}));
    CHECK(add(a, b)->value.at(0, 2) == doctest::Approx(9.0));
    CHECK(sub(a, b)->value.at(0, 0) == doctest::Approx(-3.0));
    CHECK(mul(a, b)->value.at(0, 1) == doctest::Approx(10.0));

    Tensor m({2, 2});
    m.at(0, 0) = 1;
    m.at(0, 1) = 2;
    m.at(1, 0) = 3;
    m.at(1, 1) = 4;
    auto mm = matmul(constant(m), constant(m));
    CHECK(mm->value.at(0, 0) == doctest::Approx(7.0));
    CHECK(mm->value.at(1, 1) == doctest::Approx(22.0));
}

TEST_CASE("shape violations raise ShapeError") {
    auto a = constant(Tensor::matrix(2, 3, 1.0));
    auto b = constant(Tensor::matrix(2, 2, 1.0));
    CHECK_THROWS_AS((void)add(a, b), ShapeError);
    CHECK_THROWS_AS((void)matmul(a, a), ShapeError);
    CHECK_THROWS_AS((void)attention(a, b, b), ShapeError);
}

TEST_CASE("gradients match finite differences across core ops") {
    for (uint64_t seed = 1; seed <= 20; ++seed) {
        Rng rng(seed);
        auto w1 = parameter(random_tensor({3, 4}, rng, 0.5));
        auto w2 = parameter(random_tensor({4, 2}, rng, 0.5));
        auto bias = parameter(random_tensor({1, 2}, rng, 0.1));
        auto gamma = parameter(random_tensor({1, 4}, rng, 0.2));
        auto beta = parameter(random_tensor({1, 4}, rng, 0.2));
        Tensor x = random_tensor({2, 3}, rng);

        auto build = [&]() {
            auto h = matmul(constant(x), w1);
            h = layer_norm_rows(h, gamma, beta);
            h = gelu(h);
            auto out = add_row(matmul(h, w2), bias);
            out = sigmoid(out);
            return mean_all(mul(out, out));
        };
        auto result = check_gradients({w1, w2, bias, gamma, beta}, build);
        CAPTURE(seed);
        CAPTURE(result.detail);
        CHECK(result.ok);
    }
}

TEST_CASE("softmax, log, pow, l2 and reductions gradcheck") {
    for (uint64_t seed = 100; seed < 112; ++seed) {
        Rng rng(seed);
        auto p = parameter(random_tensor({2, 5}, rng));
        auto q = parameter(random_tensor({1, 5}, rng, 0.8));
        auto build = [&]() {
            auto sm = softmax_rows(p);
            auto safe = clamp(sm, 1e-7, 1.0 - 1e-7);
            auto term = mul(log_of(safe), pow_of(safe, 0.5));
            auto normed = l2_normalize_row(q);
            return add(mean_all(term), sum_all(mul(normed, normed)));
        };
        auto result = check_gradients({p, q}, build);
        CAPTURE(seed);
        CAPTURE(result.detail);
        CHECK(result.ok);
    }
}

TEST_CASE("conv2d and pooling gradcheck") {
    for (uint64_t seed = 7; seed < 12; ++seed) {
        Rng rng(seed);
        auto w1 = parameter(random_tensor({3, 2, 3, 3}, rng, 0.4));
        auto b1 = parameter(random_tensor({1, 3}, rng, 0.1));
        auto w2 = parameter(random_tensor({4, 3, 3, 3}, rng, 0.4));
        auto b2 = parameter(random_tensor({1, 4}, rng, 0.1));
        Tensor img = random_tensor({2, 9, 9}, rng);
        auto build = [&]() {
            auto h = gelu(conv2d(constant(img), w1, b1, 2));
            auto out = global_avg_pool(conv2d(h, w2, b2, 1));
            return mean_all(mul(out, out));
        };
        auto result = check_gradients({w1, b1, w2, b2}, build);
        CAPTURE(seed);
        CAPTURE(result.detail);
        CHECK(result.ok);
    }
}

TEST_CASE("attention op: degenerate cases and hand-computed 2x2") {
    Rng rng(3);
    // A single key-value pair: output equals the value row for any query.
    auto q = constant(random_tensor({3, 4}, rng));
    auto k = constant(random_tensor({1, 4}, rng));
    auto v = constant(random_tensor({1, 2}, rng));
    auto out = attention(q, k, v);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 2; ++c) CHECK(out->value.at(r, c) == doctest::Approx(v->value.at(0, c)));

    // Two keys with identical logits: the mean of the value rows.
    Tensor keq({2, 4});
    for (int c = 0; c < 4; ++c) {
        keq.at(0, c) = 0.3 * c;
        keq.at(1, c) = 0.3 * c;
    }
    auto v2 = constant(random_tensor({2, 2}, rng));
    auto out2 = attention(constant(random_tensor({1, 4}, rng)), constant(keq), v2);
    for (int c = 0; c < 2; ++c)
        CHECK(out2->value.at(0, c) ==
              doctest::Approx(0.5 * (v2->value.at(0, c) + v2->value.at(1, c))));

    // Fixed 2x2 numeric case against scalar softmax arithmetic.
    Tensor qf({1, 2}), kf({2, 2}), vf({2, 2});
    qf.at(0, 0) = 1.0;
    qf.at(0, 1) = 2.0;
    kf.at(0, 0) = 0.5;
    kf.at(0, 1) = -1.0;
    kf.at(1, 0) = 1.5;
    kf.at(1, 1) = 0.25;
    vf.at(0, 0) = 1.0;
    vf.at(0, 1) = 0.0;
    vf.at(1, 0) = 0.0;
    vf.at(1, 1) = 2.0;
    const double logit0 = (1.0 * 0.5 + 2.0 * -1.0) / std::sqrt(2.0);
    const double logit1 = (1.0 * 1.5 + 2.0 * 0.25) / std::sqrt(2.0);
    const double e0 = std::exp(logit0), e1 = std::exp(logit1);
    const double p0 = e0 / (e0 + e1), p1 = e1 / (e0 + e1);
    auto out3 = attention(constant(qf), constant(kf), constant(vf));
    CHECK(out3->value.at(0, 0) == doctest::Approx(p0 * 1.0).epsilon(1e-6));
    CHECK(out3->value.at(0, 1) == doctest::Approx(p1 * 2.0).epsilon(1e-6));
}

TEST_CASE("attention with additive mask suppresses masked keys") {
    Rng rng(5);
    auto q = constant(random_tensor({1, 3}, rng));
    auto k = constant(random_tensor({4, 3}, rng));
    auto v = constant(random_tensor({4, 2}, rng));
    Tensor mask({1, 4});
    mask.at(0, 2) = -1e30;  // key 2 unreachable
    auto masked = attention(q, k, v, mask);
    // Equivalent to attention over keys {0,1,3}.
    Tensor k3({3, 3}), v3({3, 2});
    int rows[3] = {0, 1, 3};
    for (int i = 0; i < 3; ++i) {
        for (int c = 0; c < 3; ++c) k3.at(i, c) = k->value.at(rows[i], c);
        for (int c = 0; c < 2; ++c) v3.at(i, c) = v->value.at(rows[i], c);
    }
    auto expect = attention(q, constant(k3), constant(v3));
    for (int c = 0; c < 2; ++c)
        CHECK(masked->value.at(0, c) == doctest::Approx(expect->value.at(0, c)).epsilon(1e-9));
}

TEST_CASE("attention gradcheck through composed q/k/v projections") {
    for (uint64_t seed = 21; seed < 29; ++seed) {
        Rng rng(seed);
        auto wq = parameter(random_tensor({3, 4}, rng, 0.5));
        auto wk = parameter(random_tensor({3, 4}, rng, 0.5));
        auto wv = parameter(random_tensor({3, 4}, rng, 0.5));
        Tensor x = random_tensor({4, 3}, rng);
        auto build = [&]() {
            auto xin = constant(x);
            auto out = attention(matmul(xin, wq), matmul(xin, wk), matmul(xin, wv));
            return mean_all(mul(out, out));
        };
        auto result = check_gradients({wq, wk, wv}, build);
        CAPTURE(seed);
        CAPTURE(result.detail);
        CHECK(result.ok);
    }
}

TEST_CASE("structural ops gradcheck: concat, stack, slice, transpose") {
    for (uint64_t seed = 40; seed < 45; ++seed) {
        Rng rng(seed);
        auto a = parameter(random_tensor({1, 3}, rng));
        auto b = parameter(random_tensor({1, 2}, rng));
        auto c = parameter(random_tensor({1, 5}, rng));
        auto build = [&]() {
            auto cat = concat_cols({a, b});
            auto stacked = stack_rows({cat, c});
            auto sliced = slice_cols(transpose(stacked), 0, 2);
            auto r = row_at(sliced, 1);
            return mean_all(mul(r, add(r, scale(r, 0.5))));
        };
        auto result = check_gradients({a, b, c}, build);
        CAPTURE(result.detail);
        CHECK(result.ok);
    }
}

TEST_CASE("shared subgraphs accumulate gradients once per path") {
    auto w = parameter(Tensor::row_vector({2.0}));
    auto shared = mul(w, w);              // w^2
    auto loss = mean_all(add(shared, shared));  // 2 w^2, d/dw = 4w = 8
    backward(loss);
    CHECK(w->grad.at(0, 0) == doctest::Approx(8.0));
}

TEST_CASE("l2 normalize: zero vector maps to zero with zero grad") {
    auto z = parameter(Tensor::matrix(1, 4, 0.0));
    auto normed = l2_normalize_row(z);
    for (int c = 0; c < 4; ++c) CHECK(normed->value.at(0, c) == 0.0);
    auto loss = sum_all(normed);
    backward(loss);
    CHECK(z->grad.at(0, 0) == 0.0);
}

TEST_CASE("dropout mask scales and zeroes deterministically") {
    Rng rng(9);
    Tensor x = random_tensor({2, 4}, rng);
    Tensor mask({2, 4});
    for (int i = 0; i < mask.size(); ++i) mask.flat(i) = (i % 2 == 0) ? 2.0 : 0.0;
    auto out = mul_mask(constant(x), mask);
    for (int i = 0; i < x.size(); ++i)
        CHECK(out->value.flat(i) == doctest::Approx(x.flat(i) * mask.flat(i)));
}
