// Tensor-core contract tests: op examples with hand-computed oracles, the
// finite-difference gradient suite, and the determinism/associativity
// properties.

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "gfl/autodiff.hpp"
#include "gfl/ops.hpp"
#include "gfl/rng.hpp"

using namespace gfl;

namespace {

Tensor randn(std::vector<int64_t> shape, uint64_t tag, double stddev = 1.0) {
  Tensor t(std::move(shape));
  fill_normal(t, RandomStream(0xABCD + tag), stddev);
  return t;
}

}  // namespace

TEST_CASE("matmul: identity and scalar oracles") {
  Var eye = make_const(Tensor({2, 2}, {1, 0, 0, 1}));
  Var b = make_const(Tensor({2, 2}, {5, 6, 7, 8}));
  Var ab = matmul(eye, b);
  CHECK(ab->value.at(0, 0) == 5.0);
  CHECK(ab->value.at(0, 1) == 6.0);
  CHECK(ab->value.at(1, 0) == 7.0);
  CHECK(ab->value.at(1, 1) == 8.0);

  Var a2 = make_const(Tensor({2, 2}, {1, 2, 3, 4}));
  Var ba = matmul(a2, eye);
  for (int64_t i = 0; i < 4; ++i) CHECK(ba->value[i] == a2->value[i]);

  Var row = make_const(Tensor({1, 2}, {1, 2}));
  Var col = make_const(Tensor({2, 1}, {3, 4}));
  CHECK(matmul(row, col)->value[0] == doctest::Approx(11.0).epsilon(1e-12));

  CHECK_THROWS_AS(matmul(row, row), std::invalid_argument);
}

TEST_CASE("matmul: associativity on random triples") {
  for (uint64_t t = 0; t < 5; ++t) {
    Var a = make_const(randn({4, 6}, 3 * t));
    Var b = make_const(randn({6, 5}, 3 * t + 1));
    Var c = make_const(randn({5, 7}, 3 * t + 2));
    Var left = matmul(matmul(a, b), c);
    Var right = matmul(a, matmul(b, c));
    for (int64_t i = 0; i < left->value.numel(); ++i) {
      const double l = left->value[i], r = right->value[i];
      CHECK(std::abs(l - r) / std::max(1.0, std::abs(l)) < 1e-9);
    }
  }
}

TEST_CASE("softmax_rows: symmetry, shift invariance, scalar oracle") {
  Var z = make_const(Tensor({1, 3}, {0, 0, 0}));
  Var s = softmax_rows(z);
  for (int64_t j = 0; j < 3; ++j)
    CHECK(s->value[j] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  for (double c : {-3.0, 0.0, 17.5}) {
    Var x = make_const(Tensor({1, 2}, {c, c}));
    Var y = softmax_rows(x);
    CHECK(y->value[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(y->value[1] == doctest::Approx(0.5).epsilon(1e-12));
  }

  Var x = make_const(Tensor({1, 2}, {0.7071, 0.0}));
  Var y = softmax_rows(x);
  CHECK(y->value[0] == doctest::Approx(0.6698).epsilon(2e-3));
  CHECK(y->value[1] == doctest::Approx(0.3302).epsilon(2e-3));

  // rows sum to one and are invariant under adding a constant to a row
  Tensor r = randn({6, 9}, 77);
  Var sr = softmax_rows(make_const(r));
  Tensor shifted = r;
  for (int64_t i = 0; i < 6; ++i)
    for (int64_t j = 0; j < 9; ++j) shifted.at(i, j) += 0.731 * static_cast<double>(i + 1);
  Var ss = softmax_rows(make_const(shifted));
  for (int64_t i = 0; i < 6; ++i) {
    double rowsum = 0.0;
    for (int64_t j = 0; j < 9; ++j) {
      rowsum += sr->value.at(i, j);
      CHECK(std::abs(sr->value.at(i, j) - ss->value.at(i, j)) < 1e-9);
    }
    CHECK(std::abs(rowsum - 1.0) < 1e-6);
  }
}

TEST_CASE("instance_norm_cols: zero case, hand oracle, column means") {
  Var c = make_const(Tensor::full({5, 3}, 2.5));
  Var y = instance_norm_cols(c);
  for (int64_t i = 0; i < y->value.numel(); ++i) CHECK(y->value[i] == 0.0);

  Var two = make_const(Tensor({2, 1}, {1, 3}));
  Var yn = instance_norm_cols(two, 1e-15);
  CHECK(yn->value[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(yn->value[1] == doctest::Approx(1.0).epsilon(1e-9));

  Var r = make_const(randn({17, 4}, 5));
  Var ry = instance_norm_cols(r);
  for (int64_t j = 0; j < 4; ++j) {
    double m = 0.0;
    for (int64_t i = 0; i < 17; ++i) m += ry->value.at(i, j);
    CHECK(std::abs(m / 17.0) < 1e-9);
  }
}

TEST_CASE("conv2d: identity, box-sum, zero kernels") {
  Tensor img = randn({1, 1, 5, 5}, 9);
  Tensor ident({1, 1, 3, 3});
  ident.at(0, 0, 1, 1) = 1.0;
  Var y = conv2d(make_const(img), make_const(ident));
  for (int64_t i = 0; i < img.numel(); ++i) CHECK(y->value[i] == img[i]);

  Var ones_in = make_const(Tensor::full({1, 1, 3, 3}, 1.0));
  Var ones_k = make_const(Tensor::full({1, 1, 3, 3}, 1.0));
  Var box = conv2d(ones_in, ones_k);
  CHECK(box->value.at(0, 0, 1, 1) == doctest::Approx(9.0));

  Var zk = conv2d(make_const(img), make_const(Tensor({1, 1, 3, 3})));
  for (int64_t i = 0; i < zk->value.numel(); ++i) CHECK(zk->value[i] == 0.0);

  CHECK_THROWS_AS(conv2d(make_const(img), make_const(Tensor({1, 2, 3, 3}))),
                  std::invalid_argument);
}

TEST_CASE("resample: constants, mean oracle, down-up inverse") {
  Var c = make_const(Tensor::full({1, 2, 4, 4}, 0.75));
  Var up = resample_up(c);
  Var down = resample_down(c);
  for (int64_t i = 0; i < up->value.numel(); ++i) CHECK(up->value[i] == 0.75);
  for (int64_t i = 0; i < down->value.numel(); ++i) CHECK(down->value[i] == 0.75);

  Var m = make_const(Tensor({1, 1, 2, 2}, {1, 3, 5, 7}));
  CHECK(resample_down(m)->value[0] == doctest::Approx(4.0));

  Tensor x = randn({2, 3, 4, 4}, 21);
  Var rt = resample_down(resample_up(make_const(x)));
  for (int64_t i = 0; i < x.numel(); ++i) CHECK(rt->value[i] == doctest::Approx(x[i]).epsilon(1e-12));

  CHECK_THROWS_AS(resample_down(make_const(Tensor({1, 1, 3, 3}))), std::invalid_argument);
}

TEST_CASE("leaky_relu: pointwise definition") {
  Var x = make_const(Tensor({1, 3}, {5.0, -1.0, 0.0}));
  Var y = leaky_relu(x, 0.2);
  CHECK(y->value[0] == 5.0);
  CHECK(y->value[1] == doctest::Approx(-0.2));
  CHECK(y->value[2] == 0.0);
}

TEST_CASE("gradient_check: linear, softmax-mix, quadratic maps") {
  Tensor x = randn({3, 4}, 41, 0.8);
  CHECK(gradient_check([](const Var& v) { return sum(v); }, x) < 1e-8);

  Tensor v = randn({4, 2}, 42);
  CHECK(gradient_check(
            [&v](const Var& q) { return sum(matmul(softmax_rows(q), make_const(v))); }, x) <
        1e-4);

  Tensor sq = randn({4, 4}, 43, 0.5);
  CHECK(gradient_check([](const Var& q) { return sum(matmul(q, q)); }, sq) < 1e-6);
}

TEST_CASE("gradient suite: every op, three shapes") {
  const std::vector<std::vector<int64_t>> mats = {{2, 4}, {5, 3}, {4, 4}};
  for (size_t si = 0; si < mats.size(); ++si) {
    const auto shape = mats[si];
    Tensor x = randn(shape, 100 + si, 0.7);
    const int64_t rows = shape[0], cols = shape[1];

    Tensor other = randn(shape, 200 + si);
    auto expect_ok = [&](const std::function<Var(const Var&)>& f) {
      CHECK(gradient_check(f, x) < 1e-4);
    };

    expect_ok([&](const Var& v) { return sum(add(v, make_const(other))); });
    expect_ok([&](const Var& v) { return sum(sub(make_const(other), v)); });
    expect_ok([&](const Var& v) { return sum(mul(v, make_const(other))); });
    expect_ok([&](const Var& v) { return sum(mul(v, v)); });
    expect_ok([&](const Var& v) { return sum(scale(v, -2.5)); });
    expect_ok([&](const Var& v) { return mean(leaky_relu(v, 0.2)); });
    expect_ok([&](const Var& v) { return mean(softplus(v)); });
    expect_ok([&](const Var& v) { return sum(clamp(v, -0.5, 0.5)); });
    expect_ok([&](const Var& v) { return sum(softmax_rows(v)); });
    expect_ok([&](const Var& v) { return sum(mul(softmax_rows(v), make_const(other))); });
    expect_ok([&](const Var& v) { return sum(mul(instance_norm_cols(v), make_const(other))); });
    expect_ok([&](const Var& v) { return sum(mean_rows(mul(v, v))); });

    Tensor w = randn({cols, 3}, 300 + si);
    expect_ok([&](const Var& v) { return sum(matmul(v, make_const(w))); });
    Tensor wn = randn({6, cols}, 301 + si);
    expect_ok([&](const Var& v) { return sum(mul(matmul_nt(v, make_const(wn)),
                                                 make_const(randn({rows, 6}, 302 + si)))); });
    Tensor bias = randn({cols}, 303 + si);
    expect_ok([&](const Var& v) { return sum(mul(add_row_bias(v, make_const(bias)), v)); });

    Tensor gain = randn({cols}, 304 + si, 0.3);
    Tensor lbias = randn({cols}, 305 + si, 0.3);
    expect_ok([&](const Var& v) {
      return sum(mul(layer_norm_rows(v, make_const(gain), make_const(lbias)), make_const(other)));
    });

    expect_ok([&](const Var& v) {
      return sum(mul(concat_cols({v, slice_cols(v, 0, 1)}),
                     make_const(randn({rows, cols + 1}, 306 + si))));
    });
    expect_ok([&](const Var& v) {
      return sum(mul(concat_rows({v, slice_rows(v, 0, 1)}),
                     make_const(randn({rows + 1, cols}, 307 + si))));
    });
    expect_ok([&](const Var& v) { return sum(mul(reshape(v, {cols, rows}),
                                                 make_const(randn({cols, rows}, 308 + si)))); });
  }

  // layer_norm gain/bias paths
  Tensor x = randn({4, 6}, 400, 0.9);
  Tensor g0 = randn({6}, 401, 0.4);
  Tensor b0 = randn({6}, 402, 0.4);
  Tensor mixer = randn({4, 6}, 403);
  CHECK(gradient_check(
            [&](const Var& g) {
              return sum(mul(layer_norm_rows(make_const(x), g, make_const(b0)), make_const(mixer)));
            },
            g0) < 1e-4);
  CHECK(gradient_check(
            [&](const Var& b) {
              return sum(mul(layer_norm_rows(make_const(x), make_const(g0), b), make_const(mixer)));
            },
            b0) < 1e-4);
}

TEST_CASE("gradient suite: image ops") {
  Tensor img = randn({2, 3, 4, 4}, 500, 0.6);
  Tensor kern = randn({5, 3, 3, 3}, 501, 0.4);
  Tensor kern1 = randn({4, 3, 1, 1}, 502, 0.4);
  Tensor mix = randn({2, 5, 4, 4}, 503);
  Tensor mix1 = randn({2, 4, 4, 4}, 504);

  CHECK(gradient_check(
            [&](const Var& v) { return sum(mul(conv2d(v, make_const(kern)), make_const(mix))); },
            img) < 1e-4);
  CHECK(gradient_check(
            [&](const Var& w) { return sum(mul(conv2d(make_const(img), w), make_const(mix))); },
            kern) < 1e-4);
  CHECK(gradient_check(
            [&](const Var& w) { return sum(mul(conv2d(make_const(img), w), make_const(mix1))); },
            kern1) < 1e-4);

  Tensor cb = randn({3}, 505);
  CHECK(gradient_check(
            [&](const Var& v) {
              return sum(mul(add_channel_bias(v, make_const(cb)), make_const(randn({2, 3, 4, 4}, 506))));
            },
            img) < 1e-4);
  CHECK(gradient_check(
            [&](const Var& b) {
              return sum(mul(add_channel_bias(make_const(img), b), make_const(randn({2, 3, 4, 4}, 507))));
            },
            cb) < 1e-4);

  CHECK(gradient_check(
            [&](const Var& v) {
              return sum(mul(resample_up(v), make_const(randn({2, 3, 8, 8}, 508))));
            },
            img) < 1e-4);
  CHECK(gradient_check(
            [&](const Var& v) {
              return sum(mul(resample_down(v), make_const(randn({2, 3, 2, 2}, 509))));
            },
            img) < 1e-4);
  CHECK(gradient_check(
            [&](const Var& v) { return sum(mul(global_avg_pool(v), make_const(randn({2, 3}, 510)))); },
            img) < 1e-4);

  Tensor one_img = randn({3, 4, 4}, 511, 0.7);
  CHECK(gradient_check(
            [&](const Var& v) {
              return sum(mul(chw_to_rows(v), make_const(randn({16, 3}, 512))));
            },
            one_img) < 1e-4);
  Tensor rows = randn({16, 3}, 513);
  CHECK(gradient_check(
            [&](const Var& v) {
              return sum(mul(rows_to_chw(v, 4, 4), make_const(randn({3, 4, 4}, 514))));
            },
            rows) < 1e-4);
  CHECK(gradient_check(
            [&](const Var& v) {
              return sum(mul(stack_images({slice_image(v, 1), slice_image(v, 0)}),
                             make_const(randn({2, 3, 4, 4}, 515))));
            },
            img) < 1e-4);

  // noise injection strength path
  Tensor noise = randn({2, 3, 4, 4}, 516);
  Tensor s0 = Tensor::scalar(0.35);
  CHECK(gradient_check(
            [&](const Var& s) {
              return sum(mul(add_scaled_const(make_const(img), noise, s),
                             make_const(randn({2, 3, 4, 4}, 517))));
            },
            s0) < 1e-4);
}

TEST_CASE("determinism: identical inputs give bit-identical outputs") {
  Tensor img = randn({8, 16, 8, 8}, 600, 0.5);
  Tensor kern = randn({16, 16, 3, 3}, 601, 0.2);
  Var y1 = conv2d(make_const(img), make_const(kern));
  Var y2 = conv2d(make_const(img), make_const(kern));
  CHECK(std::memcmp(y1->value.data(), y2->value.data(),
                    sizeof(double) * static_cast<size_t>(y1->value.numel())) == 0);

  Tensor a = randn({37, 19}, 602);
  Tensor b = randn({19, 41}, 603);
  Var m1 = matmul(make_const(a), make_const(b));
  Var m2 = matmul(make_const(a), make_const(b));
  CHECK(std::memcmp(m1->value.data(), m2->value.data(),
                    sizeof(double) * static_cast<size_t>(m1->value.numel())) == 0);
}
