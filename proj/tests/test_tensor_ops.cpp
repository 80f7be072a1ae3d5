#include <cmath>
#include <vector>

#include "dift/errors.h"
#include "dift/ops.h"
#include "dift/rng.h"
#include "dift/tensor.h"
#include "doctest.h"

using namespace dift;

namespace {

Tensor random_tensor(const std::vector<int>& dims, Rng& rng, float lo = -1.0f, float hi = 1.0f) {
  Tensor t(dims);
  for (auto& v : t.data) v = rng.uniform_range(lo, hi);
  return t;
}

// Independent conv oracle: six explicit loops, accumulation in double.
Tensor conv_oracle(const Tensor& in, const Tensor& w, const Tensor& b) {
  const int C = in.dim(0), H = in.dim(1), W = in.dim(2);
  const int O = w.dim(0), K = w.dim(2);
  Tensor out({O, H - K + 1, W - K + 1});
  for (int o = 0; o < O; ++o)
    for (int y = 0; y + K <= H; ++y)
      for (int x = 0; x + K <= W; ++x) {
        double acc = b.at(o);
        for (int c = 0; c < C; ++c)
          for (int i = 0; i < K; ++i)
            for (int j = 0; j < K; ++j) acc += static_cast<double>(in.at(c, y + i, x + j)) * w.at(o, c, i, j);
        out.at(o, y, x) = static_cast<float>(acc);
      }
  return out;
}

}  // namespace

TEST_CASE("tensor dims and indexing") {
  Tensor t({2, 3, 4});
  CHECK(t.rank() == 3);
  CHECK(t.numel() == 24);
  t.at(1, 2, 3) = 7.5f;
  CHECK(t.data[23] == 7.5f);
  t.at(0, 0, 0) = 1.0f;
  CHECK(t.data[0] == 1.0f);

  CHECK_THROWS_AS(Tensor({0, 3}), DimError);
  CHECK_THROWS_AS(Tensor({1, 2, 3, 4, 5}), DimError);

  Tensor r = t.reshaped({6, 4});
  CHECK(r.rank() == 2);
  CHECK(r.data == t.data);
  CHECK_THROWS_AS(t.reshaped({5, 5}), DimError);

  Tensor z = Tensor::zeros_like(t);
  CHECK(z.same_dims(t));
  for (float v : z.data) CHECK(v == 0.0f);
}

TEST_CASE("conv2d_valid zero input passes bias through") {
  Tensor in({2, 5, 5});
  Tensor w({3, 2, 3, 3});
  Rng rng(11);
  for (auto& v : w.data) v = rng.uniform_range(-1.0f, 1.0f);
  Tensor b({3});
  b.data = {0.5f, -1.25f, 2.0f};
  Tensor out = conv2d_valid(in, w, b);
  REQUIRE(out.dims == std::vector<int>{3, 3, 3});
  for (int o = 0; o < 3; ++o)
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) CHECK(out.at(o, y, x) == b.at(o));
}

TEST_CASE("conv2d_valid impulse response") {
  Tensor in({1, 3, 3});
  in.at(0, 1, 1) = 1.0f;
  Tensor w({1, 1, 1, 1});
  w.data = {2.0f};
  Tensor b({1});
  Tensor out = conv2d_valid(in, w, b);
  REQUIRE(out.dims == std::vector<int>{1, 3, 3});
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) CHECK(out.at(0, y, x) == (y == 1 && x == 1 ? 2.0f : 0.0f));
}

TEST_CASE("conv2d_valid shape chain for the default architecture") {
  Rng rng(3);
  Tensor in = random_tensor({3, 35, 35}, rng);
  Tensor w1 = random_tensor({9, 3, 16, 16}, rng, -0.05f, 0.05f);
  Tensor b1({9});
  Tensor o1 = conv2d_valid(in, w1, b1);
  CHECK(o1.dims == std::vector<int>{9, 20, 20});
  Tensor w2 = random_tensor({18, 9, 11, 11}, rng, -0.05f, 0.05f);
  Tensor b2({18});
  Tensor o2 = conv2d_valid(o1, w2, b2);
  CHECK(o2.dims == std::vector<int>{18, 10, 10});
}

TEST_CASE("conv2d_valid matches the 6-loop oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 3; ++trial) {
    Tensor in = random_tensor({3, 13 + trial, 17}, rng);
    Tensor w = random_tensor({4, 3, 5, 5}, rng);
    Tensor b = random_tensor({4}, rng);
    Tensor got = conv2d_valid(in, w, b);
    Tensor want = conv_oracle(in, w, b);
    REQUIRE(got.dims == want.dims);
    for (std::size_t i = 0; i < got.numel(); ++i)
      CHECK(std::abs(got.data[i] - want.data[i]) <= 1e-5f);
  }
}

TEST_CASE("conv2d_valid dimension errors name the axis") {
  Tensor in({3, 8, 8});
  Tensor w({2, 4, 3, 3});
  Tensor b({2});
  CHECK_THROWS_WITH_AS(conv2d_valid(in, w, b), doctest::Contains("channel"), DimError);
  Tensor w2({2, 3, 9, 9});
  CHECK_THROWS_AS(conv2d_valid(in, w2, b), DimError);
  Tensor w3({2, 3, 3, 4});
  CHECK_THROWS_AS(conv2d_valid(in, w3, b), DimError);
  Tensor b2({3});
  Tensor w4({2, 3, 3, 3});
  CHECK_THROWS_WITH_AS(conv2d_valid(in, w4, b2), doctest::Contains("bias"), DimError);
}

TEST_CASE("linear identity and constant maps") {
  Tensor in({3});
  in.data = {1.0f, 2.0f, 3.0f};
  Tensor w({3, 3});
  for (int i = 0; i < 3; ++i) w.at(i, i) = 1.0f;
  Tensor b({3});
  Tensor out = linear(in, w, b);
  CHECK(out.data == std::vector<float>{1.0f, 2.0f, 3.0f});

  Tensor wz({1, 3});
  Tensor bz({1});
  bz.data = {0.5f};
  Tensor out2 = linear(in, wz, bz);
  REQUIRE(out2.dims == std::vector<int>{1});
  CHECK(out2.data[0] == 0.5f);
}

TEST_CASE("linear broadcasts over leading axes") {
  Rng rng(5);
  Tensor in = random_tensor({18, 100}, rng);
  Tensor w = random_tensor({50, 100}, rng, -0.1f, 0.1f);
  Tensor b = random_tensor({50}, rng);
  Tensor out = linear(in, w, b);
  REQUIRE(out.dims == std::vector<int>{18, 50});
  for (int r = 0; r < 18; r += 5)
    for (int m = 0; m < 50; m += 7) {
      double acc = b.at(m);
      for (int n = 0; n < 100; ++n) acc += static_cast<double>(in.at(r, n)) * w.at(m, n);
      CHECK(std::abs(out.at(r, m) - acc) <= 1e-4);
    }

  Tensor in3 = random_tensor({4, 6, 100}, rng);
  Tensor out3 = linear(in3, w, b);
  CHECK(out3.dims == std::vector<int>{4, 6, 50});

  Tensor bad = random_tensor({18, 99}, rng);
  CHECK_THROWS_AS(linear(bad, w, b), DimError);
}

TEST_CASE("mish values from the definition in high precision") {
  CHECK(mish_one(0.0f) == 0.0f);
  CHECK(std::abs(mish_one(10.0f) - 10.0f) < 1e-3f);
  CHECK(std::abs(mish_one(-20.0f)) < 1e-6f);
  // x * tanh(softplus(x)) evaluated in double
  for (float x : {-6.0f, -2.5f, -1.0f, -0.5f, 0.3f, 1.0f, 2.7f, 8.0f}) {
    const double want = static_cast<double>(x) * std::tanh(std::log1p(std::exp(static_cast<double>(x))));
    CHECK(mish_one(x) == doctest::Approx(want).epsilon(2e-6));
  }
  // monotone for x >= 0 and |mish(x) - x| small for large x
  float prev = mish_one(0.0f);
  for (int i = 1; i <= 200; ++i) {
    const float x = 0.1f * i;
    const float v = mish_one(x);
    CHECK(v >= prev);
    prev = v;
  }
  for (float x : {10.0f, 25.0f, 60.0f, 80.0f}) CHECK(std::abs(mish_one(x) - x) < 1e-3f);
  CHECK(std::isfinite(mish_one(80.0f)));
}

TEST_CASE("mish gradient matches finite differences") {
  for (double x : {-8.0, -3.0, -1.0, -0.2, 0.0, 0.4, 1.7, 5.0, 12.0}) {
    const double eps = 1e-6;
    const double fd = (mish_one(x + eps) - mish_one(x - eps)) / (2 * eps);
    CHECK(mish_grad_one(x) == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("dropout p=0 and inference are bitwise identity") {
  Rng rng(8);
  Tensor x = random_tensor({7, 9}, rng);
  Rng fresh(1);
  const std::uint64_t want = fresh.next_u64();
  Rng r1(1);
  auto a = dropout(x, 0.0f, true, r1);
  CHECK(a.out.data == x.data);
  CHECK(a.mask.data.empty());
  CHECK(r1.next_u64() == want);  // no draws consumed

  Rng r3(2);
  auto b = dropout(x, 0.5f, false, r3);
  CHECK(b.out.data == x.data);
  CHECK(b.mask.data.empty());
}

TEST_CASE("dropout statistics and determinism") {
  Rng rng(21);
  Tensor x({100000});
  for (auto& v : x.data) v = 1.0f;
  Rng d1(77);
  auto r1 = dropout(x, 0.5f, true, d1);
  Rng d2(77);
  auto r2 = dropout(x, 0.5f, true, d2);
  CHECK(r1.out.data == r2.out.data);

  double mean = 0.0;
  std::size_t zeros = 0;
  for (float v : r1.out.data) {
    mean += v;
    if (v == 0.0f) ++zeros;
    else CHECK(v == 2.0f);  // survivors scaled by 1/(1-p)
  }
  mean /= static_cast<double>(x.numel());
  CHECK(std::abs(mean - 1.0) < 0.02);
  CHECK(std::abs(static_cast<double>(zeros) / static_cast<double>(x.numel()) - 0.5) < 0.02);

  Rng d3(5);
  CHECK_THROWS_AS(dropout(x, 1.0f, true, d3), DataError);
  CHECK_THROWS_AS(dropout(x, -0.1f, true, d3), DataError);
}

TEST_CASE("mse_loss values and strictness") {
  Tensor a({1, 1}), b({1, 1});
  a.data = {1.0f};
  CHECK(mse_loss(a, b) == 1.0);
  CHECK(mse_loss(a, a) == 0.0);

  Tensor p({2, 2}), t({2, 2});
  p.data = {1.0f, 0.0f, 0.0f, 1.0f};
  CHECK(mse_loss(p, t) == 0.5);

  Tensor bad({4});
  CHECK_THROWS_WITH_AS(mse_loss(p, bad), doctest::Contains("no broadcasting"), DimError);
  Tensor bad2({2, 3});
  CHECK_THROWS_AS(mse_loss(p, bad2), DimError);

  Rng rng(1);
  Tensor r1 = random_tensor({5, 3}, rng), r2 = random_tensor({5, 3}, rng);
  CHECK(mse_loss(r1, r2) >= 0.0);
  CHECK(mse_grad(p, t).dims == p.dims);
  auto g = mse_grad(t, t);
  for (float v : g.data) CHECK(v == 0.0f);
}

TEST_CASE("conv2d_valid_grad matches finite differences in double") {
  Rng rng(31);
  TensorT<double> in({2, 7, 7}), w({3, 2, 3, 3}), b({3});
  for (auto& v : in.data) v = rng.uniform_f64() - 0.5;
  for (auto& v : w.data) v = rng.uniform_f64() - 0.5;
  for (auto& v : b.data) v = rng.uniform_f64() - 0.5;
  TensorT<double> gout({3, 5, 5});
  for (auto& v : gout.data) v = rng.uniform_f64() - 0.5;

  auto grads = conv2d_valid_grad(in, w, gout);
  const double eps = 1e-6;
  auto loss = [&](const TensorT<double>& ii, const TensorT<double>& ww, const TensorT<double>& bb) {
    TensorT<double> out = conv2d_valid(ii, ww, bb);
    double s = 0.0;
    for (std::size_t k = 0; k < out.numel(); ++k) s += out.data[k] * gout.data[k];
    return s;
  };
  for (std::size_t k = 0; k < w.numel(); k += 7) {
    TensorT<double> wp = w, wm = w;
    wp.data[k] += eps;
    wm.data[k] -= eps;
    const double fd = (loss(in, wp, b) - loss(in, wm, b)) / (2 * eps);
    CHECK(grads.gw.data[k] == doctest::Approx(fd).epsilon(1e-6).scale(1));
  }
  for (std::size_t k = 0; k < b.numel(); ++k) {
    TensorT<double> bp = b, bm = b;
    bp.data[k] += eps;
    bm.data[k] -= eps;
    const double fd = (loss(in, w, bp) - loss(in, w, bm)) / (2 * eps);
    CHECK(grads.gb.data[k] == doctest::Approx(fd).epsilon(1e-6));
  }
  for (std::size_t k = 0; k < in.numel(); k += 11) {
    TensorT<double> ip = in, im = in;
    ip.data[k] += eps;
    im.data[k] -= eps;
    const double fd = (loss(ip, w, b) - loss(im, w, b)) / (2 * eps);
    CHECK(grads.gin.data[k] == doctest::Approx(fd).epsilon(1e-6).scale(1));
  }
}

TEST_CASE("linear_grad matches finite differences and identity Jacobian") {
  Rng rng(47);
  TensorT<double> in({4, 6}), w({5, 6}), b({5}), gout({4, 5});
  for (auto& v : in.data) v = rng.uniform_f64() - 0.5;
  for (auto& v : w.data) v = rng.uniform_f64() - 0.5;
  for (auto& v : b.data) v = rng.uniform_f64() - 0.5;
  for (auto& v : gout.data) v = rng.uniform_f64() - 0.5;
  auto grads = linear_grad(in, w, gout);

  const double eps = 1e-6;
  auto loss = [&](const TensorT<double>& ii, const TensorT<double>& ww, const TensorT<double>& bb) {
    TensorT<double> out = linear(ii, ww, bb);
    double s = 0.0;
    for (std::size_t k = 0; k < out.numel(); ++k) s += out.data[k] * gout.data[k];
    return s;
  };
  for (std::size_t k = 0; k < w.numel(); ++k) {
    TensorT<double> wp = w, wm = w;
    wp.data[k] += eps;
    wm.data[k] -= eps;
    CHECK(grads.gw.data[k] ==
          doctest::Approx((loss(in, wp, b) - loss(in, wm, b)) / (2 * eps)).epsilon(1e-6));
  }
  for (std::size_t k = 0; k < in.numel(); ++k) {
    TensorT<double> ip = in, im = in;
    ip.data[k] += eps;
    im.data[k] -= eps;
    CHECK(grads.gin.data[k] ==
          doctest::Approx((loss(ip, w, b) - loss(im, w, b)) / (2 * eps)).epsilon(1e-6));
  }

  // identity weight: input gradient equals upstream gradient
  TensorT<double> wi({6, 6});
  for (int i = 0; i < 6; ++i) wi.at(i, i) = 1.0;
  TensorT<double> bi({6}), gi({4, 6});
  for (auto& v : gi.data) v = rng.uniform_f64() - 0.5;
  auto id_grads = linear_grad(in, wi, gi);
  for (std::size_t k = 0; k < gi.numel(); ++k) CHECK(id_grads.gin.data[k] == gi.data[k]);
}
