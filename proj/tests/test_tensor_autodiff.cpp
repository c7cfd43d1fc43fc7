#include <cmath>

#include "cosmic/autodiff.hpp"
#include "cosmic/errors.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cosmic;
using cosmic::testutil::fd_check;
using cosmic::testutil::random_tensor;
using cosmic::testutil::sample_indices;

TEST_CASE("conv2d identity kernel reproduces the input") {
  Tensor x = random_tensor({1, 3, 3}, 1);
  Tensor w = Tensor::from({1, 1, 1, 1}, {1.0f});
  Tensor out = conv2d_fwd(x, w, Tensor(), ConvGeom::same(1, 0));
  CHECK(out.shape == x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(out.data[i] == x.data[i]);
}

TEST_CASE("conv2d all-ones 4x4 input with 3x3 ones kernel sums windows") {
  // hand-summation oracle: every 3x3 window of ones sums to 9
  Tensor x = Tensor::full({1, 4, 4}, 1.0f);
  Tensor w = Tensor::full({1, 1, 3, 3}, 1.0f);
  Tensor out = conv2d_fwd(x, w, Tensor(), ConvGeom::same(1, 0));
  REQUIRE(out.shape == std::vector<int>{1, 2, 2});
  for (float v : out.data) CHECK(v == doctest::Approx(9.0f));
}

TEST_CASE("conv2d stride-2 shape arithmetic at production size") {
  Tensor x = random_tensor({3, 256, 256}, 2, 0.0f, 1.0f);
  Tensor w = random_tensor({192, 3, 5, 5}, 3, -0.1f, 0.1f);
  Tensor out = conv2d_fwd(x, w, Tensor(), ConvGeom::same(2, 2));
  CHECK(out.shape == std::vector<int>{192, 128, 128});
}

TEST_CASE("conv2d rejects mismatched channel counts with a dimension report") {
  Tensor x = random_tensor({2, 8, 8}, 4);
  Tensor w = random_tensor({4, 3, 3, 3}, 5);
  CHECK_THROWS_AS(conv2d_fwd(x, w, Tensor(), ConvGeom::same(1, 1)), MismatchError);
  try {
    conv2d_fwd(x, w, Tensor(), ConvGeom::same(1, 1));
  } catch (const MismatchError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,8,8]") != std::string::npos);
  }
}

TEST_CASE("depthwise conv with identity kernels reproduces each channel") {
  Tensor x = random_tensor({2, 5, 5}, 6);
  Tensor w = Tensor::zeros({2, 1, 3, 3});
  w.data[4] = 1.0f;       // center of channel 0 kernel
  w.data[9 + 4] = 1.0f;   // center of channel 1 kernel
  Tensor out = conv2d_fwd(x, w, Tensor(), ConvGeom::same(1, 1, 2));
  CHECK(out.shape == x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(out.data[i] == doctest::Approx(x.data[i]));
}

TEST_CASE("depthwise conv equals a per-channel dense conv oracle") {
  Tensor x = random_tensor({2, 6, 6}, 7);
  Tensor w = random_tensor({2, 1, 3, 3}, 8);
  Tensor got = conv2d_fwd(x, w, Tensor(), ConvGeom::same(1, 1, 2));
  for (int c = 0; c < 2; ++c) {
    Tensor xc({1, 6, 6});
    std::copy_n(x.data.begin() + c * 36, 36, xc.data.begin());
    Tensor wc({1, 1, 3, 3});
    std::copy_n(w.data.begin() + c * 9, 9, wc.data.begin());
    Tensor oc = conv2d_fwd(xc, wc, Tensor(), ConvGeom::same(1, 1));
    for (int i = 0; i < 36; ++i) CHECK(got.data[static_cast<size_t>(c * 36 + i)] == doctest::Approx(oc.data[static_cast<size_t>(i)]));
  }
}

TEST_CASE("transposed conv doubles spatial extent per stride-2 application") {
  Tensor x = random_tensor({192, 16, 16}, 9);
  Tensor w1 = random_tensor({192, 192, 5, 5}, 10, -0.05f, 0.05f);
  Tensor mid = tconv2d_fwd(x, w1, Tensor(), TConvGeom{2, 2, 1, 1});
  CHECK(mid.shape == std::vector<int>{192, 32, 32});
  Tensor out = tconv2d_fwd(mid, w1, Tensor(), TConvGeom{2, 2, 1, 1});
  CHECK(out.shape == std::vector<int>{192, 64, 64});
}

TEST_CASE("transposed conv of a single pixel broadcasts the kernel") {
  Tensor x = Tensor::from({1, 1, 1}, {3.5f});
  Tensor w = Tensor::full({1, 1, 2, 2}, 1.0f);
  Tensor out = tconv2d_fwd(x, w, Tensor(), TConvGeom{2, 0, 0, 1});
  REQUIRE(out.shape == std::vector<int>{1, 2, 2});
  for (float v : out.data) CHECK(v == doctest::Approx(3.5f));
}

TEST_CASE("adjoint identity: <conv(x,w), u> == <x, tconv(u,w)>") {
  for (uint64_t seed = 0; seed < 4; ++seed) {
    Tensor x = random_tensor({3, 9, 11}, 100 + seed);
    Tensor w = random_tensor({5, 3, 3, 3}, 200 + seed);
    const int stride = seed % 2 == 0 ? 1 : 2;
    Tensor cx = conv2d_fwd(x, w, Tensor(), ConvGeom::same(stride, 1));
    Tensor u = random_tensor(cx.shape, 300 + seed);
    // reconstruct x's extent: out_pad chosen so the adjoint shape matches
    const int oy = (x.dim(1) - 1) - ((cx.dim(1) - 1) * stride - 2 + 3 - 1);
    const int ox = (x.dim(2) - 1) - ((cx.dim(2) - 1) * stride - 2 + 3 - 1);
    Tensor tx = tconv2d_fwd(u, w, Tensor(), TConvGeom{stride, 1, std::max(oy, ox), 1});
    Tensor tx_crop({x.dim(0), x.dim(1), x.dim(2)});
    for (int c = 0; c < x.dim(0); ++c) {
      for (int y = 0; y < x.dim(1); ++y) {
        for (int xx = 0; xx < x.dim(2); ++xx) tx_crop.at3(c, y, xx) = tx.at3(c, y, xx);
      }
    }
    const double lhs = dot(cx, u);
    const double rhs = dot(x, tx_crop);
    CHECK(std::fabs(lhs - rhs) <= 1e-4 * std::max(1.0, std::fabs(lhs)));
  }
}

TEST_CASE("adjoint identity holds for the depthwise variant too") {
  for (uint64_t seed = 0; seed < 2; ++seed) {
    const int c = 3;
    Tensor x = random_tensor({c, 9, 9}, 400 + seed);
    Tensor w = random_tensor({c, 1, 3, 3}, 500 + seed);
    const int stride = seed % 2 == 0 ? 1 : 2;
    Tensor cx = conv2d_fwd(x, w, Tensor(), ConvGeom{stride, 1, 1, c});
    Tensor u = random_tensor(cx.shape, 600 + seed);
    Tensor tx = tconv2d_fwd(u, w, Tensor(), TConvGeom{stride, 1, 0, c});
    CHECK(tx.shape == x.shape);
    const double lhs = dot(cx, u);
    const double rhs = dot(x, tx);
    CHECK(std::fabs(lhs - rhs) <= 1e-4 * std::max(1.0, std::fabs(lhs)));
  }
}

TEST_CASE("gdn with beta=1 gamma=0 is the identity") {
  Tensor x = random_tensor({3, 4, 4}, 11);
  Tensor beta = Tensor::full({3}, 1.0f);
  Tensor gamma = Tensor::zeros({3, 3});
  Tensor out = gdn_fwd(x, beta, gamma, false);
  for (size_t i = 0; i < x.data.size(); ++i) CHECK(out.data[i] == doctest::Approx(x.data[i]));
}

TEST_CASE("gdn scalar formula: beta=1, gamma=3, x=1 gives 1/2") {
  Tensor x = Tensor::full({1, 1, 1}, 1.0f);
  Tensor beta = Tensor::full({1}, 1.0f);
  Tensor gamma = Tensor::full({1, 1}, 3.0f);
  Tensor out = gdn_fwd(x, beta, gamma, false);
  CHECK(out.data[0] == doctest::Approx(0.5f));
}

TEST_CASE("igdn is the multiplicative counterpart of gdn") {
  Tensor x = random_tensor({4, 3, 3}, 12);
  Tensor beta = random_tensor({4}, 13, 0.5f, 1.5f);
  Tensor gamma = random_tensor({4, 4}, 14, 0.0f, 0.3f);
  Tensor fwd = gdn_fwd(x, beta, gamma, false);
  Tensor inv = gdn_fwd(x, beta, gamma, true);
  // y_gdn * y_igdn == x^2 elementwise (both use the same denominator from x)
  for (size_t i = 0; i < x.data.size(); ++i) {
    CHECK(fwd.data[i] * inv.data[i] == doctest::Approx(x.data[i] * x.data[i]).epsilon(1e-4));
  }
}

TEST_CASE("backward: loss = sum(x) gives an all-ones gradient") {
  Graph g;
  Var x = g.leaf(random_tensor({2, 3, 4}, 15));
  Var loss = g.sum(x);
  g.backward(loss);
  for (float v : g.grad(x).data) CHECK(v == doctest::Approx(1.0f));
}

TEST_CASE("backward: loss = sum(x^2) at [1,2] gives [2,4]") {
  Graph g;
  Var x = g.leaf(Tensor::from({2}, {1.0f, 2.0f}));
  Var loss = g.sum(g.square(x));
  g.backward(loss);
  CHECK(g.grad(x).data[0] == doctest::Approx(2.0f));
  CHECK(g.grad(x).data[1] == doctest::Approx(4.0f));
}

TEST_CASE("backward rejects non-scalar losses") {
  Graph g;
  Var x = g.leaf(random_tensor({3}, 16));
  CHECK_THROWS_AS(g.backward(x), MismatchError);
}

TEST_CASE("unreached leaves keep zero gradients") {
  Graph g;
  Var x = g.leaf(random_tensor({3}, 17));
  Var y = g.leaf(random_tensor({3}, 18));
  Var loss = g.sum(x);
  g.backward(loss);
  for (float v : g.grad(y).data) CHECK(v == 0.0f);
}

namespace {

// One FD pass for a unary graph op. The op output is projected onto a fixed
// random direction so the loss has a non-degenerate gradient everywhere.
template <typename BuildFn>
void check_unary_grad(std::vector<int> shape, BuildFn build, uint64_t seed, float lo = -2.0f,
                      float hi = 2.0f, double tol = 1e-3, double h = 1e-3) {
  Tensor x0 = random_tensor(shape, seed, lo, hi);
  Tensor proj;
  {
    Graph probe;
    Var out = build(probe, probe.leaf(x0));
    proj = random_tensor(probe.value(out).shape, seed + 7, 0.2f, 1.0f);
  }
  auto eval = [&]() {
    Graph g;
    Var x = g.leaf(x0);
    return g.scalar64(g.sum(g.mul(build(g, x), g.constant(proj))));
  };
  Graph g;
  Var x = g.leaf(x0);
  Var loss = g.sum(g.mul(build(g, x), g.constant(proj)));
  g.backward(loss);
  Tensor analytic = g.grad(x);
  auto rep = fd_check(x0, analytic, eval, sample_indices(x0.numel(), 6, seed + 1), h);
  CHECK(rep.max_rel_err < tol);
}

}  // namespace

TEST_CASE("elementwise op gradients match central finite differences") {
  check_unary_grad({2, 3}, [](Graph& g, Var x) { return g.sigmoid(x); }, 20);
  check_unary_grad({2, 3}, [](Graph& g, Var x) { return g.exp(x); }, 21);
  check_unary_grad({2, 3}, [](Graph& g, Var x) { return g.softplus(x); }, 22);
  check_unary_grad({2, 3}, [](Graph& g, Var x) { return g.silu(x); }, 23);
  check_unary_grad({2, 3}, [](Graph& g, Var x) { return g.square(x); }, 24);
  check_unary_grad({2, 3}, [](Graph& g, Var x) { return g.mul(x, x); }, 25);
  check_unary_grad({2, 3}, [](Graph& g, Var x) { return g.abs(x); }, 26, 0.5f, 2.0f);
  // softmax outputs sit near the f32 quantization floor relative to their
  // gradient scale; a slightly larger step keeps the difference signal clean
  check_unary_grad({3, 4}, [](Graph& g, Var x) { return g.softmax_axis0(x); }, 27, -2.0f, 2.0f,
                   1e-3, 1e-2);
  check_unary_grad({2, 4}, [](Graph& g, Var x) { return g.transpose2d(x); }, 28);
  check_unary_grad({4, 3, 3}, [](Graph& g, Var x) { return g.slice_channels(x, 1, 2); }, 29);
  check_unary_grad({4, 4, 4}, [](Graph& g, Var x) { return g.crop_spatial(x, 3, 2); }, 30);
}

TEST_CASE("matmul gradients match finite differences") {
  Tensor a0 = random_tensor({3, 4}, 31);
  Tensor b0 = random_tensor({4, 2}, 32);
  auto eval = [&]() {
    Graph g;
    return g.scalar64(g.sum(g.matmul(g.leaf(a0), g.leaf(b0))));
  };
  Graph g;
  Var a = g.leaf(a0);
  Var b = g.leaf(b0);
  g.backward(g.sum(g.matmul(a, b)));
  auto rep_a = fd_check(a0, g.grad(a), eval, sample_indices(a0.numel(), 6, 33));
  auto rep_b = fd_check(b0, g.grad(b), eval, sample_indices(b0.numel(), 6, 34));
  CHECK(rep_a.max_rel_err < 1e-3);
  CHECK(rep_b.max_rel_err < 1e-3);
}

TEST_CASE("conv2d gradients (input, weight, bias) match finite differences") {
  Tensor x0 = random_tensor({2, 6, 6}, 35);
  Tensor w0 = random_tensor({3, 2, 3, 3}, 36);
  Tensor b0 = random_tensor({3}, 37);
  auto eval = [&]() {
    Graph g;
    return g.scalar64(g.sum(g.conv2d(g.leaf(x0), g.leaf(w0), g.leaf(b0), 2, 1)));
  };
  Graph g;
  Var x = g.leaf(x0), w = g.leaf(w0), b = g.leaf(b0);
  g.backward(g.sum(g.conv2d(x, w, b, 2, 1)));
  CHECK(fd_check(x0, g.grad(x), eval, sample_indices(x0.numel(), 8, 38)).max_rel_err < 1e-3);
  CHECK(fd_check(w0, g.grad(w), eval, sample_indices(w0.numel(), 8, 39)).max_rel_err < 1e-3);
  CHECK(fd_check(b0, g.grad(b), eval, sample_indices(b0.numel(), 3, 40)).max_rel_err < 1e-3);
}

TEST_CASE("transposed conv gradients match finite differences") {
  Tensor x0 = random_tensor({3, 4, 4}, 41);
  Tensor w0 = random_tensor({3, 2, 5, 5}, 42);
  Tensor b0 = random_tensor({2}, 43);
  auto eval = [&]() {
    Graph g;
    return g.scalar64(g.sum(g.tconv2d(g.leaf(x0), g.leaf(w0), g.leaf(b0), 2, 2, 1)));
  };
  Graph g;
  Var x = g.leaf(x0), w = g.leaf(w0), b = g.leaf(b0);
  g.backward(g.sum(g.tconv2d(x, w, b, 2, 2, 1)));
  CHECK(fd_check(x0, g.grad(x), eval, sample_indices(x0.numel(), 8, 44)).max_rel_err < 1e-3);
  CHECK(fd_check(w0, g.grad(w), eval, sample_indices(w0.numel(), 8, 45)).max_rel_err < 1e-3);
  CHECK(fd_check(b0, g.grad(b), eval, sample_indices(b0.numel(), 2, 46)).max_rel_err < 1e-3);
}

TEST_CASE("gdn/igdn gradients match finite differences") {
  for (bool inverse : {false, true}) {
    Tensor x0 = random_tensor({3, 3, 3}, 47, -1.5f, 1.5f);
    Tensor beta0 = random_tensor({3}, 48, 0.5f, 1.5f);
    Tensor gamma0 = random_tensor({3, 3}, 49, 0.01f, 0.4f);
    auto eval = [&]() {
      Graph g;
      return g.scalar64(g.sum(g.gdn(g.leaf(x0), g.leaf(beta0), g.leaf(gamma0), inverse)));
    };
    Graph g;
    Var x = g.leaf(x0), beta = g.leaf(beta0), gamma = g.leaf(gamma0);
    g.backward(g.sum(g.gdn(x, beta, gamma, inverse)));
    CHECK(fd_check(x0, g.grad(x), eval, sample_indices(x0.numel(), 9, 50)).max_rel_err < 1e-3);
    CHECK(fd_check(beta0, g.grad(beta), eval, sample_indices(3, 3, 51)).max_rel_err < 1e-3);
    CHECK(fd_check(gamma0, g.grad(gamma), eval, sample_indices(9, 6, 52)).max_rel_err < 1e-3);
  }
}

TEST_CASE("rate-term gradients match finite differences") {
  Tensor s0 = random_tensor({8}, 53, -2.0f, 2.0f);
  Tensor mu0 = random_tensor({8}, 54, -1.0f, 1.0f);
  Tensor sg0 = random_tensor({8}, 55, 0.3f, 2.0f);
  SUBCASE("gaussian") {
    auto eval = [&]() {
      Graph g;
      return g.scalar64(g.gaussian_rate_bits(g.leaf(s0), g.leaf(mu0), g.leaf(sg0)));
    };
    Graph g;
    Var s = g.leaf(s0), mu = g.leaf(mu0), sg = g.leaf(sg0);
    g.backward(g.gaussian_rate_bits(s, mu, sg));
    CHECK(fd_check(s0, g.grad(s), eval, sample_indices(8, 8, 56)).max_rel_err < 1e-3);
    CHECK(fd_check(mu0, g.grad(mu), eval, sample_indices(8, 8, 57)).max_rel_err < 1e-3);
    CHECK(fd_check(sg0, g.grad(sg), eval, sample_indices(8, 8, 58)).max_rel_err < 1e-3);
  }
  SUBCASE("logistic") {
    auto eval = [&]() {
      Graph g;
      return g.scalar64(g.logistic_rate_bits(g.leaf(s0), g.leaf(mu0), g.leaf(sg0)));
    };
    Graph g;
    Var s = g.leaf(s0), mu = g.leaf(mu0), sg = g.leaf(sg0);
    g.backward(g.logistic_rate_bits(s, mu, sg));
    CHECK(fd_check(s0, g.grad(s), eval, sample_indices(8, 8, 59)).max_rel_err < 1e-3);
    CHECK(fd_check(mu0, g.grad(mu), eval, sample_indices(8, 8, 60)).max_rel_err < 1e-3);
    CHECK(fd_check(sg0, g.grad(sg), eval, sample_indices(8, 8, 61)).max_rel_err < 1e-3);
  }
}

TEST_CASE("straight-through quantizers pass gradients unchanged") {
  Tensor y0 = random_tensor({5}, 62, -3.0f, 3.0f);
  Graph g;
  Var y = g.leaf(y0);
  Var q = g.quantize_round_ste(y);
  g.backward(g.sum(q));
  for (float v : g.grad(y).data) CHECK(v == doctest::Approx(1.0f));
}

TEST_CASE("identical inputs produce bit-identical outputs across runs") {
  Tensor x = random_tensor({4, 12, 12}, 63);
  Tensor w = random_tensor({6, 4, 3, 3}, 64);
  Tensor a = conv2d_fwd(x, w, Tensor(), ConvGeom::same(1, 1));
  Tensor b = conv2d_fwd(x, w, Tensor(), ConvGeom::same(1, 1));
  CHECK(a.data == b.data);
  Tensor beta = random_tensor({4}, 65, 0.5f, 1.0f);
  Tensor gamma = random_tensor({4, 4}, 66, 0.0f, 0.2f);
  CHECK(gdn_fwd(x, beta, gamma, false).data == gdn_fwd(x, beta, gamma, false).data);
}

TEST_CASE("non-finite values are rejected, never propagated silently") {
  Tensor x = Tensor::full({2, 2}, 1.0f);
  x.data[1] = std::numeric_limits<float>::quiet_NaN();
  Graph g;
  CHECK_THROWS_AS(g.leaf(x), NumericError);
}
