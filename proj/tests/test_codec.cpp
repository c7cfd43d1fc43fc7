#include <cmath>

#include "cosmic/codec.hpp"
#include "cosmic/errors.hpp"
#include "cosmic/flops.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cosmic;
using cosmic::testutil::random_tensor;

namespace {

CodecConfig tiny_config() {
  CodecConfig cfg;
  cfg.latent_channels = 8;
  cfg.hyper_channels = 4;
  cfg.z_channels = 4;
  cfg.enc_stages = 2;
  cfg.cam_after_stage = 1;
  cfg.dec_width = 8;
  cfg.comp_width = 8;
  return cfg;
}

}  // namespace

TEST_CASE("lcb identity wiring reproduces selected channels twice") {
  CodecConfig cfg;
  Rng rng(100);
  const int c = 4;
  LcbBlock b = LcbBlock::make(c, c, 1, cfg, rng);
  // depthwise identity
  b.depthwise.w.fill(0.0f);
  for (int i = 0; i < c; ++i) b.depthwise.w.data[static_cast<size_t>(i) * 25 + 12] = 1.0f;
  b.depthwise.b.fill(0.0f);
  // pointwise selects the first half of the channels
  b.pointwise.w.fill(0.0f);
  for (int i = 0; i < c / 2; ++i) b.pointwise.w.data[static_cast<size_t>(i) * c + i] = 1.0f;
  b.pointwise.b.fill(0.0f);
  // cheap transforms are identities too
  b.cheap.w.fill(0.0f);
  for (int i = 0; i < c / 2; ++i) b.cheap.w.data[static_cast<size_t>(i) * 9 + 4] = 1.0f;
  b.cheap.b.fill(0.0f);

  Tensor x = random_tensor({c, 6, 6}, 101);
  Graph g;
  Binder bind(g, false);
  Var out = b.forward(bind, g.constant(x));
  const Tensor& o = g.value(out);
  REQUIRE(o.shape == x.shape);
  const size_t plane = 36;
  for (int i = 0; i < c / 2; ++i) {
    for (size_t p = 0; p < plane; ++p) {
      CHECK(o.data[static_cast<size_t>(i) * plane + p] == doctest::Approx(x.data[static_cast<size_t>(i) * plane + p]));
      CHECK(o.data[static_cast<size_t>(i + c / 2) * plane + p] ==
            doctest::Approx(x.data[static_cast<size_t>(i) * plane + p]));
    }
  }
}

TEST_CASE("lcb is at least 2.5x cheaper than a dense 5x5 conv in MACs") {
  CodecConfig cfg;
  FlopsReport lcb;
  lcb.entries.push_back({"dw", "e", conv_macs(192, 128, 128, 192, 5, 5, 192)});
  lcb.entries.push_back({"pw", "e", conv_macs(96, 128, 128, 192, 1, 1)});
  lcb.entries.push_back({"cheap", "e", conv_macs(96, 128, 128, 96, 3, 3, 96)});
  const int64_t dense = conv_macs(192, 128, 128, 192, 5, 5);
  CHECK(static_cast<double>(lcb.total_macs()) < static_cast<double>(dense) / 2.5);
}

TEST_CASE("lcb output keeps shape with stride-scaled extents") {
  CodecConfig cfg;
  Rng rng(102);
  LcbBlock b = LcbBlock::make(6, 6, 2, cfg, rng);
  Graph g;
  Binder bind(g, false);
  Var out = b.forward(bind, g.constant(random_tensor({6, 8, 8}, 103)));
  CHECK(g.value(out).shape == std::vector<int>{6, 4, 4});
}

TEST_CASE("lcb rejects odd output channel counts") {
  CodecConfig cfg;
  Rng rng(104);
  CHECK_THROWS_AS(LcbBlock::make(4, 5, 1, cfg, rng), MismatchError);
}

TEST_CASE("cam with a saturated gate equals its local branch") {
  CodecConfig cfg;
  Rng rng(105);
  CamBlock cam = CamBlock::make(4, cfg, rng);
  // force the gate to 1: zero 1-D kernels, large positive bias on the vert conv
  cam.horiz.w.fill(0.0f);
  cam.horiz.b.fill(0.0f);
  cam.vert.w.fill(0.0f);
  cam.vert.b.fill(40.0f);

  Tensor x = random_tensor({4, 5, 5}, 106);
  Graph g;
  Binder bind(g, false);
  Var cam_out = cam.forward(bind, g.constant(x));
  Var lcb_out = cam.local.forward(bind, g.constant(x));
  CHECK(g.value(cam_out).data == g.value(lcb_out).data);
}

TEST_CASE("cam attention is spatially constant on constant input") {
  CodecConfig cfg;
  Rng rng(107);
  CamBlock cam = CamBlock::make(4, cfg, rng);
  Graph g;
  Binder bind(g, false);
  Var att = cam.attention(bind, g.constant(Tensor::full({4, 7, 7}, 0.4f)));
  const Tensor& a = g.value(att);
  for (int c = 0; c < 4; ++c) {
    const float first = a.at3(c, 3, 3);  // interior reference; borders see padding
    for (int y = 2; y < 5; ++y) {
      for (int x = 2; x < 5; ++x) CHECK(a.at3(c, y, x) == doctest::Approx(first));
    }
  }
}

TEST_CASE("cam attention values lie in (0,1)") {
  CodecConfig cfg;
  Rng rng(108);
  CamBlock cam = CamBlock::make(4, cfg, rng);
  Graph g;
  Binder bind(g, false);
  Var att = cam.attention(bind, g.constant(random_tensor({4, 6, 6}, 109)));
  for (float v : g.value(att).data) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("encoder maps 256x256 to a 192x16x16 latent deterministically") {
  CodecConfig cfg;  // production configuration
  Rng rng(110);
  EncoderNet enc = EncoderNet::make(cfg, rng);
  Tensor img = random_tensor({3, 256, 256}, 111, 0.0f, 1.0f);
  Graph g;
  Binder bind(g, false);
  Var y1 = enc.forward(bind, g.constant(img));
  CHECK(g.value(y1).shape == std::vector<int>{192, 16, 16});
  Graph g2;
  Binder bind2(g2, false);
  Var y2 = enc.forward(bind2, g2.constant(img));
  CHECK(g.value(y1).data == g2.value(y2).data);
}

TEST_CASE("encoder rejects dimensions not divisible by the downsampling factor") {
  CodecConfig cfg = tiny_config();
  Rng rng(112);
  EncoderNet enc = EncoderNet::make(cfg, rng);
  Graph g;
  Binder bind(g, false);
  CHECK_THROWS_AS(enc.forward(bind, g.constant(random_tensor({3, 5, 8}, 113))), MismatchError);
}

TEST_CASE("comp encoder emits 4-channel mean and positive scale at 1/4 resolution") {
  CodecConfig cfg = tiny_config();
  Rng rng(114);
  CompEncoderNet comp = CompEncoderNet::make(cfg, rng);
  Graph g;
  Binder bind(g, false);
  auto [mu, sigma] = comp.forward(bind, g.constant(random_tensor({3, 32, 32}, 115, 0.0f, 1.0f)));
  CHECK(g.value(mu).shape == std::vector<int>{4, 8, 8});
  CHECK(g.value(sigma).shape == std::vector<int>{4, 8, 8});
  for (float v : g.value(sigma).data) CHECK(v > 0.0f);
}

TEST_CASE("reparameterize is the documented affine map") {
  Graph g;
  Tensor mu = random_tensor({4, 3, 3}, 116);
  Tensor sigma = random_tensor({4, 3, 3}, 117, 0.1f, 2.0f);
  SUBCASE("eps = 0 returns the mean") {
    Var z = reparameterize(g, g.constant(mu), g.constant(sigma), g.constant(Tensor::zeros({4, 3, 3})));
    CHECK(g.value(z).data == mu.data);
  }
  SUBCASE("mu = 0, sigma = 1 returns eps") {
    Tensor eps = random_tensor({4, 3, 3}, 118);
    Var z = reparameterize(g, g.constant(Tensor::zeros({4, 3, 3})),
                           g.constant(Tensor::full({4, 3, 3}, 1.0f)), g.constant(eps));
    CHECK(g.value(z).data == eps.data);
  }
}

TEST_CASE("reparameterized sample mean approaches mu (Monte Carlo)") {
  const double mu = 0.7, sigma = 0.4;
  Rng rng(119);
  double acc = 0.0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) acc += mu + sigma * rng.normal();
  const double sample_mean = acc / n;
  CHECK(std::fabs(sample_mean - mu) < 3.0 * sigma / 100.0);  // 3 sigma / sqrt(1e4)
}

TEST_CASE("decoder output returns to image resolution") {
  CodecConfig cfg = tiny_config();
  Rng rng(120);
  DecoderNet dec = DecoderNet::make(cfg, rng);
  Graph g;
  Binder bind(g, false);
  // latent at 1/4 (2 stages), z0 at 1/4
  Var x_hat = dec.forward(bind, g.constant(random_tensor({8, 8, 8}, 121)),
                          g.constant(random_tensor({4, 8, 8}, 122)));
  CHECK(g.value(x_hat).shape == std::vector<int>{3, 32, 32});
}

TEST_CASE("decoder at production scale consumes 196 first-stage channels") {
  CodecConfig cfg;
  CHECK(cfg.latent_channels + cfg.z_channels == 196);
  Rng rng(123);
  DecoderNet dec = DecoderNet::make(cfg, rng);
  CHECK(dec.d1.w.dim(1) == 196);
  SUBCASE("spatially mismatched compensation is rejected") {
    Graph g;
    Binder bind(g, false);
    CHECK_THROWS_AS(dec.forward(bind, g.constant(random_tensor({192, 4, 4}, 124)),
                                g.constant(random_tensor({4, 8, 8}, 125))),
                    MismatchError);
  }
}

TEST_CASE("zero-weight decoder produces a constant bias-only output") {
  CodecConfig cfg = tiny_config();
  Rng rng(126);
  DecoderNet dec = DecoderNet::make(cfg, rng);
  const auto zero = [](const std::string&, Tensor& t) { t.fill(0.0f); };
  dec.visit("dec", zero);
  // restore valid GDN parameters (zero raw values are fine: softplus(0) > 0)
  Graph g;
  Binder bind(g, false);
  Var out = dec.forward(bind, g.constant(random_tensor({8, 4, 4}, 127)),
                        g.constant(random_tensor({4, 4, 4}, 128)));
  const float first = g.value(out).data[0];
  for (float v : g.value(out).data) CHECK(v == first);
}

TEST_CASE("total lightweight encoder MACs stay below 40% of the dense reference") {
  CodecConfig cfg;
  const FlopsReport light = flops_onboard(cfg, 256, 256);
  const FlopsReport ref = flops_reference_dense(256, 256);
  CHECK(static_cast<double>(light.component_macs("encoder")) <=
        0.40 * static_cast<double>(ref.total_macs()));
}
