#include <array>
#include <cmath>
#include <vector>

#include "cosmic/bitstream.hpp"
#include "cosmic/errors.hpp"
#include "cosmic/flops.hpp"
#include "cosmic/metrics.hpp"
#include "doctest.h"
#include "oracle_msssim.hpp"
#include "test_util.hpp"

using namespace cosmic;
using cosmic::testutil::random_tensor;

TEST_CASE("psnr of identical images is the +infinity sentinel") {
  Tensor x = random_tensor({3, 8, 8}, 160);
  CHECK(std::isinf(psnr(x, x, 255.0)));
}

TEST_CASE("psnr closed form: unit difference at peak 255 is 48.1308 dB") {
  Tensor x = Tensor::full({3, 16, 16}, 100.0f);
  Tensor y = Tensor::full({3, 16, 16}, 101.0f);
  CHECK(psnr(x, y, 255.0) == doctest::Approx(48.1308).epsilon(1e-3 / 48.0));
  CHECK(psnr(x, y, 255.0) == doctest::Approx(10.0 * std::log10(255.0 * 255.0)).epsilon(1e-9));
}

TEST_CASE("psnr is symmetric and rejects shape mismatches") {
  Tensor x = random_tensor({3, 8, 8}, 161);
  Tensor y = random_tensor({3, 8, 8}, 162);
  CHECK(psnr(x, y, 1.0) == psnr(y, x, 1.0));
  CHECK_THROWS_AS(psnr(x, random_tensor({3, 8, 9}, 163), 1.0), MismatchError);
}

TEST_CASE("ms_ssim of an image with itself is exactly 1") {
  Tensor x = cosmic::testutil::textured_image(64, 164);
  CHECK(ms_ssim(x, x, 1.0) == 1.0);
}

TEST_CASE("ms_ssim drops far below 0.5 for an inverted textured image") {
  Tensor x = cosmic::testutil::textured_image(96, 165);
  Tensor inv(x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) inv.data[i] = 1.0f - x.data[i];
  CHECK(ms_ssim(x, inv, 1.0) < 0.2);
}

TEST_CASE("ms_ssim is non-increasing as white noise grows (statistical)") {
  Tensor x = cosmic::testutil::textured_image(96, 166);
  double prev = 1.0;
  for (int level = 1; level <= 5; ++level) {
    Tensor noisy = x;
    Rng rng(200 + static_cast<uint64_t>(level));
    for (float& v : noisy.data) {
      v = std::min(std::max(v + static_cast<float>(0.03 * level * rng.normal()), 0.0f), 1.0f);
    }
    const double score = ms_ssim(x, noisy, 1.0);
    CHECK(score <= prev + 1e-6);
    prev = score;
  }
}

TEST_CASE("ms_ssim matches the independent oracle within 1e-4 on random pairs") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Tensor x = cosmic::testutil::textured_image(48, 300 + seed);
    Tensor y = x;
    Rng rng(400 + seed);
    for (float& v : y.data) {
      v = std::min(std::max(v + static_cast<float>(0.05 * rng.normal()), 0.0f), 1.0f);
    }
    const int scales = 2;  // 48px supports 2 scales (24px >= 11)
    const double mine = ms_ssim(x, y, 1.0, scales);
    const double ref = cosmic::testutil::oracle_ms_ssim(x, y, 1.0, scales);
    CHECK(mine == doctest::Approx(ref).epsilon(1e-4));
  }
}

TEST_CASE("ms_ssim five-scale configuration matches the oracle at full size") {
  Tensor x = cosmic::testutil::textured_image(192, 167);
  Tensor y = x;
  Rng rng(168);
  for (float& v : y.data) {
    v = std::min(std::max(v + static_cast<float>(0.04 * rng.normal()), 0.0f), 1.0f);
  }
  CHECK(ms_ssim(x, y, 1.0) == doctest::Approx(cosmic::testutil::oracle_ms_ssim(x, y, 1.0, 5)).epsilon(1e-4));
}

TEST_CASE("ms_ssim is symmetric in its arguments") {
  Tensor x = cosmic::testutil::textured_image(64, 270);
  Tensor y = cosmic::testutil::textured_image(64, 271);
  CHECK(ms_ssim(x, y, 1.0) == ms_ssim(y, x, 1.0));
}

TEST_CASE("ms_ssim rejects five scales forced onto too-small images") {
  Tensor x = cosmic::testutil::textured_image(64, 169);
  CHECK_THROWS_AS(ms_ssim(x, x, 1.0, 5), MismatchError);
  CHECK_NOTHROW(ms_ssim(x, x, 1.0));  // auto-reduced scale count
}

TEST_CASE("bpp arithmetic: 4915 payload bytes over 256x256 is 0.6") {
  CHECK(bpp(0, 4915, 256, 256) == doctest::Approx(0.5999755859375).epsilon(1e-9));
  CHECK(bpp(0, 0, 256, 256) == 0.0);
}

TEST_CASE("bpp counts exactly the payload bytes of the container layout") {
  Bitstream bs;
  bs.width = 64;
  bs.height = 32;
  bs.lambda_index = 1;
  bs.metadata.assign(8, 0.0);
  bs.hyper_payload = {1, 2, 3};
  bs.main_payload = {4, 5, 6, 7};
  const auto bytes = write_bitstream(bs);
  // header+metadata excluded: only 7 payload bytes count
  CHECK(bpp(bs.hyper_payload.size(), bs.main_payload.size(), 64, 32) ==
        doctest::Approx(8.0 * 7 / (64.0 * 32.0)));
  CHECK(bytes.size() == 87 + 7);
}

TEST_CASE("flops: dense 3->192 5x5 stride-2 conv on 256x256") {
  CHECK(conv_macs(192, 128, 128, 3, 5, 5) == 235929600);
}

TEST_CASE("flops: depthwise 5x5 on 192x128x128 counts one filter per channel") {
  CHECK(conv_macs(192, 128, 128, 192, 5, 5, 192) == static_cast<int64_t>(192) * 128 * 128 * 25);
}

TEST_CASE("flops: lightweight-vs-reference ratio meets the 2.5x bar") {
  CodecConfig cfg;
  const FlopsReport light = flops_onboard(cfg, 256, 256);
  const FlopsReport ref = flops_reference_dense(256, 256);
  const double ratio = static_cast<double>(ref.total_macs()) / static_cast<double>(light.total_macs());
  CHECK(ratio >= 2.5);
  CHECK(ratio <= 5.5);  // consistent with the reported 2.6-5x reduction range
}

TEST_CASE("flops: on-satellite total sits in the documented band") {
  CodecConfig cfg;
  const FlopsReport light = flops_onboard(cfg, 256, 256);
  const double gflops = light.total_gflops();
  CHECK(gflops >= 4.9 * 0.6);
  CHECK(gflops <= 4.9 * 1.4);
}

TEST_CASE("flops: doubling the input area doubles every per-layer count") {
  CodecConfig cfg;
  const FlopsReport a = flops_onboard(cfg, 256, 256);
  const FlopsReport b = flops_onboard(cfg, 256, 512);
  REQUIRE(a.entries.size() == b.entries.size());
  for (size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(b.entries[i].macs == 2 * a.entries[i].macs);
  }
}

TEST_CASE("flops report totals are additive over layers and components") {
  CodecConfig cfg;
  const FlopsReport r = flops_onboard(cfg, 256, 256);
  int64_t manual = 0;
  for (const auto& e : r.entries) manual += e.macs;
  CHECK(r.total_macs() == manual);
  CHECK(r.component_macs("encoder") + r.component_macs("hyper") == manual);
  CHECK(r.total_flops() == 2 * manual);
}
