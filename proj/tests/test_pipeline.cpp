#include <cmath>

#include "cosmic/errors.hpp"
#include "cosmic/pipeline.hpp"
#include "cosmic/training.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cosmic;
using cosmic::testutil::random_tensor;

namespace {

CodecModel pipeline_model(uint64_t seed = 60, int lambda_index = 2) {
  CodecConfig cfg;
  cfg.latent_channels = 8;
  cfg.hyper_channels = 4;
  cfg.z_channels = 4;
  cfg.enc_stages = 2;
  cfg.cam_after_stage = 1;
  cfg.dec_width = 8;
  cfg.comp_width = 8;
  UNetConfig ucfg;
  ucfg.width0 = 8;
  ucfg.width1 = 12;
  ucfg.attn_dim = 8;
  ucfg.cond_dim = 16;
  ucfg.field_dim = 4;
  ucfg.time_dim = 8;
  return CodecModel::make(cfg, ucfg, lambda_index, seed);
}

MetadataRecord sample_meta() {
  MetadataRecord m;
  m.utm_zone = 33;
  m.timestamp = 2.0e6;
  m.gsd = 0.8;
  m.cloud_cover = 0.05;
  m.off_nadir_angle = 18;
  m.target_azimuth = 270;
  m.sun_azimuth = 90;
  m.sun_elevation = 40;
  return m;
}

}  // namespace

TEST_CASE("reflect padding reaches the next multiple and mirrors content") {
  Tensor img = random_tensor({3, 5, 6}, 61);
  Tensor padded = reflect_pad_to_multiple(img, 4);
  CHECK(padded.shape == std::vector<int>{3, 8, 8});
  // first padded row mirrors the row before the edge
  CHECK(padded.at3(0, 5, 0) == img.at3(0, 3, 0));
  CHECK(padded.at3(0, 0, 6) == img.at3(0, 0, 4));
  SUBCASE("already-aligned images pass through") {
    Tensor ok = random_tensor({3, 8, 8}, 62);
    CHECK(reflect_pad_to_multiple(ok, 4).data == ok.data);
  }
}

TEST_CASE("compress -> decompress preserves dimensions and is deterministic") {
  CodecModel model = pipeline_model();
  const Tensor img = make_synthetic_dataset(1, 32, 63).images[0];
  CompressResult a = compress_image(model, img, sample_meta());
  CompressResult b = compress_image(model, img, sample_meta());
  CHECK(write_bitstream(a.stream) == write_bitstream(b.stream));

  DecompressOptions opts;
  opts.steps = 4;
  Tensor ra = decompress_image(model, a.stream, opts);
  CHECK(ra.shape == img.shape);
  Tensor rb = decompress_image(model, b.stream, opts);
  CHECK(ra.data == rb.data);
  for (float v : ra.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("non-divisible dimensions round-trip through deterministic padding") {
  CodecModel model = pipeline_model();
  Tensor img = random_tensor({3, 21, 13}, 64, 0.0f, 1.0f);
  CompressResult r = compress_image(model, img, sample_meta());
  CHECK(r.stream.width == 13);
  CHECK(r.stream.height == 21);
  DecompressOptions opts;
  opts.steps = 2;
  Tensor rec = decompress_image(model, r.stream, opts);
  CHECK(rec.shape == img.shape);
}

TEST_CASE("entropy layer is lossless: decoded latents match encoded ones bit for bit") {
  CodecModel model = pipeline_model();
  for (uint64_t seed = 0; seed < 4; ++seed) {
    Tensor img = make_synthetic_dataset(1, 32, 70 + seed).images[0];
    CompressResult r = compress_image(model, img, sample_meta());
    LatentCode decoded = decode_latents(model, r.stream);
    CHECK(decoded.main.data == r.code.main.data);
    CHECK(decoded.hyper.data == r.code.hyper.data);
  }
}

TEST_CASE("a constant image codes to fewer bits than random noise (trained model)") {
  // entropy ordering holds once the model has adapted to natural structure
  CodecModel model = pipeline_model(76);
  TrainConfig cfg;
  cfg.steps = 150;
  cfg.batch_size = 2;
  cfg.lr = 1e-3;
  cfg.seed = 3;
  const SyntheticDataset data = make_synthetic_dataset(6, 32, 30);
  stage1_train(model, data, cfg);

  Tensor flat = Tensor::full({3, 32, 32}, 0.5f);
  Tensor noise = random_tensor({3, 32, 32}, 76, 0.0f, 1.0f);
  CompressResult rf = compress_image(model, flat, sample_meta());
  CompressResult rn = compress_image(model, noise, sample_meta());
  CHECK(rf.stream.main_payload.size() + rf.stream.hyper_payload.size() <
        rn.stream.main_payload.size() + rn.stream.hyper_payload.size());

  SUBCASE("payload length tracks the rate estimate once symbols fit the model") {
    CompressResult r = compress_image(model, data.images[0], sample_meta());
    const double actual_bits = 8.0 * (r.stream.hyper_payload.size() + r.stream.main_payload.size());
    CHECK(actual_bits >= r.estimated_bits);
    CHECK(actual_bits <= r.estimated_bits * 1.01 + 2.0 * 256.0);  // two payload flushes
  }
}

TEST_CASE("decompression modes: compensation off and metadata off") {
  CodecModel model = pipeline_model();
  const Tensor img = make_synthetic_dataset(1, 32, 77).images[0];
  CompressResult r = compress_image(model, img, sample_meta());

  DecompressOptions with_dc;
  with_dc.steps = 3;
  DecompressOptions no_dc = with_dc;
  no_dc.no_compensation = true;
  Tensor a = decompress_image(model, r.stream, with_dc);
  Tensor b = decompress_image(model, r.stream, no_dc);
  CHECK(a.shape == b.shape);
  CHECK(a.data != b.data);  // the compensation path contributes

  SUBCASE("no-compensation equals decoding with a zero z0") {
    Graph g;
    Binder bind(g, false);
    LatentCode code = decode_latents(model, r.stream);
    Var x_hat = model.dec.forward(bind, g.constant(code.main), g.constant(Tensor({4, 8, 8})));
    Tensor direct = crop_to(clamp01(g.value(x_hat)), 32, 32);
    CHECK(direct.data == b.data);
  }

  SUBCASE("metadata only affects the decode side") {
    DecompressOptions no_meta = with_dc;
    no_meta.no_metadata = true;
    Tensor c = decompress_image(model, r.stream, no_meta);
    CHECK(c.shape == a.shape);
    CHECK(c.data != a.data);  // neutral conditioning differs from true metadata
  }
}

TEST_CASE("lambda mismatch between container and weights is rejected") {
  CodecModel enc_model = pipeline_model(60, 2);
  const Tensor img = make_synthetic_dataset(1, 32, 78).images[0];
  CompressResult r = compress_image(enc_model, img, sample_meta());
  CodecModel dec_model = pipeline_model(60, 1);
  DecompressOptions opts;
  CHECK_THROWS_AS(decompress_image(dec_model, r.stream, opts), MismatchError);
}

TEST_CASE("model save/load round-trips weights and reproduces bitstreams") {
  CodecModel model = pipeline_model(81);
  const Tensor img = make_synthetic_dataset(1, 32, 82).images[0];
  CompressResult before = compress_image(model, img, sample_meta());

  const std::string path = "/tmp/cosmic_test_weights.csmw";
  model.save(path);
  CodecModel loaded = CodecModel::load(path);
  CompressResult after = compress_image(loaded, img, sample_meta());
  CHECK(write_bitstream(before.stream) == write_bitstream(after.stream));
  DecompressOptions opts;
  opts.steps = 2;
  CHECK(decompress_image(model, before.stream, opts).data ==
        decompress_image(loaded, after.stream, opts).data);
}

TEST_CASE("tiling: 2304x2304 yields 81 tiles and stitch is the exact inverse") {
  Tensor img({3, 2304, 2304});
  Rng rng(83);
  for (float& v : img.data) v = static_cast<float>(rng.uniform());
  auto [tiles, layout] = split_tiles(img, 256);
  CHECK(tiles.size() == 81);
  CHECK(layout.rows == 9);
  CHECK(layout.cols == 9);
  Tensor back = stitch_tiles(tiles, layout);
  CHECK(back.shape == img.shape);
  CHECK(back.data == img.data);
}

TEST_CASE("tiling: 2306x2306 center-crops to 2304 then produces 81 tiles") {
  Tensor img({1, 2306, 2306});
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<float>(i % 251) / 251.0f;
  auto [tiles, layout] = split_tiles(img, 256);
  CHECK(tiles.size() == 81);
  CHECK(layout.crop_y == 1);
  CHECK(layout.crop_x == 1);
  Tensor back = stitch_tiles(tiles, layout);
  // stitched equals the centered crop of the source
  for (int y = 0; y < layout.cropped_height(); y += 97) {
    for (int x = 0; x < layout.cropped_width(); x += 89) {
      CHECK(back.at3(0, y, x) == img.at3(0, y + 1, x + 1));
    }
  }
}

TEST_CASE("tiling: a single-tile image is its own tiling") {
  Tensor img = random_tensor({3, 256, 256}, 84);
  auto [tiles, layout] = split_tiles(img, 256);
  REQUIRE(tiles.size() == 1);
  CHECK(tiles[0].data == img.data);
  CHECK(stitch_tiles(tiles, layout).data == img.data);
}

TEST_CASE("tiling: images smaller than one tile are rejected") {
  Tensor img = random_tensor({3, 100, 300}, 85);
  CHECK_THROWS_AS(split_tiles(img, 256), MismatchError);
}

TEST_CASE("tiled compression round-trips through the multi-tile container") {
  CodecModel model = pipeline_model(86);
  Tensor img = make_synthetic_dataset(1, 64, 87).images[0];  // 2x2 tiles of 32
  TiledBitstream bs = compress_tiled(model, img, sample_meta(), 32);
  CHECK(bs.rows == 2);
  CHECK(bs.cols == 2);
  const auto bytes = write_tiled_bitstream(bs);
  const TiledBitstream parsed = read_tiled_bitstream(bytes);
  DecompressOptions opts;
  opts.steps = 2;
  Tensor rec = decompress_tiled(model, parsed, opts);
  CHECK(rec.shape == img.shape);
  SUBCASE("tile-mode equals whole-image mode when the image is one tile") {
    auto [tiles, layout] = split_tiles(img, 64);
    REQUIRE(tiles.size() == 1);
    TiledBitstream one = compress_tiled(model, img, sample_meta(), 64);
    Tensor rec_tile = decompress_tiled(model, one, opts);
    CompressResult whole = compress_image(model, img, sample_meta());
    Tensor rec_whole = decompress_image(model, whole.stream, opts);
    CHECK(rec_tile.data == rec_whole.data);
  }
}
