// Copyright 2026 the cosmic authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cosmic/pipeline.hpp"

#include <cmath>

#include "cosmic/errors.hpp"

namespace cosmic {

namespace {

int mirror_index(int i, int n) {
  // symmetric reflection without edge duplication, valid for any pad size
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

int round_up(int v, int multiple) { return (v + multiple - 1) / multiple * multiple; }

}  // namespace

Tensor reflect_pad_to_multiple(const Tensor& image, int multiple) {
  if (image.rank() != 3) throw MismatchError("reflect_pad: need [C,H,W], got " + shape_str(image.shape));
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const int ph = round_up(h, multiple), pw = round_up(w, multiple);
  if (ph == h && pw == w) return image;
  Tensor out({c, ph, pw});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < ph; ++y) {
      const int sy = mirror_index(y, h);
      for (int x = 0; x < pw; ++x) {
        out.at3(ch, y, x) = image.at3(ch, sy, mirror_index(x, w));
      }
    }
  }
  return out;
}

Tensor crop_to(const Tensor& image, int height, int width) {
  const int c = image.dim(0);
  if (height > image.dim(1) || width > image.dim(2)) {
    throw MismatchError("crop_to: target exceeds source " + shape_str(image.shape));
  }
  Tensor out({c, height, width});
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) out.at3(ch, y, x) = image.at3(ch, y, x);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// compress / decompress

CompressResult compress_image(CodecModel& model, const Tensor& image, const MetadataRecord& meta) {
  if (image.rank() != 3 || image.dim(0) != model.cfg.image_channels) {
    throw MismatchError("compress: bad image " + shape_str(image.shape));
  }
  const int orig_h = image.dim(1), orig_w = image.dim(2);
  const Tensor padded = reflect_pad_to_multiple(image, model.cfg.downsample_factor());

  Graph g;
  Binder bind(g, /*trainable=*/false);
  Var x = g.constant(padded);
  Var y = model.enc.forward(bind, x);
  const Tensor y_hat = quantize(g.value(y), QuantizeMode::kRound);
  Var zeta = model.hyper_enc.forward(bind, y);
  const Tensor zeta_hat = quantize(g.value(zeta), QuantizeMode::kRound);
  auto [mu, sigma] = model.hyper_dec.forward(bind, g.constant(zeta_hat),
                                             y_hat.dim(1), y_hat.dim(2));

  GaussianModel gm{g.value(mu), g.value(sigma)};
  LatentCode code{y_hat, zeta_hat};

  CompressResult res;
  res.stream.version = kBitstreamVersion;
  res.stream.width = static_cast<uint32_t>(orig_w);
  res.stream.height = static_cast<uint32_t>(orig_h);
  res.stream.lambda_index = static_cast<uint8_t>(model.lambda_index);
  const auto meta_vals = meta.values();
  res.stream.metadata.assign(meta_vals.begin(), meta_vals.end());
  res.stream.hyper_payload = range_encode(tensor_to_symbols(zeta_hat),
                                          prior_dists(model.prior, zeta_hat.shape));
  res.stream.main_payload = range_encode(tensor_to_symbols(y_hat), gaussian_dists(gm));
  res.bpp = bpp(res.stream.hyper_payload.size(), res.stream.main_payload.size(), orig_w, orig_h);
  res.estimated_bits = rate_estimate(code, gm, model.prior);
  res.onboard_flops = flops_onboard(model.cfg, padded.dim(1), padded.dim(2));
  res.code = std::move(code);
  return res;
}

namespace {

struct DecodedLatents {
  Tensor y_hat;
  Tensor zeta_hat;
};

DecodedLatents decode_payloads(CodecModel& model, const Bitstream& bs) {
  const int f = model.cfg.downsample_factor();
  const int ph = round_up(static_cast<int>(bs.height), f);
  const int pw = round_up(static_cast<int>(bs.width), f);
  const int lh = ph / f, lw = pw / f;
  const std::vector<int> zeta_shape{model.cfg.hyper_channels, hyper_extent(lh), hyper_extent(lw)};
  const std::vector<int> y_shape{model.cfg.latent_channels, lh, lw};

  const auto zeta_syms = range_decode(bs.hyper_payload, prior_dists(model.prior, zeta_shape));
  Tensor zeta_hat = symbols_to_tensor(zeta_syms, zeta_shape);

  Graph g;
  Binder bind(g, /*trainable=*/false);
  auto [mu, sigma] = model.hyper_dec.forward(bind, g.constant(zeta_hat), lh, lw);
  GaussianModel gm{g.value(mu), g.value(sigma)};
  const auto y_syms = range_decode(bs.main_payload, gaussian_dists(gm));
  Tensor y_hat = symbols_to_tensor(y_syms, y_shape);
  return DecodedLatents{std::move(y_hat), std::move(zeta_hat)};
}

}  // namespace

LatentCode decode_latents(CodecModel& model, const Bitstream& bs) {
  DecodedLatents d = decode_payloads(model, bs);
  return LatentCode{std::move(d.y_hat), std::move(d.zeta_hat)};
}

Tensor decompress_image(CodecModel& model, const Bitstream& bs, const DecompressOptions& opts) {
  if (static_cast<int>(bs.lambda_index) != model.lambda_index) {
    throw MismatchError("decompress: container lambda index " + std::to_string(bs.lambda_index) +
                        " does not match loaded weights (" + std::to_string(model.lambda_index) + ")");
  }
  DecodedLatents d = decode_payloads(model, bs);

  const int f = model.cfg.downsample_factor();
  const int ph = round_up(static_cast<int>(bs.height), f);
  const int pw = round_up(static_cast<int>(bs.width), f);
  const std::vector<int> z_shape{model.cfg.z_channels, ph / 4, pw / 4};

  Tensor z0;
  if (opts.no_compensation) {
    z0 = Tensor(z_shape);
  } else {
    MetadataRecord meta = model.norm.neutral_record();
    if (!opts.no_metadata) {
      if (bs.metadata.size() != kMetadataFields) {
        throw FormatError("decompress: expected " + std::to_string(kMetadataFields) +
                          " metadata fields, found " + std::to_string(bs.metadata.size()));
      }
      for (int i = 0; i < kMetadataFields; ++i) meta.set(i, bs.metadata[static_cast<size_t>(i)]);
      meta.provided.fill(true);
    }
    Graph cg;
    Binder cbind(cg, /*trainable=*/false);
    Var cond = model.meta_enc.forward(cbind, meta, model.norm);
    z0 = generate_compensation(model.unet, model.schedule, d.y_hat, cg.value(cond), z_shape,
                               opts.steps, opts.seed);
  }

  Graph g;
  Binder bind(g, /*trainable=*/false);
  Var x_hat = model.dec.forward(bind, g.constant(d.y_hat), g.constant(z0));
  Tensor out = clamp01(g.value(x_hat));
  return crop_to(out, static_cast<int>(bs.height), static_cast<int>(bs.width));
}

// ---------------------------------------------------------------------------
// tiling

std::pair<std::vector<Tensor>, TileLayout> split_tiles(const Tensor& image, int tile_size) {
  if (image.rank() != 3) throw MismatchError("split_tiles: need [C,H,W]");
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h < tile_size || w < tile_size) {
    throw MismatchError("split_tiles: image " + shape_str(image.shape) + " smaller than one " +
                        std::to_string(tile_size) + "px tile");
  }
  TileLayout layout;
  layout.tile_size = tile_size;
  layout.src_height = h;
  layout.src_width = w;
  layout.rows = h / tile_size;
  layout.cols = w / tile_size;
  layout.crop_y = (h - layout.rows * tile_size) / 2;
  layout.crop_x = (w - layout.cols * tile_size) / 2;

  std::vector<Tensor> tiles;
  tiles.reserve(static_cast<size_t>(layout.rows) * layout.cols);
  for (int r = 0; r < layout.rows; ++r) {
    for (int col = 0; col < layout.cols; ++col) {
      Tensor tile({c, tile_size, tile_size});
      for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < tile_size; ++y) {
          for (int x = 0; x < tile_size; ++x) {
            tile.at3(ch, y, x) =
                image.at3(ch, layout.crop_y + r * tile_size + y, layout.crop_x + col * tile_size + x);
          }
        }
      }
      tiles.push_back(std::move(tile));
    }
  }
  return {std::move(tiles), layout};
}

Tensor stitch_tiles(const std::vector<Tensor>& tiles, const TileLayout& layout) {
  if (tiles.size() != static_cast<size_t>(layout.rows) * layout.cols || tiles.empty()) {
    throw MismatchError("stitch_tiles: tile count does not match layout");
  }
  const int c = tiles[0].dim(0), ts = layout.tile_size;
  Tensor out({c, layout.cropped_height(), layout.cropped_width()});
  for (int r = 0; r < layout.rows; ++r) {
    for (int col = 0; col < layout.cols; ++col) {
      const Tensor& tile = tiles[static_cast<size_t>(r) * layout.cols + col];
      if (tile.dim(1) != ts || tile.dim(2) != ts) throw MismatchError("stitch_tiles: bad tile shape");
      for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < ts; ++y) {
          for (int x = 0; x < ts; ++x) {
            out.at3(ch, r * ts + y, col * ts + x) = tile.at3(ch, y, x);
          }
        }
      }
    }
  }
  return out;
}

TiledBitstream compress_tiled(CodecModel& model, const Tensor& image, const MetadataRecord& meta,
                              int tile_size) {
  auto [tiles, layout] = split_tiles(image, tile_size);
  TiledBitstream bs;
  bs.version = kBitstreamVersion;
  bs.width = static_cast<uint32_t>(layout.cropped_width());
  bs.height = static_cast<uint32_t>(layout.cropped_height());
  bs.tile_size = static_cast<uint32_t>(tile_size);
  bs.rows = static_cast<uint16_t>(layout.rows);
  bs.cols = static_cast<uint16_t>(layout.cols);
  bs.lambda_index = static_cast<uint8_t>(model.lambda_index);
  const auto meta_vals = meta.values();
  bs.metadata.assign(meta_vals.begin(), meta_vals.end());
  for (const Tensor& tile : tiles) {
    CompressResult r = compress_image(model, tile, meta);
    bs.tiles.emplace_back(std::move(r.stream.hyper_payload), std::move(r.stream.main_payload));
  }
  return bs;
}

Tensor decompress_tiled(CodecModel& model, const TiledBitstream& bs, const DecompressOptions& opts) {
  TileLayout layout;
  layout.rows = bs.rows;
  layout.cols = bs.cols;
  layout.tile_size = static_cast<int>(bs.tile_size);
  layout.src_height = static_cast<int>(bs.height);
  layout.src_width = static_cast<int>(bs.width);
  std::vector<Tensor> tiles;
  tiles.reserve(bs.tiles.size());
  for (size_t i = 0; i < bs.tiles.size(); ++i) {
    Bitstream one;
    one.version = bs.version;
    one.width = bs.tile_size;
    one.height = bs.tile_size;
    one.lambda_index = bs.lambda_index;
    one.metadata = bs.metadata;
    one.hyper_payload = bs.tiles[i].first;
    one.main_payload = bs.tiles[i].second;
    DecompressOptions tile_opts = opts;
    tile_opts.seed = opts.seed + i;  // independent generation per tile
    tiles.push_back(decompress_image(model, one, tile_opts));
  }
  return stitch_tiles(tiles, layout);
}

}  // namespace cosmic
