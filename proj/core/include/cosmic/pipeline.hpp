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

#pragma once

#include "cosmic/flops.hpp"
#include "cosmic/metrics.hpp"
#include "cosmic/model.hpp"

namespace cosmic {

// Deterministic mirror padding on the bottom/right edges up to a multiple of
// `multiple`; the decoder re-derives the padded extent from the header dims.
Tensor reflect_pad_to_multiple(const Tensor& image, int multiple);
Tensor crop_to(const Tensor& image, int height, int width);

struct CompressResult {
  Bitstream stream;
  double bpp = 0.0;
  double estimated_bits = 0.0;
  FlopsReport onboard_flops;
  LatentCode code;
};

CompressResult compress_image(CodecModel& model, const Tensor& image, const MetadataRecord& meta);

struct DecompressOptions {
  int steps = 25;
  uint64_t seed = 0;
  bool no_compensation = false;  // substitute z0' = 0 (compensation ablation)
  bool no_metadata = false;      // condition on the neutral record instead
};

Tensor decompress_image(CodecModel& model, const Bitstream& bs, const DecompressOptions& opts);

// Decode just the latent code (entropy layer only), for round-trip checks.
LatentCode decode_latents(CodecModel& model, const Bitstream& bs);

// ---------------------------------------------------------------------------
// tiling

struct TileLayout {
  int rows = 0;
  int cols = 0;
  int tile_size = 256;
  int src_height = 0;  // original image dims
  int src_width = 0;
  int crop_y = 0;      // top-left corner of the centered crop
  int crop_x = 0;

  int cropped_height() const { return rows * tile_size; }
  int cropped_width() const { return cols * tile_size; }
};

// Center-crop to the largest tile multiple, then partition exactly.
std::pair<std::vector<Tensor>, TileLayout> split_tiles(const Tensor& image, int tile_size = 256);
// Exact inverse of split_tiles on the cropped region.
Tensor stitch_tiles(const std::vector<Tensor>& tiles, const TileLayout& layout);

TiledBitstream compress_tiled(CodecModel& model, const Tensor& image, const MetadataRecord& meta,
                              int tile_size = 256);
Tensor decompress_tiled(CodecModel& model, const TiledBitstream& bs, const DecompressOptions& opts);

}  // namespace cosmic
