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

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cosmic/diffusion.hpp"
#include "cosmic/tensor.hpp"

namespace cosmic {

// Compressed-image container, all multi-byte integers little-endian:
//   magic "CSMC" | version u8 | width u32 | height u32 | lambda_index u8 |
//   metadata count u8 | count x f64 | hyper len u32 + bytes |
//   main len u32 + bytes
// Trailing bytes after the main payload are rejected.
struct Bitstream {
  uint8_t version = 1;
  uint32_t width = 0;
  uint32_t height = 0;
  uint8_t lambda_index = 0;
  std::vector<double> metadata;  // fixed field order (MetadataRecord)
  std::vector<uint8_t> hyper_payload;
  std::vector<uint8_t> main_payload;
};

inline constexpr uint8_t kBitstreamVersion = 1;

std::vector<uint8_t> write_bitstream(const Bitstream& bs);
Bitstream read_bitstream(const std::vector<uint8_t>& bytes);

// Multi-tile container for the tiling pipeline: shared header and metadata,
// then per-tile payload pairs in row-major order.
//   magic "CSMT" | version u8 | full width u32 | full height u32 |
//   tile size u32 | rows u16 | cols u16 | lambda_index u8 |
//   metadata count u8 | count x f64 | rows*cols x (hyper u32+bytes, main u32+bytes)
struct TiledBitstream {
  uint8_t version = 1;
  uint32_t width = 0;   // stitched dimensions
  uint32_t height = 0;
  uint32_t tile_size = 256;
  uint16_t rows = 0;
  uint16_t cols = 0;
  uint8_t lambda_index = 0;
  std::vector<double> metadata;
  std::vector<std::pair<std::vector<uint8_t>, std::vector<uint8_t>>> tiles;  // (hyper, main)
};

std::vector<uint8_t> write_tiled_bitstream(const TiledBitstream& bs);
TiledBitstream read_tiled_bitstream(const std::vector<uint8_t>& bytes);

// Weights file:
//   magic "CSMW" | version u8 | tensor count u32 |
//   per tensor: name len u16 + bytes | rank u8 | extents u32 each | f32 data
// load(save(w)) is bitwise identity.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::vector<uint8_t> write_weights(const NamedTensors& tensors);
NamedTensors read_weights(const std::vector<uint8_t>& bytes);

// Binary 8-bit PPM ("P6", maxval 255). Values scale to [0,1] on read.
Tensor read_ppm(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> write_ppm(const Tensor& image);

// Key/value sidecar ("field: value" lines, '#' comments). Missing fields get
// the per-field neutral value and are flagged as not provided.
MetadataRecord parse_metadata(const std::string& text, const MetadataNormalization& norm);

// Filesystem helpers (IoError on failure).
std::vector<uint8_t> load_file(const std::string& path);
void save_file(const std::string& path, const std::vector<uint8_t>& bytes);
std::string load_text_file(const std::string& path);

}  // namespace cosmic
