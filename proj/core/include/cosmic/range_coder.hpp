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
#include <vector>

namespace cosmic {

// Byte-oriented renormalizing range coder: 64-bit low, 32-bit range, carries
// resolved through a cache of pending 0xFF bytes. Frequencies are quantized
// to a fixed 16-bit total. Streams are sequential per coder instance;
// independent streams (tiles) may run in parallel.
inline constexpr uint32_t kFreqTotalBits = 16;
inline constexpr uint32_t kFreqTotal = 1u << kFreqTotalBits;

class RangeEncoder {
 public:
  // Encodes one symbol occupying [cum, cum+freq) of a total-kFreqTotal scale.
  void encode(uint32_t cum, uint32_t freq);
  // Flushes the state; the returned buffer is the complete payload.
  std::vector<uint8_t> finish();

  size_t byte_count() const { return out_.size(); }

 private:
  void shift_low();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t cache_size_ = 1;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  // The payload must stay alive for the lifetime of the decoder.
  explicit RangeDecoder(const std::vector<uint8_t>& bytes);

  // Returns the cumulative-scale value of the next symbol; the caller looks
  // up its bin and confirms with pop(cum, freq).
  uint32_t peek();
  void pop(uint32_t cum, uint32_t freq);

 private:
  uint8_t next_byte();

  const uint8_t* p_;
  const uint8_t* end_;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t code_ = 0;
};

}  // namespace cosmic
