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

#include "cosmic/range_coder.hpp"

#include "cosmic/errors.hpp"

namespace cosmic {

namespace {
constexpr uint32_t kTop = 1u << 24;
}

void RangeEncoder::shift_low() {
  if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    uint8_t b = cache_;
    const uint8_t carry = static_cast<uint8_t>(low_ >> 32);
    do {
      out_.push_back(static_cast<uint8_t>(b + carry));
      b = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFull) << 8;
}

void RangeEncoder::encode(uint32_t cum, uint32_t freq) {
  if (freq == 0 || cum + freq > kFreqTotal) {
    throw NumericError("range encoder: invalid frequency interval");
  }
  range_ >>= kFreqTotalBits;
  low_ += static_cast<uint64_t>(cum) * range_;
  range_ *= freq;
  while (range_ < kTop) {
    range_ <<= 8;
    shift_low();
  }
}

std::vector<uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

RangeDecoder::RangeDecoder(const std::vector<uint8_t>& bytes)
    : p_(bytes.data()), end_(bytes.data() + bytes.size()) {
  next_byte();  // leading carry-resolution byte, always zero
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

uint8_t RangeDecoder::next_byte() {
  if (p_ == end_) throw FormatError("range decoder: truncated payload");
  return *p_++;
}

uint32_t RangeDecoder::peek() {
  range_ >>= kFreqTotalBits;
  uint32_t v = code_ / range_;
  if (v >= kFreqTotal) v = kFreqTotal - 1;  // corrupt stream; keep in bounds
  return v;
}

void RangeDecoder::pop(uint32_t cum, uint32_t freq) {
  code_ -= cum * range_;
  range_ *= freq;
  while (range_ < kTop) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

}  // namespace cosmic
