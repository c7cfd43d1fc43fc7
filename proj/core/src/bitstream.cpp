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

#include "cosmic/bitstream.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cosmic/errors.hpp"

namespace cosmic {

namespace {

class ByteWriter {
 public:
  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v) {
    out_.push_back(static_cast<uint8_t>(v));
    out_.push_back(static_cast<uint8_t>(v >> 8));
  }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
  void f64(double v) {
    const uint64_t bits = std::bit_cast<uint64_t>(v);
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<uint8_t>(bits >> (8 * i)));
  }
  void bytes(const std::vector<uint8_t>& v) { out_.insert(out_.end(), v.begin(), v.end()); }
  void str(const std::string& s) { out_.insert(out_.end(), s.begin(), s.end()); }
  std::vector<uint8_t> take() { return std::move(out_); }

 private:
  std::vector<uint8_t> out_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<uint8_t>& bytes) : p_(bytes.data()), end_(p_ + bytes.size()) {}

  uint8_t u8() { return *need(1); }
  uint16_t u16() {
    const uint8_t* p = need(2);
    return static_cast<uint16_t>(p[0] | (p[1] << 8));
  }
  uint32_t u32() {
    const uint8_t* p = need(4);
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() {
    const uint8_t* p = need(8);
    uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
    return std::bit_cast<double>(bits);
  }
  std::vector<uint8_t> bytes(size_t n) {
    const uint8_t* p = need(n);
    return std::vector<uint8_t>(p, p + n);
  }
  std::string str(size_t n) {
    const uint8_t* p = need(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  bool at_end() const { return p_ == end_; }
  size_t remaining() const { return static_cast<size_t>(end_ - p_); }

 private:
  const uint8_t* need(size_t n) {
    if (remaining() < n) throw FormatError("container truncated");
    const uint8_t* p = p_;
    p_ += n;
    return p;
  }
  const uint8_t* p_;
  const uint8_t* end_;
};

void expect_magic(ByteReader& r, const char* magic) {
  const std::string got = r.str(4);
  if (got != magic) throw FormatError(std::string("bad magic '") + got + "', expected '" + magic + "'");
}

void reject_trailing(const ByteReader& r) {
  if (!r.at_end()) throw FormatError("trailing bytes after container end");
}

std::vector<uint8_t> read_payload(ByteReader& r) {
  const uint32_t len = r.u32();
  if (len > r.remaining()) throw FormatError("payload length exceeds container");
  return r.bytes(len);
}

}  // namespace

// ---------------------------------------------------------------------------
// image container

std::vector<uint8_t> write_bitstream(const Bitstream& bs) {
  if (bs.metadata.size() > 255) throw FormatError("too many metadata fields");
  ByteWriter w;
  w.str("CSMC");
  w.u8(bs.version);
  w.u32(bs.width);
  w.u32(bs.height);
  w.u8(bs.lambda_index);
  w.u8(static_cast<uint8_t>(bs.metadata.size()));
  for (double v : bs.metadata) w.f64(v);
  w.u32(static_cast<uint32_t>(bs.hyper_payload.size()));
  w.bytes(bs.hyper_payload);
  w.u32(static_cast<uint32_t>(bs.main_payload.size()));
  w.bytes(bs.main_payload);
  return w.take();
}

Bitstream read_bitstream(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes);
  expect_magic(r, "CSMC");
  Bitstream bs;
  bs.version = r.u8();
  if (bs.version != kBitstreamVersion) {
    throw FormatError("unknown container version " + std::to_string(bs.version));
  }
  bs.width = r.u32();
  bs.height = r.u32();
  if (bs.width == 0 || bs.height == 0) throw FormatError("zero image dimensions");
  bs.lambda_index = r.u8();
  const uint8_t meta_count = r.u8();
  bs.metadata.resize(meta_count);
  for (uint8_t i = 0; i < meta_count; ++i) bs.metadata[i] = r.f64();
  bs.hyper_payload = read_payload(r);
  bs.main_payload = read_payload(r);
  reject_trailing(r);
  return bs;
}

std::vector<uint8_t> write_tiled_bitstream(const TiledBitstream& bs) {
  if (static_cast<size_t>(bs.rows) * bs.cols != bs.tiles.size()) {
    throw FormatError("tile grid does not match payload count");
  }
  ByteWriter w;
  w.str("CSMT");
  w.u8(bs.version);
  w.u32(bs.width);
  w.u32(bs.height);
  w.u32(bs.tile_size);
  w.u16(bs.rows);
  w.u16(bs.cols);
  w.u8(bs.lambda_index);
  w.u8(static_cast<uint8_t>(bs.metadata.size()));
  for (double v : bs.metadata) w.f64(v);
  for (const auto& [hyper, main] : bs.tiles) {
    w.u32(static_cast<uint32_t>(hyper.size()));
    w.bytes(hyper);
    w.u32(static_cast<uint32_t>(main.size()));
    w.bytes(main);
  }
  return w.take();
}

TiledBitstream read_tiled_bitstream(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes);
  expect_magic(r, "CSMT");
  TiledBitstream bs;
  bs.version = r.u8();
  if (bs.version != kBitstreamVersion) {
    throw FormatError("unknown tiled container version " + std::to_string(bs.version));
  }
  bs.width = r.u32();
  bs.height = r.u32();
  bs.tile_size = r.u32();
  bs.rows = r.u16();
  bs.cols = r.u16();
  bs.lambda_index = r.u8();
  const uint8_t meta_count = r.u8();
  bs.metadata.resize(meta_count);
  for (uint8_t i = 0; i < meta_count; ++i) bs.metadata[i] = r.f64();
  const size_t n_tiles = static_cast<size_t>(bs.rows) * bs.cols;
  if (bs.tile_size == 0 || n_tiles == 0) throw FormatError("empty tile grid");
  bs.tiles.reserve(n_tiles);
  for (size_t i = 0; i < n_tiles; ++i) {
    auto hyper = read_payload(r);
    auto main = read_payload(r);
    bs.tiles.emplace_back(std::move(hyper), std::move(main));
  }
  reject_trailing(r);
  return bs;
}

// ---------------------------------------------------------------------------
// weights

std::vector<uint8_t> write_weights(const NamedTensors& tensors) {
  ByteWriter w;
  w.str("CSMW");
  w.u8(1);
  w.u32(static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 65535) throw FormatError("tensor name too long");
    w.u16(static_cast<uint16_t>(name.size()));
    w.str(name);
    w.u8(static_cast<uint8_t>(t.rank()));
    for (int e : t.shape) w.u32(static_cast<uint32_t>(e));
    for (float v : t.data) w.f32(v);
  }
  return w.take();
}

NamedTensors read_weights(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes);
  expect_magic(r, "CSMW");
  const uint8_t version = r.u8();
  if (version != 1) throw FormatError("unknown weights version " + std::to_string(version));
  const uint32_t count = r.u32();
  NamedTensors out;
  out.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t name_len = r.u16();
    std::string name = r.str(name_len);
    const uint8_t rank = r.u8();
    std::vector<int> shape(rank);
    int64_t numel = 1;
    for (uint8_t d = 0; d < rank; ++d) {
      const uint32_t e = r.u32();
      if (e == 0 || e > (1u << 28)) throw FormatError("bad tensor extent");
      shape[d] = static_cast<int>(e);
      numel *= e;
    }
    if (static_cast<size_t>(numel) * 4 > r.remaining()) throw FormatError("weights truncated");
    Tensor t;
    t.shape = std::move(shape);
    t.data.resize(static_cast<size_t>(numel));
    for (int64_t j = 0; j < numel; ++j) t.data[static_cast<size_t>(j)] = r.f32();
    out.emplace_back(std::move(name), std::move(t));
  }
  reject_trailing(r);
  return out;
}

// ---------------------------------------------------------------------------
// PPM

namespace {

int ppm_token(ByteReader& r) {
  // skip whitespace and '#' comments, then parse a non-negative integer
  int c = r.u8();
  while (true) {
    if (c == '#') {
      while (c != '\n') c = r.u8();
    } else if (std::isspace(c)) {
      c = r.u8();
    } else {
      break;
    }
  }
  if (!std::isdigit(c)) throw FormatError("ppm: malformed header token");
  long v = 0;
  while (std::isdigit(c)) {
    v = v * 10 + (c - '0');
    if (v > 1000000000) throw FormatError("ppm: header value overflow");
    c = r.u8();
  }
  if (!std::isspace(c)) throw FormatError("ppm: missing separator");
  return static_cast<int>(v);
}

}  // namespace

Tensor read_ppm(const std::vector<uint8_t>& bytes) {
  ByteReader r(bytes);
  const std::string magic = r.str(2);
  if (magic != "P6") throw FormatError("ppm: not a binary pixmap (P6)");
  const int w = ppm_token(r);
  const int h = ppm_token(r);
  const int maxval = ppm_token(r);
  if (maxval != 255) throw FormatError("ppm: only maxval 255 supported, got " + std::to_string(maxval));
  if (w < 1 || h < 1) throw FormatError("ppm: bad dimensions");
  // ppm_token consumed the single whitespace after maxval; raw data follows
  const size_t need = static_cast<size_t>(w) * h * 3;
  if (r.remaining() != need) {
    throw FormatError("ppm: expected " + std::to_string(need) + " pixel bytes, found " +
                      std::to_string(r.remaining()));
  }
  const std::vector<uint8_t> raw = r.bytes(need);
  Tensor img({3, h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at3(c, y, x) = static_cast<float>(raw[(static_cast<size_t>(y) * w + x) * 3 + c]) / 255.0f;
      }
    }
  }
  return img;
}

std::vector<uint8_t> write_ppm(const Tensor& image) {
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw MismatchError("write_ppm: need a [3,H,W] image, got " + shape_str(image.shape));
  }
  const int h = image.dim(1), w = image.dim(2);
  std::ostringstream header;
  header << "P6\n" << w << " " << h << "\n255\n";
  const std::string hs = header.str();
  std::vector<uint8_t> out(hs.begin(), hs.end());
  out.reserve(out.size() + static_cast<size_t>(w) * h * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = image.at3(c, y, x);
        const int q = static_cast<int>(std::lround(std::fmin(std::fmax(v, 0.0f), 1.0f) * 255.0f));
        out.push_back(static_cast<uint8_t>(q));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// metadata sidecar

MetadataRecord parse_metadata(const std::string& text, const MetadataNormalization& norm) {
  MetadataRecord rec = norm.neutral_record();
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const size_t sep = line.find_first_of(":=");
    if (sep == std::string::npos) {
      bool blank = true;
      for (char c : line) blank = blank && std::isspace(static_cast<unsigned char>(c));
      if (blank) continue;
      throw FormatError("metadata line " + std::to_string(line_no) + ": expected 'field: value'");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, sep));
    const std::string val = trim(line.substr(sep + 1));
    int field = -1;
    for (int f = 0; f < kMetadataFields; ++f) {
      if (key == kMetadataFieldNames[static_cast<size_t>(f)]) field = f;
    }
    if (field < 0) throw FormatError("metadata: unknown field '" + key + "'");
    size_t used = 0;
    double parsed = 0.0;
    try {
      parsed = std::stod(val, &used);
    } catch (const std::exception&) {
      throw FormatError("metadata: unparseable value for '" + key + "'");
    }
    if (used != val.size() || !std::isfinite(parsed)) {
      throw FormatError("metadata: unparseable value for '" + key + "'");
    }
    if (field == 3 && (parsed < 0.0 || parsed > 1.0)) {
      throw FormatError("metadata: cloud_cover must lie in [0,1]");
    }
    rec.set(field, parsed);
    rec.provided[static_cast<size_t>(field)] = true;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// files

std::vector<uint8_t> load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path);
  return bytes;
}

void save_file(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

std::string load_text_file(const std::string& path) {
  const auto bytes = load_file(path);
  return std::string(bytes.begin(), bytes.end());
}

}  // namespace cosmic
