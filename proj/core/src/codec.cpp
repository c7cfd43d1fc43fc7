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

#include "cosmic/codec.hpp"

#include <algorithm>

#include "cosmic/errors.hpp"

namespace cosmic {

void CodecConfig::validate() const {
  if (image_channels < 1 || latent_channels < 2 || hyper_channels < 1 || z_channels < 1) {
    throw MismatchError("codec config: channel counts must be positive");
  }
  if (latent_channels % 2 != 0) throw MismatchError("codec config: latent channels must be even");
  if (enc_stages < 2) throw MismatchError("codec config: need at least 2 downsampling stages");
  if (cam_after_stage < 0 || cam_after_stage > enc_stages) {
    throw MismatchError("codec config: cam_after_stage out of range");
  }
  if (lcb_kernel % 2 == 0 || cheap_kernel % 2 == 0 || cam_1d_len % 2 == 0) {
    throw MismatchError("codec config: kernels must be odd");
  }
  if (dec_width % 2 != 0 || comp_width % 2 != 0) {
    throw MismatchError("codec config: widths must be even");
  }
}

// ---------------------------------------------------------------------------
// LCB

LcbBlock LcbBlock::make(int cin, int cout, int stride, const CodecConfig& cfg, Rng& rng) {
  if (cout % 2 != 0) throw MismatchError("lcb: output channels must be even, got " + std::to_string(cout));
  LcbBlock b;
  const int k = cfg.lcb_kernel;
  b.depthwise = Conv2dLayer::make(cin, cin, k, k, stride, k / 2, rng, cin);
  b.pointwise = Conv2dLayer::make(cin, cout / 2, 1, 1, 1, 0, rng);
  const int kc = cfg.cheap_kernel;
  b.cheap = Conv2dLayer::make(cout / 2, cout / 2, kc, kc, 1, kc / 2, rng, cout / 2);
  return b;
}

Var LcbBlock::forward(Binder& bind, Var x) const {
  Graph& g = bind.graph();
  Var dw = depthwise.forward(bind, x);
  Var pw = pointwise.forward(bind, dw);
  Var ch = cheap.forward(bind, pw);
  return g.concat_channels({pw, ch});
}

void LcbBlock::visit(const std::string& prefix, const ParamVisitor& v) {
  depthwise.visit(prefix + ".depthwise", v);
  pointwise.visit(prefix + ".pointwise", v);
  cheap.visit(prefix + ".cheap", v);
}

// ---------------------------------------------------------------------------
// CAM

CamBlock CamBlock::make(int channels, const CodecConfig& cfg, Rng& rng) {
  CamBlock b;
  b.local = LcbBlock::make(channels, channels, 1, cfg, rng);
  const int len = cfg.cam_1d_len;
  b.horiz = Conv2dLayer::make_asym(channels, channels, 1, len,
                                   ConvGeom{1, 0, len / 2, channels}, rng);
  b.vert = Conv2dLayer::make_asym(channels, channels, len, 1,
                                  ConvGeom{1, len / 2, 0, channels}, rng);
  return b;
}

Var CamBlock::attention(Binder& bind, Var x) const {
  Graph& g = bind.graph();
  Var h = horiz.forward(bind, x);
  h = vert.forward(bind, h);
  return g.sigmoid(h);
}

Var CamBlock::forward(Binder& bind, Var x) const {
  Graph& g = bind.graph();
  Var loc = local.forward(bind, x);
  Var att = attention(bind, x);
  return g.mul(loc, att);
}

void CamBlock::visit(const std::string& prefix, const ParamVisitor& v) {
  local.visit(prefix + ".local", v);
  horiz.visit(prefix + ".horiz", v);
  vert.visit(prefix + ".vert", v);
}

// ---------------------------------------------------------------------------
// encoder

EncoderNet EncoderNet::make(const CodecConfig& cfg, Rng& rng) {
  cfg.validate();
  EncoderNet net;
  net.cfg = cfg;
  int cin = cfg.image_channels;
  for (int s = 0; s < cfg.enc_stages; ++s) {
    net.stages.push_back(LcbBlock::make(cin, cfg.latent_channels, 2, cfg, rng));
    net.gdns.push_back(GdnLayer::make(cfg.latent_channels, false, rng));
    cin = cfg.latent_channels;
  }
  if (cfg.cam_after_stage > 0) net.cam = CamBlock::make(cfg.latent_channels, cfg, rng);
  if (cfg.final_proj_lcb) {
    net.proj_lcb = LcbBlock::make(cfg.latent_channels, cfg.latent_channels, 1, cfg, rng);
  } else {
    net.proj_dense = Conv2dLayer::make(cfg.latent_channels, cfg.latent_channels, 5, 5, 1, 2, rng);
  }
  return net;
}

Var EncoderNet::forward(Binder& bind, Var image) const {
  Graph& g = bind.graph();
  const Tensor& img = g.value(image);
  if (img.rank() != 3 || img.dim(0) != cfg.image_channels) {
    throw MismatchError("encoder: expected [" + std::to_string(cfg.image_channels) +
                        ",H,W] image, got " + shape_str(img.shape));
  }
  const int f = cfg.downsample_factor();
  if (img.dim(1) % f != 0 || img.dim(2) % f != 0) {
    throw MismatchError("encoder: dims " + shape_str(img.shape) + " not divisible by " +
                        std::to_string(f) + " (caller must pad or crop)");
  }
  Var h = image;
  for (int s = 0; s < cfg.enc_stages; ++s) {
    h = stages[static_cast<size_t>(s)].forward(bind, h);
    h = gdns[static_cast<size_t>(s)].forward(bind, h);
    if (cam && cfg.cam_after_stage == s + 1) h = cam->forward(bind, h);
  }
  if (proj_lcb) return proj_lcb->forward(bind, h);
  return proj_dense->forward(bind, h);
}

void EncoderNet::visit(const std::string& prefix, const ParamVisitor& v) {
  for (size_t s = 0; s < stages.size(); ++s) {
    stages[s].visit(prefix + ".lcb" + std::to_string(s + 1), v);
    gdns[s].visit(prefix + ".gdn" + std::to_string(s + 1), v);
  }
  if (cam) cam->visit(prefix + ".cam", v);
  if (proj_lcb) proj_lcb->visit(prefix + ".proj", v);
  if (proj_dense) proj_dense->visit(prefix + ".proj", v);
}

// ---------------------------------------------------------------------------
// compensation encoder

CompEncoderNet CompEncoderNet::make(const CodecConfig& cfg, Rng& rng) {
  CompEncoderNet net;
  const int w = cfg.comp_width;
  net.c1 = Conv2dLayer::make(cfg.image_channels, w, 5, 5, 2, 2, rng);
  net.c2 = Conv2dLayer::make(w, w, 5, 5, 2, 2, rng);
  net.c3 = Conv2dLayer::make(w, w, 5, 5, 1, 2, rng);
  net.c4 = Conv2dLayer::make(w, 2 * cfg.z_channels, 5, 5, 1, 2, rng);
  // keep the initial head near (mu ~ 0, sigma = exp(raw) ~ 1)
  for (float& v : net.c4.w.data) v *= 0.1f;
  net.g1 = GdnLayer::make(w, false, rng);
  net.g2 = GdnLayer::make(w, false, rng);
  net.g3 = GdnLayer::make(w, false, rng);
  return net;
}

std::pair<Var, Var> CompEncoderNet::forward(Binder& bind, Var image) const {
  Graph& g = bind.graph();
  const Tensor& img = g.value(image);
  if (img.dim(1) % 4 != 0 || img.dim(2) % 4 != 0) {
    throw MismatchError("comp encoder: dims " + shape_str(img.shape) + " not divisible by 4");
  }
  Var h = c1.forward(bind, image);
  h = g1.forward(bind, h);
  h = c2.forward(bind, h);
  h = g2.forward(bind, h);
  h = c3.forward(bind, h);
  h = g3.forward(bind, h);
  h = c4.forward(bind, h);
  const int two_z = g.value(h).dim(0);
  Var mu = g.slice_channels(h, 0, two_z / 2);
  Var sigma = g.exp(g.slice_channels(h, two_z / 2, two_z / 2));
  return {mu, sigma};
}

void CompEncoderNet::visit(const std::string& prefix, const ParamVisitor& v) {
  c1.visit(prefix + ".c1", v);
  g1.visit(prefix + ".g1", v);
  c2.visit(prefix + ".c2", v);
  g2.visit(prefix + ".g2", v);
  c3.visit(prefix + ".c3", v);
  g3.visit(prefix + ".g3", v);
  c4.visit(prefix + ".c4", v);
}

Var reparameterize(Graph& g, Var mu, Var sigma, Var eps) {
  return g.add(mu, g.mul(sigma, eps));
}

// ---------------------------------------------------------------------------
// decoder

DecoderNet DecoderNet::make(const CodecConfig& cfg, Rng& rng) {
  cfg.validate();
  DecoderNet net;
  net.cfg = cfg;
  for (int i = 0; i < cfg.enc_stages - 2; ++i) {
    net.latent_up.push_back(
        TConv2dLayer::make(cfg.latent_channels, cfg.latent_channels, 5, 5, 2, 2, 1, rng));
  }
  const int w = cfg.dec_width;
  const int concat_ch = cfg.latent_channels + cfg.z_channels;
  net.d1 = Conv2dLayer::make(concat_ch, w, 5, 5, 1, 2, rng);
  net.d2 = Conv2dLayer::make(w, w, 5, 5, 1, 2, rng);
  net.d3 = TConv2dLayer::make(w, w, 5, 5, 2, 2, 1, rng);
  net.d4 = TConv2dLayer::make(w, cfg.image_channels, 5, 5, 2, 2, 1, rng);
  net.i1 = GdnLayer::make(w, true, rng);
  net.i2 = GdnLayer::make(w, true, rng);
  net.i3 = GdnLayer::make(w, true, rng);
  return net;
}

Var DecoderNet::upsample_latent(Binder& bind, Var y_hat) const {
  Var h = y_hat;
  for (const TConv2dLayer& up : latent_up) h = up.forward(bind, h);
  return h;
}

Var DecoderNet::forward(Binder& bind, Var y_hat, Var z0) const {
  Graph& g = bind.graph();
  Var up = upsample_latent(bind, y_hat);
  const Tensor& uv = g.value(up);
  const Tensor& zv = g.value(z0);
  if (uv.dim(1) != zv.dim(1) || uv.dim(2) != zv.dim(2)) {
    throw MismatchError("decoder: upsampled latent " + shape_str(uv.shape) +
                        " vs compensation " + shape_str(zv.shape));
  }
  // concat order (upsampled latent, z0) is fixed for bitstream compatibility
  Var h = g.concat_channels({up, z0});
  if (g.value(h).dim(0) != cfg.latent_channels + cfg.z_channels) {
    throw MismatchError("decoder: first-stage channels " + shape_str(g.value(h).shape));
  }
  h = d1.forward(bind, h);
  h = i1.forward(bind, h);
  h = d2.forward(bind, h);
  h = i2.forward(bind, h);
  h = d3.forward(bind, h);
  h = i3.forward(bind, h);
  return d4.forward(bind, h);
}

void DecoderNet::visit(const std::string& prefix, const ParamVisitor& v) {
  for (size_t i = 0; i < latent_up.size(); ++i) {
    latent_up[i].visit(prefix + ".up" + std::to_string(i + 1), v);
  }
  d1.visit(prefix + ".d1", v);
  i1.visit(prefix + ".i1", v);
  d2.visit(prefix + ".d2", v);
  i2.visit(prefix + ".i2", v);
  d3.visit(prefix + ".d3", v);
  i3.visit(prefix + ".i3", v);
  d4.visit(prefix + ".d4", v);
}

Tensor clamp01(const Tensor& x) {
  Tensor out(x.shape);
  for (size_t i = 0; i < x.data.size(); ++i) out.data[i] = std::clamp(x.data[i], 0.0f, 1.0f);
  return out;
}

}  // namespace cosmic
