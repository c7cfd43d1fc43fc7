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

#include <optional>
#include <vector>

#include "cosmic/layers.hpp"

namespace cosmic {

// Architecture knobs for the codec networks. The default values are the
// production configuration; tests shrink them to keep runtimes small.
struct CodecConfig {
  int image_channels = 3;
  int latent_channels = 192;
  int hyper_channels = 128;
  int z_channels = 4;    // compensation feature channels (z0)
  int enc_stages = 4;    // stride-2 LCB stages; total downsampling 2^enc_stages
  int cam_after_stage = 1;  // insert the attention module after this stage; 0 disables
  int lcb_kernel = 5;
  int cheap_kernel = 3;  // per-channel transforms for the second half of LCB outputs
  int cam_1d_len = 5;
  bool final_proj_lcb = false;  // latent projection: dense 5x5 conv by default
  int dec_width = 192;
  int comp_width = 192;

  int downsample_factor() const { return 1 << enc_stages; }
  void validate() const;
};

// Lightweight convolution block: depthwise KxK, then a 1x1 pointwise that
// produces half of the output maps, the other half coming from cheap
// per-channel transforms of the pointwise outputs.
struct LcbBlock {
  Conv2dLayer depthwise;  // groups = cin
  Conv2dLayer pointwise;  // cin -> cout/2, 1x1
  Conv2dLayer cheap;      // cout/2 -> cout/2, groups = cout/2

  static LcbBlock make(int cin, int cout, int stride, const CodecConfig& cfg, Rng& rng);
  Var forward(Binder& bind, Var x) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Convolution attention module: a stride-1 LCB local branch gated by a map
// from two serial one-dimensional depthwise convolutions (1xK then Kx1)
// squashed through the logistic function.
struct CamBlock {
  LcbBlock local;
  Conv2dLayer horiz;  // 1xK, same padding
  Conv2dLayer vert;   // Kx1, same padding

  static CamBlock make(int channels, const CodecConfig& cfg, Rng& rng);
  Var forward(Binder& bind, Var x) const;
  Var attention(Binder& bind, Var x) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// On-satellite encoder: alternating stride-2 LCB + GDN stages with one CAM,
// then a projection to the latent channel count.
struct EncoderNet {
  CodecConfig cfg;
  std::vector<LcbBlock> stages;
  std::vector<GdnLayer> gdns;
  std::optional<CamBlock> cam;
  std::optional<Conv2dLayer> proj_dense;
  std::optional<LcbBlock> proj_lcb;

  static EncoderNet make(const CodecConfig& cfg, Rng& rng);
  Var forward(Binder& bind, Var image) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Ground-side compensation encoder: 4 dense conv stages producing 2*z
// channels at quarter resolution, split into mean and (exponentiated) scale.
struct CompEncoderNet {
  Conv2dLayer c1, c2, c3, c4;
  GdnLayer g1, g2, g3;

  static CompEncoderNet make(const CodecConfig& cfg, Rng& rng);
  // (mu_z, sigma_z); sigma_z = exp(raw) > 0
  std::pair<Var, Var> forward(Binder& bind, Var image) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// z0 = mu + sigma * eps, elementwise.
Var reparameterize(Graph& g, Var mu, Var sigma, Var eps);

// Decoder: latent-upsampling transposed convs bring the quantized latent to
// the z0 grid, the concatenated block then runs conv+IGDN stages and two
// stride-2 transposed convs back to image resolution.
struct DecoderNet {
  CodecConfig cfg;
  std::vector<TConv2dLayer> latent_up;  // enc_stages - 2 blocks
  Conv2dLayer d1, d2;
  TConv2dLayer d3, d4;
  GdnLayer i1, i2, i3;

  static DecoderNet make(const CodecConfig& cfg, Rng& rng);
  Var upsample_latent(Binder& bind, Var y_hat) const;
  // y_hat: quantized latent at 1/2^enc_stages, z0 at 1/4 resolution.
  Var forward(Binder& bind, Var y_hat, Var z0) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Clamp a reconstruction into displayable range (inference side).
Tensor clamp01(const Tensor& x);

}  // namespace cosmic
