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

#include <array>
#include <string>
#include <vector>

#include "cosmic/layers.hpp"

namespace cosmic {

// ---------------------------------------------------------------------------
// Noise schedule

struct NoiseSchedule {
  int steps = 0;                  // T
  std::vector<double> beta;       // beta[t-1], strictly increasing in (0,1)
  std::vector<double> alpha_bar;  // cumulative products of (1 - beta)

  // alpha_bar with the convention alpha_bar(0) = 1.
  double abar(int t) const;
};

// Linear beta interpolation; rejects non-monotone requests.
NoiseSchedule make_schedule(int steps, double beta_1, double beta_T);

// Closed-form variance-preserving forward process:
//   z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
Tensor forward_diffuse(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& s);

// Deterministic (eta = 0) reverse update from t to t_prev < t.
Tensor ddim_step(const Tensor& z_t, int t, int t_prev, const Tensor& eps_hat,
                 const NoiseSchedule& s);

// Uniform-stride decreasing timestep sequence with `steps` entries ending
// above 0; the final transition goes to t = 0.
std::vector<int> ddim_timesteps(int T, int steps);

// ---------------------------------------------------------------------------
// Metadata conditioning

inline constexpr int kMetadataFields = 8;
extern const std::array<const char*, kMetadataFields> kMetadataFieldNames;

// The 8 sensor fields paired with an image.
struct MetadataRecord {
  double utm_zone = 0, timestamp = 0, gsd = 0, cloud_cover = 0;
  double off_nadir_angle = 0, target_azimuth = 0, sun_azimuth = 0, sun_elevation = 0;
  std::array<bool, kMetadataFields> provided{true, true, true, true, true, true, true, true};

  std::array<double, kMetadataFields> values() const;
  void set(int field, double v);
};

// Per-field affine maps onto [0, 100]; config data shipped with the weights.
struct MetadataNormalization {
  std::array<double, kMetadataFields> lo;
  std::array<double, kMetadataFields> hi;
  std::array<double, kMetadataFields> wrap;  // period for cyclic fields, 0 = none

  static MetadataNormalization defaults();
  std::array<double, kMetadataFields> normalize(const MetadataRecord& m) const;
  // Raw value that normalizes to the midpoint (50); used for missing fields.
  double neutral(int field) const;
  MetadataRecord neutral_record() const;
};

// E_sin(m)[2k] = sin(m / 10000^(2k/dim)), [2k+1] = cos(same).
std::vector<float> sinusoidal_embed(double value, int dim);

// Sinusoidal embedding per field, concatenation over the 8 fields, then a
// 2-layer MLP down to the condition width. Output is a single token [1, d].
struct MetadataEncoderNet {
  int field_dim = 16;
  int cond_dim = 128;
  LinearLayer l1, l2;

  static MetadataEncoderNet make(int field_dim, int cond_dim, Rng& rng);
  Var forward(Binder& bind, const MetadataRecord& m, const MetadataNormalization& norm) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// ---------------------------------------------------------------------------
// Noise-prediction U-Net

struct UNetConfig {
  int z_channels = 4;
  int latent_channels = 192;
  int latent_to_z_log2 = 2;  // z grid is 2^k x the latent grid (k = enc_stages - 2)
  int width0 = 32;
  int width1 = 64;
  int attn_dim = 64;
  int cond_dim = 128;
  int field_dim = 16;
  int time_dim = 64;
};

// Aligns the quantized latent with one feature-map shape for additive
// injection: stride-2 transposed convs when upsampling, stride-2 convs when
// downsampling, 1x1 at equal resolution.
struct InjectProj {
  std::vector<TConv2dLayer> ups;
  std::vector<Conv2dLayer> downs;
  Conv2dLayer final1x1;

  static InjectProj make(int latent_channels, int out_channels, int log2_scale, Rng& rng);
  Var forward(Binder& bind, Var latent) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

Var inject_latent(Graph& g, Var feature, Var projected_latent);

// Two 3x3 convs with SiLU, a learned time-embedding bias and latent injection
// after the first activation; residual when the channel count is unchanged.
struct VcBlock {
  Conv2dLayer conv1, conv2;
  LinearLayer time_proj;
  InjectProj inject;

  static VcBlock make(int cin, int cout, int time_dim, int latent_channels, int log2_scale,
                      Rng& rng);
  Var forward(Binder& bind, Var x, Var time_emb, Var latent) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Cross-attention with spatial queries and token keys/values from the
// condition. With a single token the softmax collapses to 1 and the output is
// the value projection broadcast over space.
struct CaBlock {
  Conv2dLayer q;     // 1x1, C -> attn
  LinearLayer k, v;  // cond -> attn
  Conv2dLayer out;   // 1x1, attn -> C

  static CaBlock make(int channels, int attn_dim, int cond_dim, Rng& rng);
  Var forward(Binder& bind, Var f, Var cond_tokens) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct UNetModel {
  UNetConfig cfg;
  Conv2dLayer conv_in;
  LinearLayer time_l1, time_l2;
  VcBlock vc0, vc1, vc_mid, vc2;
  CaBlock ca0, ca1;
  Conv2dLayer down;
  TConv2dLayer up;
  Conv2dLayer conv_out;

  static UNetModel make(const UNetConfig& cfg, Rng& rng);
  Var time_embedding(Binder& bind, int t) const;
  // z_t [z,h,w], latent = quantized latent grid, cond [1,d] single token.
  Var forward(Binder& bind, Var z_t, int t, Var latent, Var cond) const;
  // Convenience non-training entry point.
  Tensor predict_noise(const Tensor& z_t, int t, const Tensor& latent, const Tensor& cond_token) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Runs the full reverse process from seeded Gaussian noise, conditioned on
// the quantized latent and the metadata token. Deterministic per seed.
Tensor generate_compensation(const UNetModel& unet, const NoiseSchedule& sched,
                             const Tensor& latent, const Tensor& cond_token,
                             const std::vector<int>& z_shape, int steps, uint64_t seed);

}  // namespace cosmic
