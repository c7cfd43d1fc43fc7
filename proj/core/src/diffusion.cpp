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

#include "cosmic/diffusion.hpp"

#include <cmath>

#include "cosmic/errors.hpp"

namespace cosmic {

// ---------------------------------------------------------------------------
// schedule

double NoiseSchedule::abar(int t) const {
  if (t == 0) return 1.0;
  if (t < 1 || t > steps) throw MismatchError("noise schedule: t=" + std::to_string(t) + " outside [0," + std::to_string(steps) + "]");
  return alpha_bar[static_cast<size_t>(t) - 1];
}

NoiseSchedule make_schedule(int steps, double beta_1, double beta_T) {
  if (steps < 1) throw MismatchError("noise schedule: steps must be >= 1");
  if (!(beta_1 > 0.0) || !(beta_T < 1.0) || (steps > 1 && !(beta_1 < beta_T))) {
    throw MismatchError("noise schedule: need 0 < beta_1 < beta_T < 1");
  }
  NoiseSchedule s;
  s.steps = steps;
  s.beta.resize(static_cast<size_t>(steps));
  s.alpha_bar.resize(static_cast<size_t>(steps));
  double prod = 1.0;
  for (int t = 0; t < steps; ++t) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / (steps - 1);
    s.beta[static_cast<size_t>(t)] = beta_1 + (beta_T - beta_1) * frac;
    prod *= 1.0 - s.beta[static_cast<size_t>(t)];
    s.alpha_bar[static_cast<size_t>(t)] = prod;
  }
  return s;
}

Tensor forward_diffuse(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& s) {
  if (t < 1 || t > s.steps) {
    throw MismatchError("forward_diffuse: t=" + std::to_string(t) + " outside [1," + std::to_string(s.steps) + "]");
  }
  if (!z0.same_shape(eps)) throw MismatchError("forward_diffuse: z0 " + shape_str(z0.shape) + " vs eps " + shape_str(eps.shape));
  const double ab = s.abar(t);
  const float a = static_cast<float>(std::sqrt(ab));
  const float b = static_cast<float>(std::sqrt(1.0 - ab));
  Tensor out(z0.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = a * z0.data[i] + b * eps.data[i];
  return out;
}

Tensor ddim_step(const Tensor& z_t, int t, int t_prev, const Tensor& eps_hat,
                 const NoiseSchedule& s) {
  if (!(t_prev < t)) throw MismatchError("ddim_step: t_prev must be below t");
  if (!z_t.same_shape(eps_hat)) throw MismatchError("ddim_step: shape mismatch");
  const double ab_t = s.abar(t);
  const double ab_p = s.abar(t_prev);
  const double inv_sqrt_ab = 1.0 / std::sqrt(ab_t);
  const double noise_t = std::sqrt(1.0 - ab_t);
  const double keep_p = std::sqrt(ab_p);
  const double noise_p = std::sqrt(1.0 - ab_p);
  Tensor out(z_t.shape);
  for (size_t i = 0; i < out.data.size(); ++i) {
    const double z0_hat = (z_t.data[i] - noise_t * eps_hat.data[i]) * inv_sqrt_ab;
    out.data[i] = static_cast<float>(keep_p * z0_hat + noise_p * eps_hat.data[i]);
  }
  return out;
}

std::vector<int> ddim_timesteps(int T, int steps) {
  if (steps < 1 || steps > T) throw MismatchError("ddim_timesteps: steps outside [1,T]");
  const int stride = T / steps;
  std::vector<int> ts(static_cast<size_t>(steps));
  for (int i = 0; i < steps; ++i) ts[static_cast<size_t>(i)] = T - i * stride;
  return ts;
}

// ---------------------------------------------------------------------------
// metadata

const std::array<const char*, kMetadataFields> kMetadataFieldNames = {
    "utm_zone",       "timestamp",      "gsd",         "cloud_cover",
    "off_nadir_angle", "target_azimuth", "sun_azimuth", "sun_elevation"};

std::array<double, kMetadataFields> MetadataRecord::values() const {
  return {utm_zone, timestamp,       gsd,         cloud_cover,
          off_nadir_angle, target_azimuth, sun_azimuth, sun_elevation};
}

void MetadataRecord::set(int field, double v) {
  switch (field) {
    case 0: utm_zone = v; break;
    case 1: timestamp = v; break;
    case 2: gsd = v; break;
    case 3: cloud_cover = v; break;
    case 4: off_nadir_angle = v; break;
    case 5: target_azimuth = v; break;
    case 6: sun_azimuth = v; break;
    case 7: sun_elevation = v; break;
    default: throw MismatchError("metadata: field index out of range");
  }
}

MetadataNormalization MetadataNormalization::defaults() {
  MetadataNormalization n;
  constexpr double kYearSeconds = 31557600.0;
  n.lo = {1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -90.0};
  n.hi = {60.0, kYearSeconds, 10.0, 1.0, 90.0, 360.0, 360.0, 90.0};
  n.wrap = {0.0, kYearSeconds, 0.0, 0.0, 0.0, 360.0, 360.0, 0.0};
  return n;
}

std::array<double, kMetadataFields> MetadataNormalization::normalize(const MetadataRecord& m) const {
  const auto raw = m.values();
  std::array<double, kMetadataFields> out{};
  for (int f = 0; f < kMetadataFields; ++f) {
    double v = raw[static_cast<size_t>(f)];
    if (!std::isfinite(v)) {
      throw NumericError(std::string("metadata: non-finite ") + kMetadataFieldNames[static_cast<size_t>(f)]);
    }
    if (wrap[static_cast<size_t>(f)] > 0.0) {
      v = std::fmod(v, wrap[static_cast<size_t>(f)]);
      if (v < 0.0) v += wrap[static_cast<size_t>(f)];
    }
    const double a = lo[static_cast<size_t>(f)], b = hi[static_cast<size_t>(f)];
    v = std::min(std::max(v, a), b);
    out[static_cast<size_t>(f)] = (v - a) / (b - a) * 100.0;
  }
  return out;
}

double MetadataNormalization::neutral(int field) const {
  return 0.5 * (lo[static_cast<size_t>(field)] + hi[static_cast<size_t>(field)]);
}

MetadataRecord MetadataNormalization::neutral_record() const {
  MetadataRecord m;
  for (int f = 0; f < kMetadataFields; ++f) {
    m.set(f, neutral(f));
    m.provided[static_cast<size_t>(f)] = false;
  }
  return m;
}

std::vector<float> sinusoidal_embed(double value, int dim) {
  if (dim < 2 || dim % 2 != 0) throw MismatchError("sinusoidal_embed: dim must be even and >= 2");
  std::vector<float> e(static_cast<size_t>(dim));
  for (int k = 0; 2 * k < dim; ++k) {
    const double freq = std::pow(10000.0, -2.0 * k / dim);
    e[static_cast<size_t>(2 * k)] = static_cast<float>(std::sin(value * freq));
    e[static_cast<size_t>(2 * k + 1)] = static_cast<float>(std::cos(value * freq));
  }
  return e;
}

MetadataEncoderNet MetadataEncoderNet::make(int field_dim, int cond_dim, Rng& rng) {
  MetadataEncoderNet net;
  net.field_dim = field_dim;
  net.cond_dim = cond_dim;
  net.l1 = LinearLayer::make(kMetadataFields * field_dim, cond_dim, rng);
  net.l2 = LinearLayer::make(cond_dim, cond_dim, rng);
  return net;
}

Var MetadataEncoderNet::forward(Binder& bind, const MetadataRecord& m,
                                const MetadataNormalization& norm) const {
  Graph& g = bind.graph();
  const auto fields = norm.normalize(m);
  std::vector<float> concat;
  concat.reserve(static_cast<size_t>(kMetadataFields) * field_dim);
  for (double v : fields) {
    const auto e = sinusoidal_embed(v, field_dim);
    concat.insert(concat.end(), e.begin(), e.end());
  }
  Var x = g.constant(Tensor::from({kMetadataFields * field_dim}, std::move(concat)));
  Var h = l1.forward(bind, x);
  h = g.silu(h);
  h = l2.forward(bind, h);
  return g.reshape(h, {1, cond_dim});
}

void MetadataEncoderNet::visit(const std::string& prefix, const ParamVisitor& v) {
  l1.visit(prefix + ".l1", v);
  l2.visit(prefix + ".l2", v);
}

// ---------------------------------------------------------------------------
// U-Net

InjectProj InjectProj::make(int latent_channels, int out_channels, int log2_scale, Rng& rng) {
  InjectProj p;
  int ch = latent_channels;
  for (int i = 0; i < log2_scale; ++i) {
    const int next = out_channels;
    p.ups.push_back(TConv2dLayer::make(ch, next, 5, 5, 2, 2, 1, rng));
    ch = next;
  }
  for (int i = 0; i < -log2_scale; ++i) {
    const int next = out_channels;
    p.downs.push_back(Conv2dLayer::make(ch, next, 3, 3, 2, 1, rng));
    ch = next;
  }
  p.final1x1 = Conv2dLayer::make(ch, out_channels, 1, 1, 1, 0, rng);
  return p;
}

Var InjectProj::forward(Binder& bind, Var latent) const {
  Graph& g = bind.graph();
  Var h = latent;
  for (const auto& up : ups) {
    h = up.forward(bind, h);
    h = g.silu(h);
  }
  for (const auto& down : downs) {
    h = down.forward(bind, h);
    h = g.silu(h);
  }
  return final1x1.forward(bind, h);
}

void InjectProj::visit(const std::string& prefix, const ParamVisitor& v) {
  for (size_t i = 0; i < ups.size(); ++i) ups[i].visit(prefix + ".up" + std::to_string(i + 1), v);
  for (size_t i = 0; i < downs.size(); ++i) downs[i].visit(prefix + ".down" + std::to_string(i + 1), v);
  final1x1.visit(prefix + ".out", v);
}

Var inject_latent(Graph& g, Var feature, Var projected_latent) {
  const Tensor& f = g.value(feature);
  const Tensor& p = g.value(projected_latent);
  if (!f.same_shape(p)) {
    throw MismatchError("inject_latent: projection " + shape_str(p.shape) + " vs feature " + shape_str(f.shape));
  }
  return g.add(feature, projected_latent);
}

VcBlock VcBlock::make(int cin, int cout, int time_dim, int latent_channels, int log2_scale,
                      Rng& rng) {
  VcBlock b;
  b.conv1 = Conv2dLayer::make(cin, cout, 3, 3, 1, 1, rng);
  b.conv2 = Conv2dLayer::make(cout, cout, 3, 3, 1, 1, rng);
  b.time_proj = LinearLayer::make(time_dim, cout, rng);
  b.inject = InjectProj::make(latent_channels, cout, log2_scale, rng);
  return b;
}

Var VcBlock::forward(Binder& bind, Var x, Var time_emb, Var latent) const {
  Graph& g = bind.graph();
  Var h = conv1.forward(bind, x);
  h = g.silu(h);
  h = g.broadcast_add_channel(h, time_proj.forward(bind, time_emb));
  h = inject_latent(g, h, inject.forward(bind, latent));
  h = conv2.forward(bind, h);
  h = g.silu(h);
  if (g.value(x).dim(0) == g.value(h).dim(0)) h = g.add(h, x);
  return h;
}

void VcBlock::visit(const std::string& prefix, const ParamVisitor& v) {
  conv1.visit(prefix + ".conv1", v);
  conv2.visit(prefix + ".conv2", v);
  time_proj.visit(prefix + ".time", v);
  inject.visit(prefix + ".inject", v);
}

CaBlock CaBlock::make(int channels, int attn_dim, int cond_dim, Rng& rng) {
  CaBlock b;
  b.q = Conv2dLayer::make(channels, attn_dim, 1, 1, 1, 0, rng);
  b.k = LinearLayer::make(cond_dim, attn_dim, rng);
  b.v = LinearLayer::make(cond_dim, attn_dim, rng);
  b.out = Conv2dLayer::make(attn_dim, channels, 1, 1, 1, 0, rng);
  return b;
}

Var CaBlock::forward(Binder& bind, Var f, Var cond_tokens) const {
  Graph& g = bind.graph();
  const Tensor& fv = g.value(f);
  const int c = fv.dim(0), h = fv.dim(1), w = fv.dim(2);
  const Tensor& cv = g.value(cond_tokens);
  const int tokens = cv.dim(0);
  const int attn_dim = q.w.dim(0);
  (void)c;

  // one linear per token; single-token is the shipping configuration
  std::vector<Var> krows, vrows;
  for (int tk = 0; tk < tokens; ++tk) {
    Var row = g.reshape(g.slice_row(cond_tokens, tk), {cv.dim(1)});
    krows.push_back(g.reshape(k.forward(bind, row), {1, attn_dim}));
    vrows.push_back(g.reshape(v.forward(bind, row), {1, attn_dim}));
  }
  Var kmat = krows.size() == 1 ? krows[0] : g.concat_rows(krows);
  Var vmat = vrows.size() == 1 ? vrows[0] : g.concat_rows(vrows);

  Var qmap = q.forward(bind, f);                      // [A,H,W]
  Var qflat = g.reshape(qmap, {attn_dim, h * w});     // [A,HW]
  Var scores = g.scale(g.matmul(kmat, qflat), 1.0 / std::sqrt(static_cast<double>(attn_dim)));
  Var weights = g.softmax_axis0(scores);              // [T,HW]
  Var mixed = g.matmul(g.transpose2d(vmat), weights);  // [A,HW]
  Var spatial = g.reshape(mixed, {attn_dim, h, w});
  return g.add(f, out.forward(bind, spatial));
}

void CaBlock::visit(const std::string& prefix, const ParamVisitor& v2) {
  q.visit(prefix + ".q", v2);
  k.visit(prefix + ".k", v2);
  v.visit(prefix + ".v", v2);
  out.visit(prefix + ".out", v2);
}

UNetModel UNetModel::make(const UNetConfig& cfg, Rng& rng) {
  UNetModel m;
  m.cfg = cfg;
  m.conv_in = Conv2dLayer::make(cfg.z_channels, cfg.width0, 3, 3, 1, 1, rng);
  m.time_l1 = LinearLayer::make(cfg.time_dim, cfg.time_dim, rng);
  m.time_l2 = LinearLayer::make(cfg.time_dim, cfg.time_dim, rng);
  const int s = cfg.latent_to_z_log2;
  m.vc0 = VcBlock::make(cfg.width0, cfg.width0, cfg.time_dim, cfg.latent_channels, s, rng);
  m.ca0 = CaBlock::make(cfg.width0, cfg.attn_dim, cfg.cond_dim, rng);
  m.down = Conv2dLayer::make(cfg.width0, cfg.width1, 3, 3, 2, 1, rng);
  m.vc1 = VcBlock::make(cfg.width1, cfg.width1, cfg.time_dim, cfg.latent_channels, s - 1, rng);
  m.ca1 = CaBlock::make(cfg.width1, cfg.attn_dim, cfg.cond_dim, rng);
  m.vc_mid = VcBlock::make(cfg.width1, cfg.width1, cfg.time_dim, cfg.latent_channels, s - 1, rng);
  m.up = TConv2dLayer::make(cfg.width1, cfg.width0, 5, 5, 2, 2, 1, rng);
  m.vc2 = VcBlock::make(2 * cfg.width0, cfg.width0, cfg.time_dim, cfg.latent_channels, s, rng);
  m.conv_out = Conv2dLayer::make(cfg.width0, cfg.z_channels, 3, 3, 1, 1, rng);
  // small-gain output head: early predictions stay near zero noise
  for (float& v : m.conv_out.w.data) v *= 0.05f;
  return m;
}

Var UNetModel::time_embedding(Binder& bind, int t) const {
  Graph& g = bind.graph();
  Var raw = g.constant(Tensor::from({cfg.time_dim}, sinusoidal_embed(static_cast<double>(t), cfg.time_dim)));
  Var h = time_l1.forward(bind, raw);
  h = g.silu(h);
  return time_l2.forward(bind, h);
}

Var UNetModel::forward(Binder& bind, Var z_t, int t, Var latent, Var cond) const {
  Graph& g = bind.graph();
  Var temb = time_embedding(bind, t);
  Var h = conv_in.forward(bind, z_t);
  Var h0 = vc0.forward(bind, h, temb, latent);
  h0 = ca0.forward(bind, h0, cond);
  Var hd = g.silu(down.forward(bind, h0));
  Var h1 = vc1.forward(bind, hd, temb, latent);
  h1 = ca1.forward(bind, h1, cond);
  Var hm = vc_mid.forward(bind, h1, temb, latent);
  Var hu = g.silu(up.forward(bind, hm));
  Var cat = g.concat_channels({hu, h0});
  Var h2 = vc2.forward(bind, cat, temb, latent);
  return conv_out.forward(bind, h2);
}

Tensor UNetModel::predict_noise(const Tensor& z_t, int t, const Tensor& latent,
                                const Tensor& cond_token) const {
  Graph g;
  Binder bind(g, false);
  Var out = forward(bind, g.constant(z_t), t, g.constant(latent), g.constant(cond_token));
  return g.value(out);
}

void UNetModel::visit(const std::string& prefix, const ParamVisitor& v) {
  conv_in.visit(prefix + ".conv_in", v);
  time_l1.visit(prefix + ".time_l1", v);
  time_l2.visit(prefix + ".time_l2", v);
  vc0.visit(prefix + ".vc0", v);
  ca0.visit(prefix + ".ca0", v);
  down.visit(prefix + ".down", v);
  vc1.visit(prefix + ".vc1", v);
  ca1.visit(prefix + ".ca1", v);
  vc_mid.visit(prefix + ".vc_mid", v);
  up.visit(prefix + ".up", v);
  vc2.visit(prefix + ".vc2", v);
  conv_out.visit(prefix + ".conv_out", v);
}

Tensor generate_compensation(const UNetModel& unet, const NoiseSchedule& sched,
                             const Tensor& latent, const Tensor& cond_token,
                             const std::vector<int>& z_shape, int steps, uint64_t seed) {
  Rng rng(seed);
  Tensor z(z_shape);
  z.fill_normal(rng, 0.0f, 1.0f);
  const std::vector<int> ts = ddim_timesteps(sched.steps, steps);
  for (size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const int t_prev = (i + 1 < ts.size()) ? ts[i + 1] : 0;
    const Tensor eps_hat = unet.predict_noise(z, t, latent, cond_token);
    z = ddim_step(z, t, t_prev, eps_hat, sched);
  }
  return z;
}

}  // namespace cosmic
