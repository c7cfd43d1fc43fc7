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

#include "cosmic/layers.hpp"

#include <cmath>

namespace cosmic {

float softplus_inv(float y) {
  // log(exp(y) - 1), stable for small y
  if (y > 20.0f) return y;
  return std::log(std::expm1(static_cast<double>(y)));
}

Conv2dLayer Conv2dLayer::make(int cin, int cout, int kh, int kw, int stride, int pad, Rng& rng,
                              int groups) {
  return make_asym(cin, cout, kh, kw, ConvGeom::same(stride, pad, groups), rng);
}

Conv2dLayer Conv2dLayer::make_asym(int cin, int cout, int kh, int kw, ConvGeom geom, Rng& rng) {
  Conv2dLayer l;
  l.geom = geom;
  l.w = Tensor({cout, cin / geom.groups, kh, kw});
  const double fan_in = static_cast<double>(cin / geom.groups) * kh * kw;
  l.w.fill_normal(rng, 0.0f, static_cast<float>(std::sqrt(2.0 / fan_in)));
  l.b = Tensor({cout});
  return l;
}

Var Conv2dLayer::forward(Binder& bind, Var x) const {
  return bind.graph().conv2d_geom(x, bind(w), bind(b), geom);
}

Tensor Conv2dLayer::forward_plain(const Tensor& x) const {
  return conv2d_fwd(x, w, b, geom);
}

void Conv2dLayer::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + ".w", w);
  v(prefix + ".b", b);
}

TConv2dLayer TConv2dLayer::make(int cin, int cout, int kh, int kw, int stride, int pad,
                                int out_pad, Rng& rng, int groups) {
  TConv2dLayer l;
  l.stride = stride;
  l.pad = pad;
  l.out_pad = out_pad;
  l.groups = groups;
  l.w = Tensor({cin, cout / groups, kh, kw});
  const double fan_in = static_cast<double>(cin / groups) * kh * kw / (stride * stride);
  l.w.fill_normal(rng, 0.0f, static_cast<float>(std::sqrt(2.0 / std::max(1.0, fan_in))));
  l.b = Tensor({cout});
  return l;
}

Var TConv2dLayer::forward(Binder& bind, Var x) const {
  return bind.graph().tconv2d(x, bind(w), bind(b), stride, pad, out_pad, groups);
}

void TConv2dLayer::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + ".w", w);
  v(prefix + ".b", b);
}

GdnLayer GdnLayer::make(int channels, bool inverse, Rng& rng) {
  (void)rng;
  GdnLayer l;
  l.inverse = inverse;
  // Classic init: beta ~ 1, gamma ~ 0.1 on the diagonal, ~0 elsewhere.
  l.beta_raw = Tensor::full({channels}, softplus_inv(1.0f - kGdnBetaMin));
  l.gamma_raw = Tensor::full({channels, channels}, softplus_inv(1e-4f));
  const float diag = softplus_inv(0.1f);
  for (int i = 0; i < channels; ++i) {
    l.gamma_raw.data[static_cast<size_t>(i) * channels + i] = diag;
  }
  return l;
}

Var GdnLayer::forward(Binder& bind, Var x) const {
  Graph& g = bind.graph();
  Var beta = g.add_scalar(g.softplus(bind(beta_raw)), kGdnBetaMin);
  Var gamma = g.softplus(bind(gamma_raw));
  return g.gdn(x, beta, gamma, inverse);
}

namespace {
float softplus_f(float x) {
  if (x > 20.0f) return x;
  return std::log1p(std::exp(static_cast<double>(x)));
}
}  // namespace

Tensor GdnLayer::beta() const {
  Tensor out(beta_raw.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = kGdnBetaMin + softplus_f(beta_raw.data[i]);
  return out;
}

Tensor GdnLayer::gamma() const {
  Tensor out(gamma_raw.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = softplus_f(gamma_raw.data[i]);
  return out;
}

void GdnLayer::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + ".beta_raw", beta_raw);
  v(prefix + ".gamma_raw", gamma_raw);
}

LinearLayer LinearLayer::make(int in, int out, Rng& rng) {
  LinearLayer l;
  l.w = Tensor({out, in});
  l.w.fill_normal(rng, 0.0f, static_cast<float>(std::sqrt(2.0 / in)));
  l.b = Tensor({out});
  return l;
}

Var LinearLayer::forward(Binder& bind, Var x) const {
  Graph& g = bind.graph();
  const int in = w.dim(1), out = w.dim(0);
  Var col = g.reshape(x, {in, 1});
  Var y = g.matmul(bind(w), col);
  y = g.add(y, g.reshape(bind(b), {out, 1}));
  return g.reshape(y, {out});
}

void LinearLayer::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + ".w", w);
  v(prefix + ".b", b);
}

}  // namespace cosmic
