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

#include "cosmic/entropy.hpp"

#include <algorithm>
#include <cmath>

#include "cosmic/detmath.hpp"
#include "cosmic/errors.hpp"

namespace cosmic {

Tensor quantize(const Tensor& y, QuantizeMode mode, Rng* rng) {
  Tensor out(y.shape);
  if (mode == QuantizeMode::kRound) {
    int64_t saturated = 0;
    float worst = 0.0f;
    for (size_t i = 0; i < y.data.size(); ++i) {
      const float r = std::round(y.data[i]);
      if (r < static_cast<float>(kAlphabetMin) || r > static_cast<float>(kAlphabetMax)) {
        ++saturated;
        if (std::fabs(r) > std::fabs(worst)) worst = r;
      }
      out.data[i] = r;
    }
    if (saturated > 0) {
      throw NumericError("quantize: " + std::to_string(saturated) +
                         " values saturate the alphabet [-32768, 32768), worst " + std::to_string(worst));
    }
  } else {
    if (rng == nullptr) throw MismatchError("quantize: noise mode needs an rng");
    for (size_t i = 0; i < y.data.size(); ++i) {
      out.data[i] = y.data[i] + static_cast<float>(rng->uniform() - 0.5);
    }
  }
  return out;
}

double gaussian_likelihood(int32_t symbol, double mu, double sigma) {
  // float32 pipelines deliver kSigmaMin rounded to float; compare at that width
  if (static_cast<float>(sigma) < static_cast<float>(kSigmaMin)) {
    throw NumericError("gaussian_likelihood: sigma below minimum");
  }
  const double a = (symbol + 0.5 - mu) / sigma;
  const double b = (symbol - 0.5 - mu) / sigma;
  const double p = 0.5 * std::erfc(-a * M_SQRT1_2) - 0.5 * std::erfc(-b * M_SQRT1_2);
  return std::max(p, kProbabilityFloor);
}

double logistic_likelihood(int32_t symbol, double loc, double scale) {
  if (scale <= 0.0) throw NumericError("logistic_likelihood: scale must be positive");
  const double a = (symbol + 0.5 - loc) / scale;
  const double b = (symbol - 0.5 - loc) / scale;
  const double sa = 1.0 / (1.0 + std::exp(-a));
  const double sb = 1.0 / (1.0 + std::exp(-b));
  return std::max(sa - sb, kProbabilityFloor);
}

FactorizedPrior FactorizedPrior::make(int channels) {
  FactorizedPrior p;
  p.loc = Tensor({channels});
  p.scale_raw = Tensor::full({channels}, softplus_inv(1.0f));
  return p;
}

double FactorizedPrior::channel_scale(int c) const {
  const double raw = scale_raw.data[static_cast<size_t>(c)];
  const double sp = raw > 20.0 ? raw : std::log1p(std::exp(raw));
  return kPriorScaleMin + sp;
}

Var FactorizedPrior::bind_loc_full(Binder& bind, const std::vector<int>& zeta_shape) const {
  Graph& g = bind.graph();
  Var locv = bind(loc);
  // broadcast per-channel over the spatial grid
  Var zero = g.constant(Tensor(zeta_shape));
  return g.broadcast_add_channel(zero, locv);
}

Var FactorizedPrior::bind_scale_full(Binder& bind, const std::vector<int>& zeta_shape) const {
  Graph& g = bind.graph();
  Var s = g.add_scalar(g.softplus(bind(scale_raw)), kPriorScaleMin);
  Var zero = g.constant(Tensor(zeta_shape));
  return g.broadcast_add_channel(zero, s);
}

void FactorizedPrior::visit(const std::string& prefix, const ParamVisitor& v) {
  v(prefix + ".loc", loc);
  v(prefix + ".scale_raw", scale_raw);
}

double rate_estimate(const LatentCode& code, const GaussianModel& model,
                     const FactorizedPrior& prior) {
  if (!code.main.same_shape(model.mu) || !code.main.same_shape(model.sigma)) {
    throw MismatchError("rate_estimate: model grids " + shape_str(model.mu.shape) +
                        " vs code " + shape_str(code.main.shape));
  }
  double bits = 0.0;
  for (size_t i = 0; i < code.main.data.size(); ++i) {
    const int32_t s = static_cast<int32_t>(code.main.data[i]);
    bits += -std::log2(gaussian_likelihood(s, model.mu.data[i], model.sigma.data[i]));
  }
  if (code.hyper.numel() > 0) {
    const int ch = code.hyper.dim(0);
    const size_t plane = code.hyper.data.size() / static_cast<size_t>(ch);
    if (prior.loc.numel() != ch) {
      throw MismatchError("rate_estimate: prior channels " + shape_str(prior.loc.shape) +
                          " vs hyper " + shape_str(code.hyper.shape));
    }
    for (int c = 0; c < ch; ++c) {
      const double loc = prior.loc.data[static_cast<size_t>(c)];
      const double scale = prior.channel_scale(c);
      for (size_t i = 0; i < plane; ++i) {
        const int32_t s = static_cast<int32_t>(code.hyper.data[c * plane + i]);
        bits += -std::log2(logistic_likelihood(s, loc, scale));
      }
    }
  }
  return bits;
}

// ---------------------------------------------------------------------------
// CDF tables

namespace {

constexpr double kCoderSigmaMax = 64.0;
constexpr double kWindowSigmas = 16.0;

double det_cdf(const SymbolDist& d, double x) {
  const double u = (x - d.center) / d.spread;
  return d.is_logistic ? det_logistic(u) : det_normal_cdf(u);
}

}  // namespace

QuantizedCdf build_cdf(const SymbolDist& dist) {
  SymbolDist d = dist;
  d.spread = std::min(std::max(d.spread, kSigmaMin * 0.05), kCoderSigmaMax);
  d.center = std::min(std::max(d.center, -40000.0), 40000.0);

  const double half = kWindowSigmas * d.spread;
  int64_t lo = static_cast<int64_t>(std::floor(d.center - half));
  int64_t hi = static_cast<int64_t>(std::ceil(d.center + half));
  lo = std::max<int64_t>(lo, kAlphabetMin);
  hi = std::min<int64_t>(hi, kAlphabetMax);
  if (lo > hi) {  // window fell outside the alphabet; keep one bin
    lo = hi = std::min<int64_t>(std::max<int64_t>(llround(d.center), kAlphabetMin), kAlphabetMax);
  }

  const int n_window = static_cast<int>(hi - lo + 1);
  const int n_bins = n_window + 2;  // + low/high escape bins
  std::vector<double> p(static_cast<size_t>(n_bins));
  p[0] = std::max(det_cdf(d, static_cast<double>(lo) - 0.5), 0.0);
  for (int i = 0; i < n_window; ++i) {
    const double s = static_cast<double>(lo + i);
    p[static_cast<size_t>(i + 1)] = std::max(det_cdf(d, s + 0.5) - det_cdf(d, s - 0.5), 0.0);
  }
  p[static_cast<size_t>(n_bins - 1)] = std::max(1.0 - det_cdf(d, static_cast<double>(hi) + 0.5), 0.0);

  // 16-bit frequencies: one count reserved per bin, remainder by flooring,
  // leftover counts assigned to the most probable bin.
  const uint32_t scale = kFreqTotal - static_cast<uint32_t>(n_bins);
  std::vector<uint32_t> freq(static_cast<size_t>(n_bins));
  uint32_t total = 0;
  size_t argmax = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    freq[i] = 1u + static_cast<uint32_t>(p[i] * scale);
    total += freq[i];
    if (freq[i] > freq[argmax]) argmax = i;
  }
  if (total > kFreqTotal) {  // only possible through degenerate rounding; steal back
    uint32_t excess = total - kFreqTotal;
    if (freq[argmax] <= excess) throw NumericError("build_cdf: cannot normalize frequencies");
    freq[argmax] -= excess;
  } else {
    freq[argmax] += kFreqTotal - total;
  }

  QuantizedCdf cdf;
  cdf.lo = static_cast<int32_t>(lo);
  cdf.hi = static_cast<int32_t>(hi);
  cdf.cum.resize(static_cast<size_t>(n_bins) + 1);
  cdf.cum[0] = 0;
  for (int i = 0; i < n_bins; ++i) cdf.cum[static_cast<size_t>(i) + 1] = cdf.cum[static_cast<size_t>(i)] + freq[static_cast<size_t>(i)];
  return cdf;
}

namespace {

void check_symbol_admissible(int32_t s) {
  if (s < kAlphabetMin || s > kAlphabetMax) {
    throw NumericError("range coder: symbol " + std::to_string(s) + " outside alphabet");
  }
}

void encode_raw16(RangeEncoder& enc, int32_t s) {
  const uint32_t u = static_cast<uint32_t>(s - kAlphabetMin);
  enc.encode(u, 1);
}

int32_t decode_raw16(RangeDecoder& dec) {
  const uint32_t u = dec.peek();
  dec.pop(u, 1);
  return static_cast<int32_t>(u) + kAlphabetMin;
}

}  // namespace

std::vector<uint8_t> range_encode(const std::vector<int32_t>& symbols,
                                  const std::vector<SymbolDist>& models) {
  if (symbols.size() != models.size()) {
    throw MismatchError("range_encode: " + std::to_string(symbols.size()) + " symbols vs " +
                        std::to_string(models.size()) + " models");
  }
  RangeEncoder enc;
  for (size_t i = 0; i < symbols.size(); ++i) {
    const int32_t s = symbols[i];
    check_symbol_admissible(s);
    const QuantizedCdf cdf = build_cdf(models[i]);
    const int n_bins = static_cast<int>(cdf.cum.size()) - 1;
    int bin;
    if (s < cdf.lo) {
      bin = 0;
    } else if (s > cdf.hi) {
      bin = n_bins - 1;
    } else {
      bin = 1 + (s - cdf.lo);
    }
    enc.encode(cdf.cum[static_cast<size_t>(bin)],
               cdf.cum[static_cast<size_t>(bin) + 1] - cdf.cum[static_cast<size_t>(bin)]);
    if (bin == 0 || bin == n_bins - 1) encode_raw16(enc, s);
  }
  return enc.finish();
}

std::vector<int32_t> range_decode(const std::vector<uint8_t>& bytes,
                                  const std::vector<SymbolDist>& models) {
  RangeDecoder dec(bytes);
  std::vector<int32_t> out;
  out.reserve(models.size());
  for (const SymbolDist& m : models) {
    const QuantizedCdf cdf = build_cdf(m);
    const uint32_t v = dec.peek();
    // cum is strictly increasing; find the bin containing v
    const auto it = std::upper_bound(cdf.cum.begin(), cdf.cum.end(), v);
    const int bin = static_cast<int>(it - cdf.cum.begin()) - 1;
    const int n_bins = static_cast<int>(cdf.cum.size()) - 1;
    dec.pop(cdf.cum[static_cast<size_t>(bin)],
            cdf.cum[static_cast<size_t>(bin) + 1] - cdf.cum[static_cast<size_t>(bin)]);
    if (bin == 0 || bin == n_bins - 1) {
      out.push_back(decode_raw16(dec));
    } else {
      out.push_back(cdf.lo + (bin - 1));
    }
  }
  return out;
}

std::vector<SymbolDist> gaussian_dists(const GaussianModel& model) {
  std::vector<SymbolDist> dists(model.mu.data.size());
  for (size_t i = 0; i < dists.size(); ++i) {
    dists[i] = SymbolDist{model.mu.data[i], std::max<double>(model.sigma.data[i], kSigmaMin), false};
  }
  return dists;
}

std::vector<SymbolDist> prior_dists(const FactorizedPrior& prior, const std::vector<int>& zeta_shape) {
  const int ch = zeta_shape[0];
  const size_t plane = static_cast<size_t>(zeta_shape[1]) * zeta_shape[2];
  std::vector<SymbolDist> dists(static_cast<size_t>(ch) * plane);
  for (int c = 0; c < ch; ++c) {
    const SymbolDist d{prior.loc.data[static_cast<size_t>(c)], prior.channel_scale(c), true};
    for (size_t i = 0; i < plane; ++i) dists[c * plane + i] = d;
  }
  return dists;
}

std::vector<int32_t> tensor_to_symbols(const Tensor& t) {
  std::vector<int32_t> out(t.data.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int32_t>(t.data[i]);
  return out;
}

Tensor symbols_to_tensor(const std::vector<int32_t>& symbols, const std::vector<int>& shape) {
  Tensor t(shape);
  if (static_cast<int64_t>(symbols.size()) != t.numel()) {
    throw MismatchError("symbols_to_tensor: " + std::to_string(symbols.size()) + " vs " + shape_str(shape));
  }
  for (size_t i = 0; i < symbols.size(); ++i) t.data[i] = static_cast<float>(symbols[i]);
  return t;
}

// ---------------------------------------------------------------------------
// hyper-network

HyperEncoderNet HyperEncoderNet::make(int latent_channels, int hyper_channels, Rng& rng) {
  HyperEncoderNet net;
  net.c1 = Conv2dLayer::make(latent_channels, hyper_channels, 5, 5, 2, 2, rng);
  net.c2 = Conv2dLayer::make(hyper_channels, hyper_channels, 5, 5, 2, 2, rng);
  return net;
}

Var HyperEncoderNet::forward(Binder& bind, Var y) const {
  Graph& g = bind.graph();
  Var h = g.abs(y);
  h = c1.forward(bind, h);
  h = g.silu(h);
  return c2.forward(bind, h);
}

void HyperEncoderNet::visit(const std::string& prefix, const ParamVisitor& v) {
  c1.visit(prefix + ".c1", v);
  c2.visit(prefix + ".c2", v);
}

HyperDecoderNet HyperDecoderNet::make(int latent_channels, int hyper_channels, Rng& rng) {
  HyperDecoderNet net;
  net.t1 = TConv2dLayer::make(hyper_channels, hyper_channels, 5, 5, 2, 2, 1, rng);
  net.t2 = TConv2dLayer::make(hyper_channels, 2 * latent_channels, 5, 5, 2, 2, 1, rng);
  // start near (mu ~ 0, sigma ~ sigma_min + softplus(0))
  for (float& v : net.t2.w.data) v *= 0.3f;
  return net;
}

std::pair<Var, Var> HyperDecoderNet::forward(Binder& bind, Var zeta_hat, int target_h,
                                             int target_w) const {
  Graph& g = bind.graph();
  Var h = t1.forward(bind, zeta_hat);
  h = g.silu(h);
  h = t2.forward(bind, h);
  h = g.crop_spatial(h, target_h, target_w);
  const int two_c = g.value(h).dim(0);
  Var mu = g.slice_channels(h, 0, two_c / 2);
  Var sigma_raw = g.slice_channels(h, two_c / 2, two_c / 2);
  Var sigma = g.add_scalar(g.softplus(sigma_raw), kSigmaMin);
  return {mu, sigma};
}

int hyper_extent(int latent_extent) {
  const auto down = [](int n) { return (n - 1) / 2 + 1; };
  return down(down(latent_extent));
}

void HyperDecoderNet::visit(const std::string& prefix, const ParamVisitor& v) {
  t1.visit(prefix + ".t1", v);
  t2.visit(prefix + ".t2", v);
}

}  // namespace cosmic
