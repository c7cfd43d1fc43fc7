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
#include <utility>
#include <vector>

#include "cosmic/layers.hpp"
#include "cosmic/range_coder.hpp"
#include "cosmic/tensor.hpp"

namespace cosmic {

// Symbols live in a bounded alphabet shared by quantizer and coder.
inline constexpr int32_t kAlphabetMin = -32768;
inline constexpr int32_t kAlphabetMax = 32767;

// Gaussian conditionals never report a scale below this.
inline constexpr double kSigmaMin = 0.11;

enum class QuantizeMode {
  kRound,  // nearest integer, ties away from zero
  kNoise,  // additive uniform noise on [-0.5, 0.5), training proxy
};

// Round mode rejects values that leave the alphabet (saturation report).
// Noise mode needs the caller's rng.
Tensor quantize(const Tensor& y, QuantizeMode mode, Rng* rng = nullptr);

// Integer-quantized latents: the main grid and its hyperprior grid.
struct LatentCode {
  Tensor main;   // [C,h,w], integer-valued floats
  Tensor hyper;  // [Ch,h',w'], integer-valued floats
};

// Per-symbol Gaussian conditionals decoded from the hyperprior.
struct GaussianModel {
  Tensor mu;
  Tensor sigma;  // every entry >= kSigmaMin
};

// P(s) = CDF(s+0.5) - CDF(s-0.5), floored at kProbabilityFloor (2^-16).
double gaussian_likelihood(int32_t symbol, double mu, double sigma);
double logistic_likelihood(int32_t symbol, double loc, double scale);

// Per-channel univariate density for the hyper latent: logistic with learned
// location and scale (scale kept positive through softplus).
struct FactorizedPrior {
  Tensor loc;        // [C]
  Tensor scale_raw;  // [C]; scale = kPriorScaleMin + softplus(scale_raw)

  static FactorizedPrior make(int channels);
  double channel_scale(int c) const;
  Var bind_loc_full(Binder& bind, const std::vector<int>& zeta_shape) const;
  Var bind_scale_full(Binder& bind, const std::vector<int>& zeta_shape) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};
inline constexpr double kPriorScaleMin = 0.01;

// Total -log2 p over main symbols under `model` plus hyper symbols under
// `prior`, with the probability floor applied.
double rate_estimate(const LatentCode& code, const GaussianModel& model,
                     const FactorizedPrior& prior);

// ---------------------------------------------------------------------------
// Normative symbol coding.
//
// Each symbol is coded against a quantized CDF derived from its model. The
// window covers mu +/- 16 sigma; two escape bins at the tails catch admissible
// symbols outside it (coded as a raw 16-bit value afterwards). Frequencies
// are 16-bit with every bin >= 1, built from deterministic IEEE-754 math so
// the payload is byte-identical across platforms.

struct SymbolDist {
  double center = 0.0;  // mu (gaussian) or loc (logistic)
  double spread = 1.0;  // sigma or logistic scale
  bool is_logistic = false;
};

struct QuantizedCdf {
  int32_t lo = 0;              // inclusive window start
  int32_t hi = 0;              // inclusive window end
  std::vector<uint32_t> cum;   // size = bins+1; bins = (hi-lo+1) + 2 escapes
};

QuantizedCdf build_cdf(const SymbolDist& dist);

std::vector<uint8_t> range_encode(const std::vector<int32_t>& symbols,
                                  const std::vector<SymbolDist>& models);
std::vector<int32_t> range_decode(const std::vector<uint8_t>& bytes,
                                  const std::vector<SymbolDist>& models);

// Model sequences for the two payloads (row-major over the symbol grids).
std::vector<SymbolDist> gaussian_dists(const GaussianModel& model);
std::vector<SymbolDist> prior_dists(const FactorizedPrior& prior, const std::vector<int>& zeta_shape);

std::vector<int32_t> tensor_to_symbols(const Tensor& t);
Tensor symbols_to_tensor(const std::vector<int32_t>& symbols, const std::vector<int>& shape);

// ---------------------------------------------------------------------------
// Hyper-network: two stride-2 convs down (abs front end), two stride-2
// transposed convs up to per-symbol (mu, sigma).

struct HyperEncoderNet {
  Conv2dLayer c1;  // latent -> hyper, 5x5 s2
  Conv2dLayer c2;  // hyper -> hyper, 5x5 s2

  static HyperEncoderNet make(int latent_channels, int hyper_channels, Rng& rng);
  Var forward(Binder& bind, Var y) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

struct HyperDecoderNet {
  TConv2dLayer t1;  // hyper -> hyper, 5x5 s2
  TConv2dLayer t2;  // hyper -> 2*latent, 5x5 s2

  static HyperDecoderNet make(int latent_channels, int hyper_channels, Rng& rng);
  // Returns (mu, sigma) on the latent grid given by (target_h, target_w);
  // sigma = kSigmaMin + softplus(raw). The transposed-conv output overshoots
  // when the latent extent is not divisible by 4 and is cropped to fit.
  std::pair<Var, Var> forward(Binder& bind, Var zeta_hat, int target_h, int target_w) const;
  void visit(const std::string& prefix, const ParamVisitor& v);
};

// Hyper grid extent for a latent extent (two stride-2 k=5 p=2 convolutions).
int hyper_extent(int latent_extent);

}  // namespace cosmic
