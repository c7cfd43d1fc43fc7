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

#include "cosmic/metrics.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "cosmic/errors.hpp"
#include "cosmic/kernels.hpp"

namespace cosmic {

double psnr(const Tensor& x, const Tensor& y, double peak) {
  if (!x.same_shape(y)) {
    throw MismatchError("psnr: shapes " + shape_str(x.shape) + " vs " + shape_str(y.shape));
  }
  double acc = 0.0;
  for (size_t i = 0; i < x.data.size(); ++i) {
    const double d = static_cast<double>(x.data[i]) - y.data[i];
    acc += d * d;
  }
  const double mse = acc / static_cast<double>(x.numel());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

namespace {

constexpr int kWin = 11;
constexpr double kWinSigma = 1.5;
constexpr std::array<double, 5> kScaleWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

std::array<double, kWin> gaussian_taps() {
  std::array<double, kWin> taps{};
  double total = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - (kWin - 1) / 2.0;
    taps[static_cast<size_t>(i)] = std::exp(-d * d / (2.0 * kWinSigma * kWinSigma));
    total += taps[static_cast<size_t>(i)];
  }
  for (double& t : taps) t /= total;
  return taps;
}

// Separable valid-region Gaussian filter of one channel plane.
std::vector<double> blur_valid(const std::vector<double>& img, int h, int w, int& oh, int& ow) {
  static const std::array<double, kWin> taps = gaussian_taps();
  oh = h - kWin + 1;
  ow = w - kWin + 1;
  std::vector<double> rows(static_cast<size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWin; ++k) acc += taps[static_cast<size_t>(k)] * img[static_cast<size_t>(y) * w + x + k];
      rows[static_cast<size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWin; ++k) acc += taps[static_cast<size_t>(k)] * rows[static_cast<size_t>(y + k) * ow + x];
      out[static_cast<size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

struct ScaleScore {
  double cs = 0.0;
  double ssim = 0.0;  // luminance * cs
};

// Mean SSIM / contrast-structure over the valid map of one channel pair.
ScaleScore ssim_channel(const std::vector<double>& a, const std::vector<double>& b, int h, int w,
                        double peak) {
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);

  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  int oh = 0, ow = 0;
  const auto mu_a = blur_valid(a, h, w, oh, ow);
  const auto mu_b = blur_valid(b, h, w, oh, ow);
  const auto m_aa = blur_valid(aa, h, w, oh, ow);
  const auto m_bb = blur_valid(bb, h, w, oh, ow);
  const auto m_ab = blur_valid(ab, h, w, oh, ow);

  double cs_sum = 0.0, ssim_sum = 0.0;
  for (size_t i = 0; i < mu_a.size(); ++i) {
    const double va = m_aa[i] - mu_a[i] * mu_a[i];
    const double vb = m_bb[i] - mu_b[i] * mu_b[i];
    const double cov = m_ab[i] - mu_a[i] * mu_b[i];
    const double cs = (2.0 * cov + c2) / (va + vb + c2);
    const double lum = (2.0 * mu_a[i] * mu_b[i] + c1) / (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1);
    cs_sum += cs;
    ssim_sum += lum * cs;
  }
  const double n = static_cast<double>(mu_a.size());
  return ScaleScore{cs_sum / n, ssim_sum / n};
}

std::vector<double> channel_plane(const Tensor& t, int c) {
  const int h = t.dim(1), w = t.dim(2);
  std::vector<double> out(static_cast<size_t>(h) * w);
  for (size_t i = 0; i < out.size(); ++i) out[i] = t.data[static_cast<size_t>(c) * out.size() + i];
  return out;
}

std::vector<double> pool2(const std::vector<double>& img, int h, int w, int& oh, int& ow) {
  oh = h / 2;
  ow = w / 2;
  std::vector<double> out(static_cast<size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      out[static_cast<size_t>(y) * ow + x] =
          0.25 * (img[static_cast<size_t>(2 * y) * w + 2 * x] + img[static_cast<size_t>(2 * y) * w + 2 * x + 1] +
                  img[static_cast<size_t>(2 * y + 1) * w + 2 * x] + img[static_cast<size_t>(2 * y + 1) * w + 2 * x + 1]);
    }
  }
  return out;
}

int feasible_scales(int h, int w) {
  int scales = 0;
  int m = std::min(h, w);
  while (m >= kWin && scales < 5) {
    ++scales;
    m /= 2;
  }
  return scales;
}

}  // namespace

double ms_ssim(const Tensor& x, const Tensor& y, double peak, int force_scales) {
  if (!x.same_shape(y) || x.rank() != 3) {
    throw MismatchError("ms_ssim: need equal rank-3 tensors, got " + shape_str(x.shape) + " vs " +
                        shape_str(y.shape));
  }
  const int ch = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int feasible = feasible_scales(h, w);
  int scales = force_scales == 0 ? std::min(feasible, 5) : force_scales;
  if (scales < 1 || scales > 5 || scales > feasible) {
    throw MismatchError("ms_ssim: " + std::to_string(force_scales) + " scales infeasible for " +
                        shape_str(x.shape) + " (feasible " + std::to_string(feasible) + ")");
  }

  std::array<double, 5> weights{};
  double wsum = 0.0;
  for (int s = 0; s < scales; ++s) wsum += kScaleWeights[static_cast<size_t>(s)];
  for (int s = 0; s < scales; ++s) weights[static_cast<size_t>(s)] = kScaleWeights[static_cast<size_t>(s)] / wsum;

  double score_product_sum = 0.0;
  for (int c = 0; c < ch; ++c) {
    std::vector<double> a = channel_plane(x, c);
    std::vector<double> b = channel_plane(y, c);
    int cur_h = h, cur_w = w;
    double prod = 1.0;
    for (int s = 0; s < scales; ++s) {
      const ScaleScore sc = ssim_channel(a, b, cur_h, cur_w, peak);
      const double term = (s == scales - 1) ? sc.ssim : sc.cs;
      prod *= std::pow(std::max(term, 0.0), weights[static_cast<size_t>(s)]);
      if (s + 1 < scales) {
        int nh = 0, nw = 0;
        a = pool2(a, cur_h, cur_w, nh, nw);
        b = pool2(b, cur_h, cur_w, nh, nw);
        cur_h = nh;
        cur_w = nw;
      }
    }
    score_product_sum += prod;
  }
  return score_product_sum / ch;
}

double bpp(size_t hyper_payload_bytes, size_t main_payload_bytes, int width, int height) {
  if (width < 1 || height < 1) throw MismatchError("bpp: non-positive dimensions");
  return 8.0 * static_cast<double>(hyper_payload_bytes + main_payload_bytes) /
         (static_cast<double>(width) * height);
}

}  // namespace cosmic
