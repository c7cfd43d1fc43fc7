#pragma once

// Shared by the unit suite and the acceptance suite.

#include <array>
#include <cmath>
#include <vector>

#include "cosmic/rng.hpp"
#include "cosmic/tensor.hpp"

namespace cosmic::testutil {

// Independent MS-SSIM oracle: direct 2-D window sums, no separable filtering,
// no shared code with the production path.
inline double oracle_ms_ssim(const Tensor& x, const Tensor& y, double peak, int scales) {
  constexpr int kW = 11;
  constexpr double kSigma = 1.5;
  const std::array<double, 5> base_w = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  std::array<double, 5> w{};
  double wsum = 0.0;
  for (int s = 0; s < scales; ++s) wsum += base_w[static_cast<size_t>(s)];
  for (int s = 0; s < scales; ++s) w[static_cast<size_t>(s)] = base_w[static_cast<size_t>(s)] / wsum;

  double window[kW][kW];
  double wt = 0.0;
  for (int i = 0; i < kW; ++i) {
    for (int j = 0; j < kW; ++j) {
      const double di = i - 5.0, dj = j - 5.0;
      window[i][j] = std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
      wt += window[i][j];
    }
  }
  for (int i = 0; i < kW; ++i) {
    for (int j = 0; j < kW; ++j) window[i][j] /= wt;
  }

  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  const int channels = x.dim(0);

  double total = 0.0;
  for (int ch = 0; ch < channels; ++ch) {
    std::vector<double> a, b;
    int h = x.dim(1), wdt = x.dim(2);
    a.resize(static_cast<size_t>(h) * wdt);
    b.resize(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
      a[i] = x.data[static_cast<size_t>(ch) * a.size() + i];
      b[i] = y.data[static_cast<size_t>(ch) * a.size() + i];
    }
    double prod = 1.0;
    for (int s = 0; s < scales; ++s) {
      double cs_sum = 0.0, ssim_sum = 0.0;
      int count = 0;
      for (int oy = 0; oy + kW <= h; ++oy) {
        for (int ox = 0; ox + kW <= wdt; ++ox) {
          double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
          for (int i = 0; i < kW; ++i) {
            for (int j = 0; j < kW; ++j) {
              const double va = a[static_cast<size_t>(oy + i) * wdt + ox + j];
              const double vb = b[static_cast<size_t>(oy + i) * wdt + ox + j];
              ma += window[i][j] * va;
              mb += window[i][j] * vb;
              maa += window[i][j] * va * va;
              mbb += window[i][j] * vb * vb;
              mab += window[i][j] * va * vb;
            }
          }
          const double var_a = maa - ma * ma;
          const double var_b = mbb - mb * mb;
          const double cov = mab - ma * mb;
          const double cs = (2.0 * cov + c2) / (var_a + var_b + c2);
          const double lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
          cs_sum += cs;
          ssim_sum += lum * cs;
          ++count;
        }
      }
      const double term = (s == scales - 1) ? ssim_sum / count : cs_sum / count;
      prod *= std::pow(std::max(term, 0.0), w[static_cast<size_t>(s)]);
      if (s + 1 < scales) {
        const int nh = h / 2, nw = wdt / 2;
        std::vector<double> na(static_cast<size_t>(nh) * nw), nb(na.size());
        for (int yy = 0; yy < nh; ++yy) {
          for (int xx = 0; xx < nw; ++xx) {
            na[static_cast<size_t>(yy) * nw + xx] =
                0.25 * (a[static_cast<size_t>(2 * yy) * wdt + 2 * xx] + a[static_cast<size_t>(2 * yy) * wdt + 2 * xx + 1] +
                        a[static_cast<size_t>(2 * yy + 1) * wdt + 2 * xx] + a[static_cast<size_t>(2 * yy + 1) * wdt + 2 * xx + 1]);
            nb[static_cast<size_t>(yy) * nw + xx] =
                0.25 * (b[static_cast<size_t>(2 * yy) * wdt + 2 * xx] + b[static_cast<size_t>(2 * yy) * wdt + 2 * xx + 1] +
                        b[static_cast<size_t>(2 * yy + 1) * wdt + 2 * xx] + b[static_cast<size_t>(2 * yy + 1) * wdt + 2 * xx + 1]);
          }
        }
        a = std::move(na);
        b = std::move(nb);
        h = nh;
        wdt = nw;
      }
    }
    total += prod;
  }
  return total / channels;
}

inline Tensor textured_image(int size, uint64_t seed) {
  Tensor img({3, size, size});
  Rng rng(seed);
  const double fx = rng.uniform(2.0, 6.0), fy = rng.uniform(2.0, 6.0);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double v = 0.5 + 0.25 * std::sin(2 * M_PI * fx * x / size + c) *
                                   std::cos(2 * M_PI * fy * y / size) +
                         0.1 * rng.uniform(-1.0, 1.0);
        img.at3(c, y, x) = static_cast<float>(std::min(std::max(v, 0.0), 1.0));
      }
    }
  }
  return img;
}

}  // namespace cosmic::testutil
