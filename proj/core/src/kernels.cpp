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

#include "cosmic/kernels.hpp"

#include <cmath>

#include "cosmic/errors.hpp"

namespace cosmic {

namespace {

void require_rank3(const Tensor& t, const char* what) {
  if (t.rank() != 3) throw MismatchError(std::string(what) + ": expected rank-3 tensor, got " + shape_str(t.shape));
}

void require_rank4(const Tensor& t, const char* what) {
  if (t.rank() != 4) throw MismatchError(std::string(what) + ": expected rank-4 tensor, got " + shape_str(t.shape));
}

int conv_out_extent(int in, int pad, int k, int stride) {
  return (in + 2 * pad - k) / stride + 1;
}

}  // namespace

Tensor conv2d_fwd(const Tensor& input, const Tensor& weight, const Tensor& bias, ConvGeom g) {
  require_rank3(input, "conv2d input");
  require_rank4(weight, "conv2d weight");
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = weight.dim(0), cin_g = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  if (g.groups < 1 || cin % g.groups != 0 || cout % g.groups != 0) {
    throw MismatchError("conv2d: groups " + std::to_string(g.groups) + " does not divide channels " +
                        std::to_string(cin) + "->" + std::to_string(cout));
  }
  if (cin / g.groups != cin_g) {
    throw MismatchError("conv2d: weight " + shape_str(weight.shape) + " expects " +
                        std::to_string(cin_g * g.groups) + " input channels, input has " + shape_str(input.shape));
  }
  if (!bias.data.empty() && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw MismatchError("conv2d: bias " + shape_str(bias.shape) + " vs " + std::to_string(cout) + " output channels");
  }
  const int oh = conv_out_extent(h, g.pad_y, kh, g.stride);
  const int ow = conv_out_extent(w, g.pad_x, kw, g.stride);
  if (oh < 1 || ow < 1) {
    throw MismatchError("conv2d: output would be empty for input " + shape_str(input.shape) +
                        " weight " + shape_str(weight.shape) + " stride " + std::to_string(g.stride) +
                        " pad " + std::to_string(g.pad_y) + "/" + std::to_string(g.pad_x));
  }

  Tensor out({cout, oh, ow});
  const int cout_g = cout / g.groups;
  const float* xd = input.data.data();
  const float* wd = weight.data.data();
  float* od = out.data.data();

  if (kh == 1 && kw == 1 && g.pad_y == 0 && g.pad_x == 0) {
    // pointwise fast path: a channel-mixing matrix over the pixel grid,
    // accumulated in float64 like every other reduction
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < cout; ++oc) {
      const int ic0 = (oc / cout_g) * cin_g;
      const double b = bias.data.empty() ? 0.0 : bias.data[static_cast<size_t>(oc)];
      std::vector<double> acc(static_cast<size_t>(oh) * ow, b);
      for (int icl = 0; icl < cin_g; ++icl) {
        const double wv = wd[static_cast<size_t>(oc) * cin_g + icl];
        const float* xrow = xd + (static_cast<size_t>(ic0 + icl) * h) * w;
        for (int oy = 0; oy < oh; ++oy) {
          const float* xr = xrow + static_cast<size_t>(oy) * g.stride * w;
          double* arow = acc.data() + static_cast<size_t>(oy) * ow;
          for (int ox = 0; ox < ow; ++ox) arow[ox] += wv * xr[ox * g.stride];
        }
      }
      float* orow = od + static_cast<size_t>(oc) * oh * ow;
      for (size_t i = 0; i < acc.size(); ++i) orow[i] = static_cast<float>(acc[i]);
    }
    check_finite(out, "conv2d output");
    return out;
  }

#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < cout; ++oc) {
    const int grp = oc / cout_g;
    const int ic0 = grp * cin_g;
    const float b = bias.data.empty() ? 0.0f : bias.data[static_cast<size_t>(oc)];
    for (int oy = 0; oy < oh; ++oy) {
      const int iy0 = oy * g.stride - g.pad_y;
      const int ky_lo = iy0 < 0 ? -iy0 : 0;
      const int ky_hi = std::min(kh, h - iy0);
      for (int ox = 0; ox < ow; ++ox) {
        const int ix0 = ox * g.stride - g.pad_x;
        const int kx_lo = ix0 < 0 ? -ix0 : 0;
        const int kx_hi = std::min(kw, w - ix0);
        double acc = b;
        for (int icl = 0; icl < cin_g; ++icl) {
          const int ic = ic0 + icl;
          const float* xrow = xd + (static_cast<size_t>(ic) * h) * w;
          const float* wrow = wd + ((static_cast<size_t>(oc) * cin_g + icl) * kh) * kw;
          for (int ky = ky_lo; ky < ky_hi; ++ky) {
            const float* xr = xrow + (iy0 + ky) * w + ix0;
            const float* wr = wrow + ky * kw;
            for (int kx = kx_lo; kx < kx_hi; ++kx) {
              acc += static_cast<double>(xr[kx]) * wr[kx];
            }
          }
        }
        od[(static_cast<size_t>(oc) * oh + oy) * ow + ox] = static_cast<float>(acc);
      }
    }
  }
  check_finite(out, "conv2d output");
  return out;
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& weight,
                         const std::vector<int>& input_shape, ConvGeom g) {
  const int h = input_shape[1], w = input_shape[2];
  const int cout = weight.dim(0), cin_g = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  const int oh = grad_out.dim(1), ow = grad_out.dim(2);
  const int cout_g = cout / g.groups;

  Tensor gx(input_shape);
  for (int oc = 0; oc < cout; ++oc) {
    const int grp = oc / cout_g;
    const int ic0 = grp * cin_g;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const float go = grad_out.data[(static_cast<size_t>(oc) * oh + oy) * ow + ox];
        if (go == 0.0f) continue;
        for (int icl = 0; icl < cin_g; ++icl) {
          const int ic = ic0 + icl;
          for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy * g.stride + ky - g.pad_y;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ix = ox * g.stride + kx - g.pad_x;
              if (ix < 0 || ix >= w) continue;
              gx.data[(static_cast<size_t>(ic) * h + iy) * w + ix] +=
                  go * weight.data[((static_cast<size_t>(oc) * cin_g + icl) * kh + ky) * kw + kx];
            }
          }
        }
      }
    }
  }
  return gx;
}

Tensor conv2d_grad_weight(const Tensor& grad_out, const Tensor& input,
                          const std::vector<int>& weight_shape, ConvGeom g) {
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout = weight_shape[0], cin_g = weight_shape[1], kh = weight_shape[2], kw = weight_shape[3];
  const int oh = grad_out.dim(1), ow = grad_out.dim(2);
  const int cout_g = cout / g.groups;
  (void)cin;

  Tensor gw(weight_shape);
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < cout; ++oc) {
    const int grp = oc / cout_g;
    const int ic0 = grp * cin_g;
    for (int icl = 0; icl < cin_g; ++icl) {
      const int ic = ic0 + icl;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          double acc = 0.0;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * g.stride + ky - g.pad_y;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * g.stride + kx - g.pad_x;
              if (ix < 0 || ix >= w) continue;
              acc += static_cast<double>(grad_out.data[(static_cast<size_t>(oc) * oh + oy) * ow + ox]) *
                     input.data[(static_cast<size_t>(ic) * h + iy) * w + ix];
            }
          }
          gw.data[((static_cast<size_t>(oc) * cin_g + icl) * kh + ky) * kw + kx] = static_cast<float>(acc);
        }
      }
    }
  }
  return gw;
}

Tensor tconv2d_fwd(const Tensor& input, const Tensor& weight, const Tensor& bias, TConvGeom g) {
  require_rank3(input, "tconv2d input");
  require_rank4(weight, "tconv2d weight");
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int wcin = weight.dim(0), cout_g = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  if (wcin != cin) {
    throw MismatchError("tconv2d: weight " + shape_str(weight.shape) + " vs input " + shape_str(input.shape));
  }
  if (g.groups != 1 && cin % g.groups != 0) throw MismatchError("tconv2d: bad groups");
  const int cout = cout_g * g.groups;
  const int oh = (h - 1) * g.stride - 2 * g.pad + kh + g.out_pad;
  const int ow = (w - 1) * g.stride - 2 * g.pad + kw + g.out_pad;
  if (oh < 1 || ow < 1) throw MismatchError("tconv2d: empty output");
  if (!bias.data.empty() && (bias.rank() != 1 || bias.dim(0) != cout)) {
    throw MismatchError("tconv2d: bias " + shape_str(bias.shape) + " vs " + std::to_string(cout) + " channels");
  }

  Tensor out({cout, oh, ow});
  const int cin_g = cin / g.groups;
  // Gather form: for each output location, sum input positions that map onto it.
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < cout; ++oc) {
    const int grp = oc / cout_g;
    const int ocl = oc % cout_g;
    const float b = bias.data.empty() ? 0.0f : bias.data[static_cast<size_t>(oc)];
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double acc = b;
        for (int icl = 0; icl < cin_g; ++icl) {
          const int ic = grp * cin_g + icl;
          for (int ky = 0; ky < kh; ++ky) {
            const int ny = oy + g.pad - ky;
            if (ny < 0 || ny % g.stride != 0) continue;
            const int iy = ny / g.stride;
            if (iy >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int nx = ox + g.pad - kx;
              if (nx < 0 || nx % g.stride != 0) continue;
              const int ix = nx / g.stride;
              if (ix >= w) continue;
              acc += static_cast<double>(input.data[(static_cast<size_t>(ic) * h + iy) * w + ix]) *
                     weight.data[((static_cast<size_t>(ic) * cout_g + ocl) * kh + ky) * kw + kx];
            }
          }
        }
        out.data[(static_cast<size_t>(oc) * oh + oy) * ow + ox] = static_cast<float>(acc);
      }
    }
  }
  check_finite(out, "tconv2d output");
  return out;
}

Tensor tconv2d_grad_input(const Tensor& grad_out, const Tensor& weight,
                          const std::vector<int>& input_shape, TConvGeom g) {
  const int cin = input_shape[0], h = input_shape[1], w = input_shape[2];
  const int cout_g = weight.dim(1), kh = weight.dim(2), kw = weight.dim(3);
  const int oh = grad_out.dim(1), ow = grad_out.dim(2);
  const int cin_g = cin / g.groups;

  Tensor gx(input_shape);
#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < cin; ++ic) {
    const int grp = ic / cin_g;
    for (int iy = 0; iy < h; ++iy) {
      for (int ix = 0; ix < w; ++ix) {
        double acc = 0.0;
        for (int ocl = 0; ocl < cout_g; ++ocl) {
          const int oc = grp * cout_g + ocl;
          for (int ky = 0; ky < kh; ++ky) {
            const int oy = iy * g.stride + ky - g.pad;
            if (oy < 0 || oy >= oh) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int ox = ix * g.stride + kx - g.pad;
              if (ox < 0 || ox >= ow) continue;
              acc += static_cast<double>(grad_out.data[(static_cast<size_t>(oc) * oh + oy) * ow + ox]) *
                     weight.data[((static_cast<size_t>(ic) * cout_g + ocl) * kh + ky) * kw + kx];
            }
          }
        }
        gx.data[(static_cast<size_t>(ic) * h + iy) * w + ix] = static_cast<float>(acc);
      }
    }
  }
  return gx;
}

Tensor tconv2d_grad_weight(const Tensor& grad_out, const Tensor& input,
                           const std::vector<int>& weight_shape, TConvGeom g) {
  const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const int cout_g = weight_shape[1], kh = weight_shape[2], kw = weight_shape[3];
  const int oh = grad_out.dim(1), ow = grad_out.dim(2);
  const int cin_g = cin / g.groups;

  Tensor gw(weight_shape);
#pragma omp parallel for schedule(static)
  for (int ic = 0; ic < cin; ++ic) {
    const int grp = ic / cin_g;
    for (int ocl = 0; ocl < cout_g; ++ocl) {
      const int oc = grp * cout_g + ocl;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          double acc = 0.0;
          for (int iy = 0; iy < h; ++iy) {
            const int oy = iy * g.stride + ky - g.pad;
            if (oy < 0 || oy >= oh) continue;
            for (int ix = 0; ix < w; ++ix) {
              const int ox = ix * g.stride + kx - g.pad;
              if (ox < 0 || ox >= ow) continue;
              acc += static_cast<double>(input.data[(static_cast<size_t>(ic) * h + iy) * w + ix]) *
                     grad_out.data[(static_cast<size_t>(oc) * oh + oy) * ow + ox];
            }
          }
          gw.data[((static_cast<size_t>(ic) * cout_g + ocl) * kh + ky) * kw + kx] = static_cast<float>(acc);
        }
      }
    }
  }
  return gw;
}

namespace {

void gdn_check(const Tensor& x, const Tensor& beta, const Tensor& gamma) {
  require_rank3(x, "gdn input");
  const int c = x.dim(0);
  if (beta.rank() != 1 || beta.dim(0) != c || gamma.rank() != 2 || gamma.dim(0) != c || gamma.dim(1) != c) {
    throw MismatchError("gdn: parameter shapes beta " + shape_str(beta.shape) + " gamma " +
                        shape_str(gamma.shape) + " vs input " + shape_str(x.shape));
  }
  for (float b : beta.data) {
    if (!(b >= kGdnBetaMin)) throw NumericError("gdn: beta below lower bound");
  }
  for (float gmm : gamma.data) {
    if (!(gmm >= 0.0f)) throw NumericError("gdn: negative gamma");
  }
}

}  // namespace

Tensor gdn_fwd(const Tensor& x, const Tensor& beta, const Tensor& gamma, bool inverse) {
  gdn_check(x, beta, gamma);
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int hw = h * w;
  Tensor out({c, h, w});

  // pixel-major squared activations so the channel coupling runs on
  // contiguous spans
  std::vector<float> sq(static_cast<size_t>(hw) * c);
  for (int j = 0; j < c; ++j) {
    for (int p = 0; p < hw; ++p) {
      const float v = x.data[static_cast<size_t>(j) * hw + p];
      sq[static_cast<size_t>(p) * c + j] = v * v;
    }
  }

#pragma omp parallel for schedule(static)
  for (int p = 0; p < hw; ++p) {
    const float* sp = sq.data() + static_cast<size_t>(p) * c;
    for (int i = 0; i < c; ++i) {
      const float* grow = gamma.data.data() + static_cast<size_t>(i) * c;
      double d = beta.data[static_cast<size_t>(i)];
      for (int j = 0; j < c; ++j) d += static_cast<double>(grow[j]) * sp[j];
      const double norm = inverse ? std::sqrt(d) : 1.0 / std::sqrt(d);
      out.data[static_cast<size_t>(i) * hw + p] =
          static_cast<float>(x.data[static_cast<size_t>(i) * hw + p] * norm);
    }
  }
  check_finite(out, inverse ? "igdn output" : "gdn output");
  return out;
}

GdnGrads gdn_bwd(const Tensor& grad_out, const Tensor& x, const Tensor& beta,
                 const Tensor& gamma, bool inverse) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int hw = h * w;
  GdnGrads grads{Tensor(x.shape), Tensor(beta.shape), Tensor(gamma.shape)};
  std::vector<double> gbeta(static_cast<size_t>(c), 0.0);
  std::vector<double> ggamma(static_cast<size_t>(c) * c, 0.0);
  std::vector<double> sq(static_cast<size_t>(c));
  std::vector<double> t(static_cast<size_t>(c));
  std::vector<double> dinv(static_cast<size_t>(c));

  const double sign = inverse ? 0.5 : -0.5;
  for (int p = 0; p < hw; ++p) {
    for (int j = 0; j < c; ++j) {
      const double v = x.data[static_cast<size_t>(j) * hw + p];
      sq[static_cast<size_t>(j)] = v * v;
    }
    for (int i = 0; i < c; ++i) {
      double d = beta.data[static_cast<size_t>(i)];
      const float* grow = gamma.data.data() + static_cast<size_t>(i) * c;
      for (int j = 0; j < c; ++j) d += static_cast<double>(grow[j]) * sq[static_cast<size_t>(j)];
      const double g = grad_out.data[static_cast<size_t>(i) * hw + p];
      const double xi = x.data[static_cast<size_t>(i) * hw + p];
      const double root = std::sqrt(d);
      // gdn: t_i = g_i x_i d^{ -3/2 }, direct term g_i d^{-1/2}
      // igdn: t_i = g_i x_i d^{ -1/2 }, direct term g_i d^{+1/2}
      if (inverse) {
        dinv[static_cast<size_t>(i)] = root;
        t[static_cast<size_t>(i)] = g * xi / root;
      } else {
        dinv[static_cast<size_t>(i)] = 1.0 / root;
        t[static_cast<size_t>(i)] = g * xi / (d * root);
      }
      gbeta[static_cast<size_t>(i)] += sign * t[static_cast<size_t>(i)];
      double* ggrow = ggamma.data() + static_cast<size_t>(i) * c;
      for (int j = 0; j < c; ++j) ggrow[j] += sign * t[static_cast<size_t>(i)] * sq[static_cast<size_t>(j)];
    }
    for (int k = 0; k < c; ++k) {
      double coupling = 0.0;
      for (int i = 0; i < c; ++i) {
        coupling += t[static_cast<size_t>(i)] * gamma.data[static_cast<size_t>(i) * c + k];
      }
      const double gk = grad_out.data[static_cast<size_t>(k) * hw + p];
      const double xk = x.data[static_cast<size_t>(k) * hw + p];
      grads.x.data[static_cast<size_t>(k) * hw + p] =
          static_cast<float>(gk * dinv[static_cast<size_t>(k)] + 2.0 * sign * xk * coupling);
    }
  }
  for (int i = 0; i < c; ++i) grads.beta.data[static_cast<size_t>(i)] = static_cast<float>(gbeta[static_cast<size_t>(i)]);
  for (size_t i = 0; i < ggamma.size(); ++i) grads.gamma.data[i] = static_cast<float>(ggamma[i]);
  return grads;
}

Tensor matmul_fwd(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw MismatchError("matmul: " + shape_str(a.shape) + " x " + shape_str(b.shape));
  }
  const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double acc = 0.0;
      for (int l = 0; l < k; ++l) {
        acc += static_cast<double>(a.data[static_cast<size_t>(i) * k + l]) * b.data[static_cast<size_t>(l) * m + j];
      }
      out.data[static_cast<size_t>(i) * m + j] = static_cast<float>(acc);
    }
  }
  return out;
}

Tensor avg_pool2(const Tensor& x) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int oh = h / 2, ow = w / 2;
  if (oh < 1 || ow < 1) throw MismatchError("avg_pool2: input too small " + shape_str(x.shape));
  Tensor out({c, oh, ow});
  for (int ch = 0; ch < c; ++ch) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        const float* base = x.data.data() + (static_cast<size_t>(ch) * h + 2 * oy) * w + 2 * ox;
        out.data[(static_cast<size_t>(ch) * oh + oy) * ow + ox] =
            0.25f * (base[0] + base[1] + base[w] + base[w + 1]);
      }
    }
  }
  return out;
}

}  // namespace cosmic
