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

#include "cosmic/tensor.hpp"

namespace cosmic {

// Geometry of a 2-D convolution. Kernels may be rectangular (the attention
// module uses 1xK and Kx1), so padding is per axis.
struct ConvGeom {
  int stride = 1;
  int pad_y = 0;
  int pad_x = 0;
  int groups = 1;

  static ConvGeom same(int stride, int pad, int groups = 1) {
    return ConvGeom{stride, pad, pad, groups};
  }
};

// Cross-correlation. input [C_in,H,W], weight [C_out,C_in/groups,kh,kw],
// bias [C_out] (empty tensor = no bias). Output [C_out,H',W'] with
// H' = floor((H + 2*pad_y - kh)/stride) + 1.
Tensor conv2d_fwd(const Tensor& input, const Tensor& weight, const Tensor& bias, ConvGeom g);
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& weight,
                         const std::vector<int>& input_shape, ConvGeom g);
Tensor conv2d_grad_weight(const Tensor& grad_out, const Tensor& input,
                          const std::vector<int>& weight_shape, ConvGeom g);

// Transposed convolution (adjoint of conv2d_fwd). input [C_in,H,W],
// weight [C_in,C_out/groups,kh,kw], output [C_out,H'',W''] with
// H'' = (H-1)*stride - 2*pad + kh + out_pad.
struct TConvGeom {
  int stride = 1;
  int pad = 0;
  int out_pad = 0;
  int groups = 1;
};
Tensor tconv2d_fwd(const Tensor& input, const Tensor& weight, const Tensor& bias, TConvGeom g);
Tensor tconv2d_grad_input(const Tensor& grad_out, const Tensor& weight,
                          const std::vector<int>& input_shape, TConvGeom g);
Tensor tconv2d_grad_weight(const Tensor& grad_out, const Tensor& input,
                           const std::vector<int>& weight_shape, TConvGeom g);

// Generalized divisive normalization over channels of an [C,H,W] map:
//   d_i = beta_i + sum_j gamma[i][j] * x_j^2
//   gdn:  y_i = x_i * d_i^(-1/2)       igdn: y_i = x_i * d_i^(+1/2)
// beta [C] with beta_i >= kGdnBetaMin, gamma [C,C] with gamma_ij >= 0.
inline constexpr float kGdnBetaMin = 1e-6f;
Tensor gdn_fwd(const Tensor& x, const Tensor& beta, const Tensor& gamma, bool inverse);
struct GdnGrads {
  Tensor x;
  Tensor beta;
  Tensor gamma;
};
GdnGrads gdn_bwd(const Tensor& grad_out, const Tensor& x, const Tensor& beta,
                 const Tensor& gamma, bool inverse);

// Row-major matrix product: a [n,k] x b [k,m] -> [n,m], float64 accumulation.
Tensor matmul_fwd(const Tensor& a, const Tensor& b);

// 2x2 average pooling with floor division of extents (metrics use).
Tensor avg_pool2(const Tensor& x);

}  // namespace cosmic
