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

// 10*log10(peak^2 / MSE); identical images return +infinity.
double psnr(const Tensor& x, const Tensor& y, double peak);

// Multi-scale SSIM, canonical 5-scale configuration: 11x11 Gaussian window
// (sigma 1.5), scale weights (0.0448, 0.2856, 0.3001, 0.2363, 0.1333),
// 2x2 average-pool between scales, windows evaluated on the valid interior.
// Channels are scored independently and averaged.
//
// force_scales == 0 picks the largest feasible count (at most 5); smaller
// images therefore run with fewer scales and renormalized weights. Forcing
// more scales than the image supports is rejected.
double ms_ssim(const Tensor& x, const Tensor& y, double peak = 1.0, int force_scales = 0);

// Compressed payload bits per pixel. Header and metadata bytes are excluded
// by definition; only the entropy-coded payloads count.
double bpp(size_t hyper_payload_bytes, size_t main_payload_bytes, int width, int height);

}  // namespace cosmic
