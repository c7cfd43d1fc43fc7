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
#include <string>
#include <vector>

#include "cosmic/codec.hpp"

namespace cosmic {

// Analytic multiply-accumulate accounting. Convention: 1 MAC = 2 FLOPs,
// stated in every report. Conv MACs = C_out*H'*W'*C_in*k_h*k_w/groups; GDN is
// counted as C^2*H*W; the attention 1-D convolutions by their own shapes.
struct FlopsEntry {
  std::string name;
  std::string component;  // "encoder" or "hyper"
  int64_t macs = 0;
};

struct FlopsReport {
  std::vector<FlopsEntry> entries;

  int64_t total_macs() const;
  int64_t component_macs(const std::string& component) const;
  int64_t total_flops() const { return 2 * total_macs(); }
  double total_gflops() const { return static_cast<double>(total_flops()) * 1e-9; }
};

int64_t conv_macs(int cout, int oh, int ow, int cin, int kh, int kw, int groups = 1);
int64_t gdn_macs(int channels, int h, int w);

// On-satellite path of the configured codec: lightweight encoder stages, the
// attention module, the latent projection and the hyper-encoder.
FlopsReport flops_onboard(const CodecConfig& cfg, int height, int width);

// Reference 4-stage dense encoder (192ch 5x5 stride-2 convs with GDN after
// each), the baseline the lightweight design is measured against.
FlopsReport flops_reference_dense(int height, int width, int channels = 192, int stages = 4,
                                  int kernel = 5, int image_channels = 3);

}  // namespace cosmic
