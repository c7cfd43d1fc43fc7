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

#include "cosmic/flops.hpp"

#include "cosmic/errors.hpp"

namespace cosmic {

int64_t FlopsReport::total_macs() const {
  int64_t total = 0;
  for (const FlopsEntry& e : entries) total += e.macs;
  return total;
}

int64_t FlopsReport::component_macs(const std::string& component) const {
  int64_t total = 0;
  for (const FlopsEntry& e : entries) {
    if (e.component == component) total += e.macs;
  }
  return total;
}

int64_t conv_macs(int cout, int oh, int ow, int cin, int kh, int kw, int groups) {
  return static_cast<int64_t>(cout) * oh * ow * cin * kh * kw / groups;
}

int64_t gdn_macs(int channels, int h, int w) {
  return static_cast<int64_t>(channels) * channels * h * w;
}

namespace {

void add_lcb(FlopsReport& r, const std::string& name, const CodecConfig& cfg, int cin, int cout,
             int oh, int ow) {
  const int k = cfg.lcb_kernel, kc = cfg.cheap_kernel;
  r.entries.push_back({name + ".depthwise", "encoder", conv_macs(cin, oh, ow, cin, k, k, cin)});
  r.entries.push_back({name + ".pointwise", "encoder", conv_macs(cout / 2, oh, ow, cin, 1, 1)});
  r.entries.push_back({name + ".cheap", "encoder", conv_macs(cout / 2, oh, ow, cout / 2, kc, kc, cout / 2)});
}

}  // namespace

FlopsReport flops_onboard(const CodecConfig& cfg, int height, int width) {
  cfg.validate();
  const int f = cfg.downsample_factor();
  if (height % f != 0 || width % f != 0) {
    throw MismatchError("flops_onboard: dims must be divisible by " + std::to_string(f));
  }
  FlopsReport r;
  const int n = cfg.latent_channels;
  int cin = cfg.image_channels;
  int h = height, w = width;
  for (int s = 1; s <= cfg.enc_stages; ++s) {
    h /= 2;
    w /= 2;
    add_lcb(r, "enc.lcb" + std::to_string(s), cfg, cin, n, h, w);
    r.entries.push_back({"enc.gdn" + std::to_string(s), "encoder", gdn_macs(n, h, w)});
    cin = n;
    if (cfg.cam_after_stage == s) {
      add_lcb(r, "enc.cam.local", cfg, n, n, h, w);
      const int len = cfg.cam_1d_len;
      r.entries.push_back({"enc.cam.horiz", "encoder", conv_macs(n, h, w, n, 1, len, n)});
      r.entries.push_back({"enc.cam.vert", "encoder", conv_macs(n, h, w, n, len, 1, n)});
    }
  }
  if (cfg.final_proj_lcb) {
    add_lcb(r, "enc.proj", cfg, n, n, h, w);
  } else {
    r.entries.push_back({"enc.proj", "encoder", conv_macs(n, h, w, n, 5, 5)});
  }
  // hyper-encoder (part of the transmitted-model path)
  const int hc = cfg.hyper_channels;
  r.entries.push_back({"hyper.c1", "hyper", conv_macs(hc, h / 2, w / 2, n, 5, 5)});
  r.entries.push_back({"hyper.c2", "hyper", conv_macs(hc, h / 4, w / 4, hc, 5, 5)});
  return r;
}

FlopsReport flops_reference_dense(int height, int width, int channels, int stages, int kernel,
                                  int image_channels) {
  FlopsReport r;
  int cin = image_channels;
  int h = height, w = width;
  for (int s = 1; s <= stages; ++s) {
    h /= 2;
    w /= 2;
    r.entries.push_back({"ref.conv" + std::to_string(s), "encoder",
                         conv_macs(channels, h, w, cin, kernel, kernel)});
    r.entries.push_back({"ref.gdn" + std::to_string(s), "encoder", gdn_macs(channels, h, w)});
    cin = channels;
  }
  return r;
}

}  // namespace cosmic
