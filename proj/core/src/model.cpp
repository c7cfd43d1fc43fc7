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

#include "cosmic/model.hpp"

#include <map>

#include "cosmic/errors.hpp"

namespace cosmic {

CodecModel CodecModel::make(const CodecConfig& cfg, const UNetConfig& ucfg_in, int lambda_index,
                            uint64_t seed) {
  cfg.validate();
  if (lambda_index < 0 || lambda_index >= static_cast<int>(kLambdaSet.size())) {
    throw MismatchError("lambda index " + std::to_string(lambda_index) + " outside the shipped set");
  }
  CodecModel m;
  m.cfg = cfg;
  m.ucfg = ucfg_in;
  m.ucfg.z_channels = cfg.z_channels;
  m.ucfg.latent_channels = cfg.latent_channels;
  m.ucfg.latent_to_z_log2 = cfg.enc_stages - 2;
  m.lambda_index = lambda_index;
  m.norm = MetadataNormalization::defaults();

  Rng rng(seed);
  m.enc = EncoderNet::make(cfg, rng);
  m.comp = CompEncoderNet::make(cfg, rng);
  m.dec = DecoderNet::make(cfg, rng);
  m.hyper_enc = HyperEncoderNet::make(cfg.latent_channels, cfg.hyper_channels, rng);
  m.hyper_dec = HyperDecoderNet::make(cfg.latent_channels, cfg.hyper_channels, rng);
  m.prior = FactorizedPrior::make(cfg.hyper_channels);
  m.meta_enc = MetadataEncoderNet::make(m.ucfg.field_dim, m.ucfg.cond_dim, rng);
  m.unet = UNetModel::make(m.ucfg, rng);
  m.schedule = make_schedule(m.schedule_steps, m.beta_1, m.beta_T);
  return m;
}

double CodecModel::lambda_value() const {
  return kLambdaSet[static_cast<size_t>(lambda_index)];
}

void CodecModel::visit_stage1(const ParamVisitor& v) {
  enc.visit("enc", v);
  comp.visit("comp", v);
  dec.visit("dec", v);
  hyper_enc.visit("hyper_enc", v);
  hyper_dec.visit("hyper_dec", v);
  prior.visit("prior", v);
}

void CodecModel::visit_stage2(const ParamVisitor& v) {
  meta_enc.visit("meta_enc", v);
  unet.visit("unet", v);
}

void CodecModel::visit_all(const ParamVisitor& v) {
  visit_stage1(v);
  visit_stage2(v);
}

namespace {

Tensor config_tensor(std::initializer_list<float> vals) {
  return Tensor::from({static_cast<int>(vals.size())}, std::vector<float>(vals));
}

float cfg_at(const Tensor& t, size_t i) { return t.data.at(i); }

}  // namespace

NamedTensors CodecModel::to_tensors() {
  NamedTensors out;
  out.emplace_back("meta.codec",
                   config_tensor({static_cast<float>(cfg.image_channels),
                                  static_cast<float>(cfg.latent_channels),
                                  static_cast<float>(cfg.hyper_channels),
                                  static_cast<float>(cfg.z_channels),
                                  static_cast<float>(cfg.enc_stages),
                                  static_cast<float>(cfg.cam_after_stage),
                                  static_cast<float>(cfg.lcb_kernel),
                                  static_cast<float>(cfg.cheap_kernel),
                                  static_cast<float>(cfg.cam_1d_len),
                                  cfg.final_proj_lcb ? 1.0f : 0.0f,
                                  static_cast<float>(cfg.dec_width),
                                  static_cast<float>(cfg.comp_width)}));
  out.emplace_back("meta.unet",
                   config_tensor({static_cast<float>(ucfg.width0), static_cast<float>(ucfg.width1),
                                  static_cast<float>(ucfg.attn_dim), static_cast<float>(ucfg.cond_dim),
                                  static_cast<float>(ucfg.field_dim), static_cast<float>(ucfg.time_dim)}));
  out.emplace_back("meta.diffusion",
                   config_tensor({static_cast<float>(schedule_steps), beta_1, beta_T}));
  out.emplace_back("meta.lambda_index", config_tensor({static_cast<float>(lambda_index)}));
  {
    std::vector<float> lo(norm.lo.begin(), norm.lo.end());
    std::vector<float> hi(norm.hi.begin(), norm.hi.end());
    std::vector<float> wrap(norm.wrap.begin(), norm.wrap.end());
    out.emplace_back("meta.norm.lo", Tensor::from({kMetadataFields}, lo));
    out.emplace_back("meta.norm.hi", Tensor::from({kMetadataFields}, hi));
    out.emplace_back("meta.norm.wrap", Tensor::from({kMetadataFields}, wrap));
  }
  visit_all([&out](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
  return out;
}

CodecModel CodecModel::from_tensors(const NamedTensors& tensors) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : tensors) {
    if (!by_name.emplace(name, &t).second) throw FormatError("weights: duplicate tensor " + name);
  }
  auto need = [&by_name](const std::string& name) -> const Tensor& {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("weights: missing tensor " + name);
    return *it->second;
  };

  const Tensor& c = need("meta.codec");
  if (c.numel() != 12) throw FormatError("weights: malformed meta.codec");
  CodecConfig cfg;
  cfg.image_channels = static_cast<int>(cfg_at(c, 0));
  cfg.latent_channels = static_cast<int>(cfg_at(c, 1));
  cfg.hyper_channels = static_cast<int>(cfg_at(c, 2));
  cfg.z_channels = static_cast<int>(cfg_at(c, 3));
  cfg.enc_stages = static_cast<int>(cfg_at(c, 4));
  cfg.cam_after_stage = static_cast<int>(cfg_at(c, 5));
  cfg.lcb_kernel = static_cast<int>(cfg_at(c, 6));
  cfg.cheap_kernel = static_cast<int>(cfg_at(c, 7));
  cfg.cam_1d_len = static_cast<int>(cfg_at(c, 8));
  cfg.final_proj_lcb = cfg_at(c, 9) != 0.0f;
  cfg.dec_width = static_cast<int>(cfg_at(c, 10));
  cfg.comp_width = static_cast<int>(cfg_at(c, 11));

  const Tensor& u = need("meta.unet");
  if (u.numel() != 6) throw FormatError("weights: malformed meta.unet");
  UNetConfig ucfg;
  ucfg.width0 = static_cast<int>(cfg_at(u, 0));
  ucfg.width1 = static_cast<int>(cfg_at(u, 1));
  ucfg.attn_dim = static_cast<int>(cfg_at(u, 2));
  ucfg.cond_dim = static_cast<int>(cfg_at(u, 3));
  ucfg.field_dim = static_cast<int>(cfg_at(u, 4));
  ucfg.time_dim = static_cast<int>(cfg_at(u, 5));

  const Tensor& d = need("meta.diffusion");
  if (d.numel() != 3) throw FormatError("weights: malformed meta.diffusion");
  const Tensor& li = need("meta.lambda_index");

  CodecModel m = CodecModel::make(cfg, ucfg, static_cast<int>(cfg_at(li, 0)), /*seed=*/0);
  m.schedule_steps = static_cast<int>(cfg_at(d, 0));
  m.beta_1 = cfg_at(d, 1);
  m.beta_T = cfg_at(d, 2);
  m.schedule = make_schedule(m.schedule_steps, m.beta_1, m.beta_T);

  const Tensor& lo = need("meta.norm.lo");
  const Tensor& hi = need("meta.norm.hi");
  const Tensor& wrap = need("meta.norm.wrap");
  if (lo.numel() != kMetadataFields || hi.numel() != kMetadataFields || wrap.numel() != kMetadataFields) {
    throw FormatError("weights: malformed normalization tables");
  }
  for (int f = 0; f < kMetadataFields; ++f) {
    m.norm.lo[static_cast<size_t>(f)] = lo.data[static_cast<size_t>(f)];
    m.norm.hi[static_cast<size_t>(f)] = hi.data[static_cast<size_t>(f)];
    m.norm.wrap[static_cast<size_t>(f)] = wrap.data[static_cast<size_t>(f)];
  }

  m.visit_all([&need](const std::string& name, Tensor& t) {
    const Tensor& src = need(name);
    if (src.shape != t.shape) {
      throw FormatError("weights: tensor " + name + " has shape " + shape_str(src.shape) +
                        ", expected " + shape_str(t.shape));
    }
    t = src;
  });
  return m;
}

void CodecModel::save(const std::string& path) { save_file(path, write_weights(to_tensors())); }

CodecModel CodecModel::load(const std::string& path) {
  return from_tensors(read_weights(load_file(path)));
}

}  // namespace cosmic
