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

#include <array>

#include "cosmic/bitstream.hpp"
#include "cosmic/codec.hpp"
#include "cosmic/diffusion.hpp"
#include "cosmic/entropy.hpp"

namespace cosmic {

// Rate-distortion operating points; the container header stores an index
// into this set so the decoder can check it loaded matching weights.
inline constexpr std::array<double, 4> kLambdaSet = {0.00067, 0.0013, 0.0026, 0.005};

// Complete parameter set of the codec: stage-1 networks (encoder,
// compensation encoder, decoder, hyper pair, factorized prior) and stage-2
// networks (metadata encoder, noise-prediction U-Net), plus every
// architecture and normalization constant needed to rebuild them.
struct CodecModel {
  CodecConfig cfg;
  UNetConfig ucfg;
  int schedule_steps = 1000;
  float beta_1 = 1e-4f;
  float beta_T = 0.02f;
  MetadataNormalization norm;
  int lambda_index = 2;

  EncoderNet enc;
  CompEncoderNet comp;
  DecoderNet dec;
  HyperEncoderNet hyper_enc;
  HyperDecoderNet hyper_dec;
  FactorizedPrior prior;
  MetadataEncoderNet meta_enc;
  UNetModel unet;
  NoiseSchedule schedule;

  static CodecModel make(const CodecConfig& cfg, const UNetConfig& ucfg, int lambda_index,
                         uint64_t seed);

  double lambda_value() const;

  // Stage-1 parameters are those trained under the rate-distortion loss;
  // stage-2 parameters belong to the compensation generator.
  void visit_stage1(const ParamVisitor& v);
  void visit_stage2(const ParamVisitor& v);
  void visit_all(const ParamVisitor& v);

  NamedTensors to_tensors();
  static CodecModel from_tensors(const NamedTensors& tensors);
  void save(const std::string& path);
  static CodecModel load(const std::string& path);
};

}  // namespace cosmic
