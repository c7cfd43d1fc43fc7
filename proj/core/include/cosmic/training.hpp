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

#include <functional>
#include <unordered_map>

#include "cosmic/model.hpp"

namespace cosmic {

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 4;
  int steps = 500;
  uint64_t seed = 0;
  int log_every = 10;
  int checkpoint_every = 0;        // 0 = no periodic checkpoints
  std::string checkpoint_prefix;   // "<prefix>.stepN.csmw"
};

struct LogRecord {
  int step = 0;
  double loss = 0.0;
  double rate_bits = 0.0;    // stage 1 only
  double distortion = 0.0;   // stage 1: 255^2-scaled MSE (lambda-independent); stage 2: 0
};

// Adam with bias correction; moments start at zero, so a zero gradient on a
// fresh state leaves parameters unchanged.
class Adam {
 public:
  explicit Adam(double lr) : lr_(lr) {}
  void update(Tensor& param, const Tensor& grad);
  void begin_step() { ++step_; }

 private:
  struct Moments {
    Tensor m, v;
  };
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int64_t step_ = 0;
  std::unordered_map<const Tensor*, Moments> state_;
};

// Procedurally generated training corpus: oriented gratings plus a soft blob,
// with metadata fields causally controlling brightness (sun elevation),
// orientation (target azimuth) and spatial frequency (GSD).
struct SyntheticDataset {
  std::vector<Tensor> images;
  std::vector<MetadataRecord> metadata;
  size_t size() const { return images.size(); }
};
SyntheticDataset make_synthetic_dataset(int count, int image_size, uint64_t seed);

// Returns a copy with the image->metadata pairing permuted (ablation input).
SyntheticDataset shuffle_metadata(const SyntheticDataset& data, uint64_t seed);

// Pieces of the stage-1 loss graph, exposed for tests and gradient checks.
struct LossIcParts {
  Var loss;
  Var rate_bits;
  Var distortion_mse;  // raw MSE on [0,1] pixels
  Var latent;
  Var reconstruction;
};

// L_IC = (bits of noisy latent under the hyper model + bits of noisy hyper
// latent under the prior) + lambda * 255^2 * MSE(x, x_hat).
LossIcParts build_loss_ic(CodecModel& model, Binder& bind, const Tensor& image, double lambda,
                          Rng& noise_rng);

// Stage-2 loss graph; stage-1 networks run through `frozen`, the U-Net and
// metadata encoder through `trainable`.
struct LossLdmParts {
  Var loss;
  Var eps_hat;
};
LossLdmParts build_loss_ldm_full(CodecModel& model, Binder& frozen, Binder& trainable,
                                 const Tensor& image, const MetadataRecord& meta, int t,
                                 const Tensor& eps, Rng& noise_rng);

using LogSink = std::function<void(const LogRecord&)>;

// Algorithm: stage 1 trains encoder/comp-encoder/decoder/hyper/prior under
// L_IC; aborts with a diagnostic if the loss goes non-finite.
std::vector<LogRecord> stage1_train(CodecModel& model, const SyntheticDataset& data,
                                    const TrainConfig& cfg, const LogSink& sink = nullptr);

// Stage 2 freezes the stage-1 parameters and trains the noise-prediction
// network on (z_t, t, latent, metadata) tuples with t ~ U{1..T}.
std::vector<LogRecord> stage2_train(CodecModel& model, const SyntheticDataset& data,
                                    const TrainConfig& cfg, const LogSink& sink = nullptr);

}  // namespace cosmic
