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

#include "cosmic/training.hpp"

#include <cmath>

#include "cosmic/errors.hpp"

namespace cosmic {

void Adam::update(Tensor& param, const Tensor& grad) {
  Moments& mo = state_[&param];
  if (mo.m.data.empty()) {
    mo.m = Tensor(param.shape);
    mo.v = Tensor(param.shape);
  }
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (size_t i = 0; i < param.data.size(); ++i) {
    const double g = grad.data.empty() ? 0.0 : grad.data[i];
    const double m = beta1_ * mo.m.data[i] + (1.0 - beta1_) * g;
    const double v = beta2_ * mo.v.data[i] + (1.0 - beta2_) * g * g;
    mo.m.data[i] = static_cast<float>(m);
    mo.v.data[i] = static_cast<float>(v);
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    param.data[i] -= static_cast<float>(lr_ * m_hat / (std::sqrt(v_hat) + eps_));
  }
}

// ---------------------------------------------------------------------------
// synthetic data

SyntheticDataset make_synthetic_dataset(int count, int image_size, uint64_t seed) {
  SyntheticDataset data;
  Rng rng(seed);
  for (int i = 0; i < count; ++i) {
    MetadataRecord m;
    m.utm_zone = 1.0 + std::floor(rng.uniform(0.0, 60.0));
    m.timestamp = rng.uniform(0.0, 31557600.0);
    m.gsd = rng.uniform(0.3, 3.0);
    m.cloud_cover = rng.uniform(0.0, 1.0);
    m.off_nadir_angle = rng.uniform(0.0, 40.0);
    m.target_azimuth = rng.uniform(0.0, 360.0);
    m.sun_azimuth = rng.uniform(0.0, 360.0);
    m.sun_elevation = rng.uniform(5.0, 85.0);

    const int s = image_size;
    Tensor img({3, s, s});
    const double brightness = 0.15 + 0.70 * (m.sun_elevation - 5.0) / 80.0;
    const double theta = m.target_azimuth * M_PI / 180.0;
    const double cycles = 1.0 + 3.0 * (m.gsd - 0.3) / 2.7;
    const double cx = s * (0.25 + 0.5 * m.cloud_cover);
    const double cy = s * (0.25 + 0.5 * std::fmod(m.timestamp / 31557600.0, 1.0));
    const double blob_r2 = 2.0 * (s / 6.0) * (s / 6.0);
    for (int c = 0; c < 3; ++c) {
      const double amp = 0.12 + 0.08 * std::sin(m.utm_zone / 60.0 * 2.0 * M_PI + c * 2.094);
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
          const double axis = (x * std::cos(theta) + y * std::sin(theta)) / s;
          const double grating = std::sin(2.0 * M_PI * cycles * axis);
          const double dx = x - cx, dy = y - cy;
          const double blob = std::exp(-(dx * dx + dy * dy) / blob_r2);
          const double v = brightness + amp * grating + 0.08 * blob;
          img.at3(c, y, x) = static_cast<float>(std::min(std::max(v, 0.0), 1.0));
        }
      }
    }
    data.images.push_back(std::move(img));
    data.metadata.push_back(m);
  }
  return data;
}

SyntheticDataset shuffle_metadata(const SyntheticDataset& data, uint64_t seed) {
  SyntheticDataset out = data;
  Rng rng(seed);
  // Fisher-Yates; guarantees a different pairing for n >= 2 by rejecting the
  // identity permutation.
  const size_t n = out.metadata.size();
  if (n < 2) return out;
  bool moved = false;
  while (!moved) {
    for (size_t i = n - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(rng.below(i + 1));
      std::swap(out.metadata[i], out.metadata[j]);
    }
    for (size_t i = 0; i < n; ++i) {
      moved = moved || out.metadata[i].values() != data.metadata[i].values();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// loss graphs

LossIcParts build_loss_ic(CodecModel& model, Binder& bind, const Tensor& image, double lambda,
                          Rng& noise_rng) {
  Graph& g = bind.graph();
  Var x = g.constant(image);
  Var y = model.enc.forward(bind, x);

  Tensor noise_y(g.value(y).shape);
  for (float& v : noise_y.data) v = static_cast<float>(noise_rng.uniform() - 0.5);
  Var y_tilde = g.quantize_noise_ste(y, std::move(noise_y));

  Var zeta = model.hyper_enc.forward(bind, y);
  Tensor noise_z(g.value(zeta).shape);
  for (float& v : noise_z.data) v = static_cast<float>(noise_rng.uniform() - 0.5);
  Var zeta_tilde = g.quantize_noise_ste(zeta, std::move(noise_z));

  auto [mu, sigma] = model.hyper_dec.forward(bind, zeta_tilde, g.value(y).dim(1), g.value(y).dim(2));
  Var rate_main = g.gaussian_rate_bits(y_tilde, mu, sigma);
  Var loc_full = model.prior.bind_loc_full(bind, g.value(zeta).shape);
  Var scale_full = model.prior.bind_scale_full(bind, g.value(zeta).shape);
  Var rate_hyper = g.logistic_rate_bits(zeta_tilde, loc_full, scale_full);
  Var rate = g.add(rate_main, rate_hyper);

  auto [mu_z, sigma_z] = model.comp.forward(bind, x);
  Tensor eps_z(g.value(mu_z).shape);
  eps_z.fill_normal(noise_rng, 0.0f, 1.0f);
  Var z0 = reparameterize(g, mu_z, sigma_z, g.constant(std::move(eps_z)));

  Var x_hat = model.dec.forward(bind, y_tilde, z0);
  Var mse01 = g.mse(x, x_hat);
  Var loss = g.add(rate, g.scale(mse01, lambda * 255.0 * 255.0));
  return LossIcParts{loss, rate, mse01, y, x_hat};
}

LossLdmParts build_loss_ldm_full(CodecModel& model, Binder& frozen, Binder& trainable,
                                 const Tensor& image, const MetadataRecord& meta, int t,
                                 const Tensor& eps, Rng& noise_rng) {
  (void)noise_rng;
  Graph& g = frozen.graph();
  Var x = g.constant(image);
  Var y = model.enc.forward(frozen, x);
  Var y_hat = g.quantize_round_ste(y);
  auto [mu_z, sigma_z] = model.comp.forward(frozen, x);
  (void)sigma_z;

  // target z0 is the compensation mean; the diffusion target stays
  // deterministic per (image, t, eps)
  const Tensor z0 = g.value(mu_z);
  const Tensor z_t = forward_diffuse(z0, t, eps, model.schedule);

  Var cond = model.meta_enc.forward(trainable, meta, model.norm);
  Var eps_hat = model.unet.forward(trainable, g.constant(z_t), t, y_hat, cond);
  Var loss = g.mse(g.constant(eps), eps_hat);
  return LossLdmParts{loss, eps_hat};
}

// ---------------------------------------------------------------------------
// trainers

namespace {

struct ParamRef {
  std::string name;
  Tensor* tensor;
};

std::vector<ParamRef> collect(CodecModel& model, bool stage2) {
  std::vector<ParamRef> out;
  const auto grab = [&out](const std::string& name, Tensor& t) { out.push_back({name, &t}); };
  if (stage2) {
    model.visit_stage2(grab);
  } else {
    model.visit_stage1(grab);
  }
  return out;
}

void check_loss_finite(double loss, int step) {
  if (!std::isfinite(loss)) {
    throw NumericError("training diverged: non-finite loss at step " + std::to_string(step));
  }
}

}  // namespace

std::vector<LogRecord> stage1_train(CodecModel& model, const SyntheticDataset& data,
                                    const TrainConfig& cfg, const LogSink& sink) {
  if (data.size() == 0) throw MismatchError("stage1_train: empty dataset");
  std::vector<LogRecord> log;
  std::vector<ParamRef> params = collect(model, /*stage2=*/false);
  Adam opt(cfg.lr);
  Rng order_rng(cfg.seed);
  Rng noise_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  const double lambda = model.lambda_value();

  for (int step = 1; step <= cfg.steps; ++step) {
    Graph g;
    Binder bind(g, /*trainable=*/true);
    Var total{};
    double rate_sum = 0.0, mse_sum = 0.0;
    const int batch = std::min<int>(cfg.batch_size, static_cast<int>(data.size()));
    for (int b = 0; b < batch; ++b) {
      const size_t idx = static_cast<size_t>(order_rng.below(data.size()));
      LossIcParts parts = build_loss_ic(model, bind, data.images[idx], lambda, noise_rng);
      total = (b == 0) ? parts.loss : g.add(total, parts.loss);
      rate_sum += g.value(parts.rate_bits).data[0];
      mse_sum += g.value(parts.distortion_mse).data[0];
    }
    Var loss = g.scale(total, 1.0 / batch);
    const double loss_v = g.value(loss).data[0];
    check_loss_finite(loss_v, step);
    g.backward(loss);

    opt.begin_step();
    for (const ParamRef& p : params) {
      opt.update(*p.tensor, bind.lookup_grad(*p.tensor));
    }

    if (step % cfg.log_every == 0 || step == 1 || step == cfg.steps) {
      LogRecord rec{step, loss_v, rate_sum / batch, 255.0 * 255.0 * mse_sum / batch};
      log.push_back(rec);
      if (sink) sink(rec);
    }
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_prefix.empty() &&
        step % cfg.checkpoint_every == 0) {
      model.save(cfg.checkpoint_prefix + ".step" + std::to_string(step) + ".csmw");
    }
  }
  return log;
}

std::vector<LogRecord> stage2_train(CodecModel& model, const SyntheticDataset& data,
                                    const TrainConfig& cfg, const LogSink& sink) {
  if (data.size() == 0) throw MismatchError("stage2_train: empty dataset");
  std::vector<LogRecord> log;
  std::vector<ParamRef> params = collect(model, /*stage2=*/true);
  Adam opt(cfg.lr);
  Rng order_rng(cfg.seed);
  Rng noise_rng(cfg.seed ^ 0x517cc1b727220a95ull);

  // Frozen networks are deterministic per image: precompute the quantized
  // latent and the compensation target once.
  std::vector<Tensor> latents, z0s;
  for (const Tensor& img : data.images) {
    Graph g;
    Binder frozen(g, /*trainable=*/false);
    Var x = g.constant(img);
    Var y = model.enc.forward(frozen, x);
    latents.push_back(quantize(g.value(y), QuantizeMode::kRound));
    auto [mu_z, sigma_z] = model.comp.forward(frozen, x);
    (void)sigma_z;
    z0s.push_back(g.value(mu_z));
  }

  for (int step = 1; step <= cfg.steps; ++step) {
    Graph g;
    Binder trainable(g, /*trainable=*/true);
    Var total{};
    const int batch = std::min<int>(cfg.batch_size, static_cast<int>(data.size()));
    for (int b = 0; b < batch; ++b) {
      const size_t idx = static_cast<size_t>(order_rng.below(data.size()));
      const int t = static_cast<int>(order_rng.below(static_cast<uint64_t>(model.schedule.steps))) + 1;
      Tensor eps(z0s[idx].shape);
      eps.fill_normal(noise_rng, 0.0f, 1.0f);
      const Tensor z_t = forward_diffuse(z0s[idx], t, eps, model.schedule);
      Var cond = model.meta_enc.forward(trainable, data.metadata[idx], model.norm);
      Var eps_hat = model.unet.forward(trainable, g.constant(z_t), t, g.constant(latents[idx]), cond);
      Var loss_b = g.mse(g.constant(eps), eps_hat);
      total = (b == 0) ? loss_b : g.add(total, loss_b);
    }
    Var loss = g.scale(total, 1.0 / batch);
    const double loss_v = g.value(loss).data[0];
    check_loss_finite(loss_v, step);
    g.backward(loss);

    opt.begin_step();
    for (const ParamRef& p : params) {
      opt.update(*p.tensor, trainable.lookup_grad(*p.tensor));
    }

    if (step % cfg.log_every == 0 || step == 1 || step == cfg.steps) {
      LogRecord rec{step, loss_v, 0.0, 0.0};
      log.push_back(rec);
      if (sink) sink(rec);
    }
    if (cfg.checkpoint_every > 0 && !cfg.checkpoint_prefix.empty() &&
        step % cfg.checkpoint_every == 0) {
      model.save(cfg.checkpoint_prefix + ".step" + std::to_string(step) + ".csmw");
    }
  }
  return log;
}

}  // namespace cosmic
