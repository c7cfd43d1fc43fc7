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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "cosmic/errors.hpp"
#include "cosmic/pipeline.hpp"
#include "cosmic/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace cosmic;

namespace {

void emit(const json& j) { std::cout << j.dump() << "\n"; }

struct PresetFlags {
  std::string preset = "production";

  CodecConfig codec_config() const {
    CodecConfig cfg;
    if (preset == "production") return cfg;
    if (preset == "desk") {
      cfg.latent_channels = 48;
      cfg.hyper_channels = 24;
      cfg.dec_width = 48;
      cfg.comp_width = 48;
      return cfg;
    }
    if (preset == "tiny") {
      cfg.latent_channels = 8;
      cfg.hyper_channels = 4;
      cfg.enc_stages = 2;
      cfg.dec_width = 8;
      cfg.comp_width = 8;
      return cfg;
    }
    throw MismatchError("unknown preset '" + preset + "'");
  }

  UNetConfig unet_config() const {
    UNetConfig cfg;
    if (preset == "production") return cfg;
    if (preset == "desk") {
      cfg.width0 = 16;
      cfg.width1 = 24;
      cfg.attn_dim = 16;
      cfg.cond_dim = 64;
      cfg.field_dim = 8;
      cfg.time_dim = 32;
      return cfg;
    }
    cfg.width0 = 8;
    cfg.width1 = 12;
    cfg.attn_dim = 8;
    cfg.cond_dim = 16;
    cfg.field_dim = 4;
    cfg.time_dim = 8;
    return cfg;
  }
};

MetadataRecord load_metadata_or_neutral(const std::string& path, const MetadataNormalization& norm) {
  if (path.empty()) return norm.neutral_record();
  return parse_metadata(load_text_file(path), norm);
}

json flops_json(const FlopsReport& r) {
  json layers = json::array();
  for (const auto& e : r.entries) {
    layers.push_back({{"name", e.name}, {"component", e.component}, {"macs", e.macs}});
  }
  return json{{"convention", "1 MAC = 2 FLOPs"},
              {"layers", layers},
              {"encoder_macs", r.component_macs("encoder")},
              {"hyper_macs", r.component_macs("hyper")},
              {"total_macs", r.total_macs()},
              {"total_gflops", r.total_gflops()}};
}

struct EvalRow {
  std::string image;
  int lambda_index = 0;
  double bpp_v = 0, psnr_v = 0, msssim_v = 0;
};

void print_eval_table(const std::vector<EvalRow>& rows) {
  std::printf("%-28s %8s %10s %10s %10s\n", "image", "lambda", "bpp", "psnr_db", "ms_ssim");
  for (const auto& r : rows) {
    std::printf("%-28s %8d %10.4f %10.3f %10.5f\n", r.image.c_str(), r.lambda_index, r.bpp_v,
                r.psnr_v, r.msssim_v);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"cosmic: learned satellite image codec with diffusion compensation"};
  app.require_subcommand(1);

  // ---- compress ----
  auto* c_cmd = app.add_subcommand("compress", "Compress a PPM image into a .csmc container");
  std::string c_input, c_meta, c_weights, c_out;
  int c_lambda = -1;
  bool c_no_metadata = false;
  c_cmd->add_option("input", c_input, "input image (binary PPM)")->required();
  c_cmd->add_option("--meta", c_meta, "metadata sidecar (field: value lines)");
  c_cmd->add_option("--weights", c_weights, "weights file (.csmw)")->required();
  c_cmd->add_option("--lambda-index", c_lambda, "expected rate point; must match the weights");
  c_cmd->add_option("--out", c_out, "output container path")->required();
  c_cmd->add_flag("--no-metadata", c_no_metadata,
                  "accepted for script symmetry; metadata only steers decoding, the bitstream is unchanged");

  // ---- decompress ----
  auto* d_cmd = app.add_subcommand("decompress", "Decompress a .csmc container into a PPM image");
  std::string d_input, d_weights, d_out;
  int d_steps = 25;
  uint64_t d_seed = 0;
  bool d_no_comp = false, d_no_meta = false;
  d_cmd->add_option("input", d_input, "input container (.csmc)")->required();
  d_cmd->add_option("--weights", d_weights, "weights file (.csmw)")->required();
  d_cmd->add_option("--out", d_out, "output image path")->required();
  d_cmd->add_option("--steps", d_steps, "reverse-process steps (default 25)");
  d_cmd->add_option("--seed", d_seed, "noise seed for the compensation sampler");
  d_cmd->add_flag("--no-compensation", d_no_comp, "substitute a zero compensation field");
  d_cmd->add_flag("--no-metadata", d_no_meta, "ignore container metadata, condition on neutral values");

  // ---- shared training flags ----
  PresetFlags preset;
  TrainConfig tcfg;
  int t_lambda = 2;
  int t_images = 16;
  int t_image_size = 32;
  uint64_t t_data_seed = 1234;
  std::string t_weights_in, t_out, t_log;

  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--preset", preset.preset, "production | desk | tiny");
    cmd->add_option("--steps", tcfg.steps, "optimizer steps");
    cmd->add_option("--lr", tcfg.lr, "learning rate");
    cmd->add_option("--batch", tcfg.batch_size, "batch size");
    cmd->add_option("--seed", tcfg.seed, "training seed");
    cmd->add_option("--images", t_images, "synthetic corpus size");
    cmd->add_option("--image-size", t_image_size, "synthetic image side length");
    cmd->add_option("--data-seed", t_data_seed, "synthetic corpus seed");
    cmd->add_option("--log", t_log, "JSONL training log path");
    cmd->add_option("--checkpoint-every", tcfg.checkpoint_every, "periodic checkpoint interval");
    cmd->add_option("--out", t_out, "output weights path")->required();
  };

  auto* t1_cmd = app.add_subcommand("train-stage1", "Train encoder/decoder/entropy model (stage 1)");
  add_train_flags(t1_cmd);
  t1_cmd->add_option("--lambda-index", t_lambda, "rate point index (0..3)");
  t1_cmd->add_option("--weights", t_weights_in, "optional initial weights to continue from");

  auto* t2_cmd = app.add_subcommand("train-stage2", "Freeze stage 1, train the noise predictor");
  add_train_flags(t2_cmd);
  t2_cmd->add_option("--weights", t_weights_in, "stage-1 weights (required)")->required();

  // ---- eval ----
  auto* e_cmd = app.add_subcommand("eval", "Rate-distortion evaluation over a dataset directory");
  std::string e_dataset, e_out;
  std::vector<std::string> e_weights;
  int e_steps = 25;
  uint64_t e_seed = 0;
  bool e_no_comp = false, e_no_meta = false;
  e_cmd->add_option("--dataset", e_dataset, "directory of .ppm images with optional .meta sidecars")
      ->required();
  e_cmd->add_option("--weights", e_weights, "weights file(s), one per rate point")->required();
  e_cmd->add_option("--steps", e_steps, "reverse-process steps");
  e_cmd->add_option("--seed", e_seed, "sampler seed");
  e_cmd->add_option("--out", e_out, "JSONL report path");
  e_cmd->add_flag("--no-compensation", e_no_comp, "evaluate the compensation-off path");
  e_cmd->add_flag("--no-metadata", e_no_meta, "condition on neutral metadata");

  // ---- tile-eval ----
  auto* te_cmd = app.add_subcommand("tile-eval", "Tile, compress, stitch and score a large scene");
  std::string te_input, te_meta, te_weights, te_out;
  int te_tile = 256, te_steps = 25;
  uint64_t te_seed = 0;
  bool te_no_comp = false, te_no_meta = false;
  te_cmd->add_option("input", te_input, "large input image (binary PPM)")->required();
  te_cmd->add_option("--meta", te_meta, "metadata sidecar");
  te_cmd->add_option("--weights", te_weights, "weights file")->required();
  te_cmd->add_option("--tile", te_tile, "tile side length (default 256)");
  te_cmd->add_option("--steps", te_steps, "reverse-process steps");
  te_cmd->add_option("--seed", te_seed, "sampler seed");
  te_cmd->add_option("--out", te_out, "optional path for the tiled container (.csmt)");
  te_cmd->add_flag("--no-compensation", te_no_comp, "zero compensation field");
  te_cmd->add_flag("--no-metadata", te_no_meta, "neutral conditioning");

  // ---- flops ----
  auto* f_cmd = app.add_subcommand("flops", "Analytic on-satellite complexity report");
  std::string f_weights;
  int f_width = 256, f_height = 256;
  f_cmd->add_option("--preset", preset.preset, "production | desk | tiny");
  f_cmd->add_option("--weights", f_weights, "derive the configuration from a weights file");
  f_cmd->add_option("--width", f_width, "input width");
  f_cmd->add_option("--height", f_height, "input height");

  CLI11_PARSE(app, argc, argv);

  if (c_cmd->parsed()) {
    CodecModel model = CodecModel::load(c_weights);
    if (c_lambda >= 0 && c_lambda != model.lambda_index) {
      throw MismatchError("requested lambda index " + std::to_string(c_lambda) +
                          " does not match weights (" + std::to_string(model.lambda_index) + ")");
    }
    const Tensor img = read_ppm(load_file(c_input));
    const MetadataRecord meta = load_metadata_or_neutral(c_meta, model.norm);
    CompressResult r = compress_image(model, img, meta);
    save_file(c_out, write_bitstream(r.stream));
    emit(json{{"event", "compress"},
              {"input", c_input},
              {"out", c_out},
              {"width", r.stream.width},
              {"height", r.stream.height},
              {"lambda_index", model.lambda_index},
              {"bpp", r.bpp},
              {"estimated_bits", r.estimated_bits},
              {"payload_bytes", r.stream.hyper_payload.size() + r.stream.main_payload.size()},
              {"onboard_gflops", r.onboard_flops.total_gflops()}});
    return 0;
  }

  if (d_cmd->parsed()) {
    CodecModel model = CodecModel::load(d_weights);
    const Bitstream bs = read_bitstream(load_file(d_input));
    DecompressOptions opts;
    opts.steps = d_steps;
    opts.seed = d_seed;
    opts.no_compensation = d_no_comp;
    opts.no_metadata = d_no_meta;
    const Tensor img = decompress_image(model, bs, opts);
    save_file(d_out, write_ppm(img));
    emit(json{{"event", "decompress"},
              {"input", d_input},
              {"out", d_out},
              {"steps", d_steps},
              {"seed", d_seed},
              {"no_compensation", d_no_comp},
              {"no_metadata", d_no_meta}});
    return 0;
  }

  auto log_sink = [&t_log](const std::string& stage) {
    std::shared_ptr<std::ofstream> file;
    if (!t_log.empty()) file = std::make_shared<std::ofstream>(t_log);
    return [stage, file](const LogRecord& rec) {
      json j{{"stage", stage},
             {"step", rec.step},
             {"loss", rec.loss},
             {"rate_bits", rec.rate_bits},
             {"distortion", rec.distortion}};
      emit(j);
      if (file && file->is_open()) (*file) << j.dump() << "\n";
    };
  };

  if (t1_cmd->parsed()) {
    tcfg.checkpoint_prefix = t_out;
    CodecModel model = t_weights_in.empty()
                           ? CodecModel::make(preset.codec_config(), preset.unet_config(), t_lambda,
                                              tcfg.seed)
                           : CodecModel::load(t_weights_in);
    const SyntheticDataset data = make_synthetic_dataset(t_images, t_image_size, t_data_seed);
    const auto log = stage1_train(model, data, tcfg, log_sink("stage1"));
    model.save(t_out);
    emit(json{{"event", "train-stage1"},
              {"out", t_out},
              {"steps", tcfg.steps},
              {"final_loss", log.empty() ? 0.0 : log.back().loss}});
    return 0;
  }

  if (t2_cmd->parsed()) {
    tcfg.checkpoint_prefix = t_out;
    CodecModel model = CodecModel::load(t_weights_in);
    const SyntheticDataset data = make_synthetic_dataset(t_images, t_image_size, t_data_seed);
    const auto log = stage2_train(model, data, tcfg, log_sink("stage2"));
    model.save(t_out);
    emit(json{{"event", "train-stage2"},
              {"out", t_out},
              {"steps", tcfg.steps},
              {"final_loss", log.empty() ? 0.0 : log.back().loss}});
    return 0;
  }

  if (e_cmd->parsed()) {
    std::vector<std::string> images;
    if (!fs::is_directory(e_dataset)) throw IoError("dataset directory not found: " + e_dataset);
    for (const auto& entry : fs::directory_iterator(e_dataset)) {
      if (entry.path().extension() == ".ppm") images.push_back(entry.path().string());
    }
    std::sort(images.begin(), images.end());

    std::ofstream report;
    if (!e_out.empty()) report.open(e_out);
    std::vector<EvalRow> rows;
    for (const std::string& wpath : e_weights) {
      CodecModel model = CodecModel::load(wpath);
      for (const std::string& ipath : images) {
        const Tensor img = read_ppm(load_file(ipath));
        const std::string meta_path = fs::path(ipath).replace_extension(".meta").string();
        const MetadataRecord meta = fs::exists(meta_path)
                                        ? load_metadata_or_neutral(meta_path, model.norm)
                                        : model.norm.neutral_record();
        CompressResult r = compress_image(model, img, meta);
        DecompressOptions opts;
        opts.steps = e_steps;
        opts.seed = e_seed;
        opts.no_compensation = e_no_comp;
        opts.no_metadata = e_no_meta;
        const Tensor rec = decompress_image(model, r.stream, opts);
        EvalRow row{fs::path(ipath).filename().string(), model.lambda_index, r.bpp,
                    psnr(img, rec, 1.0), ms_ssim(img, rec, 1.0)};
        rows.push_back(row);
        json j{{"event", "eval"},
               {"image", row.image},
               {"lambda_index", row.lambda_index},
               {"bpp", row.bpp_v},
               {"psnr_db", row.psnr_v},
               {"ms_ssim", row.msssim_v},
               {"weights", wpath}};
        emit(j);
        if (report.is_open()) report << j.dump() << "\n";
      }
    }
    print_eval_table(rows);
    return 0;
  }

  if (te_cmd->parsed()) {
    CodecModel model = CodecModel::load(te_weights);
    const Tensor img = read_ppm(load_file(te_input));
    const MetadataRecord meta = load_metadata_or_neutral(te_meta, model.norm);
    TiledBitstream bs = compress_tiled(model, img, meta, te_tile);
    if (!te_out.empty()) save_file(te_out, write_tiled_bitstream(bs));
    DecompressOptions opts;
    opts.steps = te_steps;
    opts.seed = te_seed;
    opts.no_compensation = te_no_comp;
    opts.no_metadata = te_no_meta;
    const Tensor stitched = decompress_tiled(model, bs, opts);

    // score against the centered crop of the original (the stitched coverage)
    auto [tiles, layout] = split_tiles(img, te_tile);
    const Tensor reference = stitch_tiles(tiles, layout);
    size_t payload = 0;
    for (const auto& [h, m] : bs.tiles) payload += h.size() + m.size();
    emit(json{{"event", "tile-eval"},
              {"input", te_input},
              {"tiles", bs.tiles.size()},
              {"rows", bs.rows},
              {"cols", bs.cols},
              {"bpp", bpp(payload, 0, layout.cropped_width(), layout.cropped_height())},
              {"psnr_db", psnr(reference, stitched, 1.0)},
              {"ms_ssim", ms_ssim(reference, stitched, 1.0)}});
    return 0;
  }

  if (f_cmd->parsed()) {
    CodecConfig cfg = preset.codec_config();
    if (!f_weights.empty()) cfg = CodecModel::load(f_weights).cfg;
    const FlopsReport onboard = flops_onboard(cfg, f_height, f_width);
    const FlopsReport reference = flops_reference_dense(f_height, f_width);
    const double ratio =
        static_cast<double>(reference.total_macs()) / static_cast<double>(onboard.total_macs());
    emit(json{{"event", "flops"},
              {"width", f_width},
              {"height", f_height},
              {"onboard", flops_json(onboard)},
              {"reference_dense", flops_json(reference)},
              {"reduction_ratio", ratio}});
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
