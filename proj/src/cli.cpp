#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dift/boundary.h"
#include "dift/errors.h"
#include "dift/heatmap.h"
#include "dift/image.h"
#include "dift/model.h"
#include "dift/rng.h"
#include "dift/saccade.h"
#include "dift/sampler.h"
#include "dift/score.h"
#include "dift/trainer.h"

namespace fs = std::filesystem;
using namespace dift;

namespace {

std::string six_digits(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", i);
  return buf;
}

int cmd_synth(int count, std::uint64_t seed, const std::string& out_dir) {
  fs::create_directories(out_dir);
  LandmarkSet set;
  for (int i = 0; i < count; ++i) {
    LabeledImage item = synth_image(seed + static_cast<std::uint64_t>(i));
    const std::string name = six_digits(i) + ".ppm";
    save_pnm(item.image, (fs::path(out_dir) / name).string());
    set.emplace_back(name, item.landmarks);
  }
  save_celeba_landmarks(set, (fs::path(out_dir) / "landmarks.txt").string());
  std::printf("wrote %d images + landmarks.txt to %s\n", count, out_dir.c_str());
  return 0;
}

std::vector<LabeledImage> load_dataset(const std::string& images_dir,
                                       const std::string& landmarks_path) {
  LandmarkSet set = load_celeba_landmarks(landmarks_path);
  std::vector<LabeledImage> dataset;
  dataset.reserve(set.size());
  for (auto& [id, landmarks] : set) {
    LabeledImage item;
    item.image = load_pnm((fs::path(images_dir) / id).string());
    item.landmarks = std::move(landmarks);
    item.id = id;
    dataset.push_back(std::move(item));
  }
  return dataset;
}

int cmd_train(const std::string& images_dir, const std::string& landmarks_path,
              const TrainConfig& cfg, float dropout, InitScheme scheme, const std::string& out) {
  std::vector<LabeledImage> dataset = load_dataset(images_dir, landmarks_path);
  if (dataset.empty()) throw DataError("train: no images listed in " + landmarks_path);

  ArchConfig arch;
  arch.patch_size = cfg.patch.size;
  arch.out_channels = dataset.front().landmarks.channel_count();
  arch.dropout = dropout;
  arch.validate();

  Rng init_rng = Rng(cfg.seed).fork(0);
  Model model = init_model(arch, init_rng, scheme);

  LossTrace trace = train(model, dataset, cfg, [](int batch, double loss, double running) {
    std::printf("%d: %.9g %.9g\n", batch, loss, running);
  });

  save_model(model, out);
  const fs::path out_path(out);
  const fs::path loss_path = out_path.parent_path() / "loss.csv";
  write_loss_csv(trace, loss_path.string());
  std::fprintf(stderr, "model -> %s, loss trace -> %s\n", out.c_str(),
               loss_path.string().c_str());
  return 0;
}

int cmd_heatmap(const std::string& model_path, const std::string& image_path, bool quantize,
                const std::string& out_dir, int threads) {
  Model model = load_model(model_path);
  ImageBuf img = load_pnm(image_path);
  fs::create_directories(out_dir);
  ScoreField field = dense_heatmap(model, img, threads);
  auto paths = export_heatmap(field, (fs::path(out_dir) / "heatmap").string());
  if (quantize) {
    auto qpaths = export_heatmap(quantize_heatmap(field), (fs::path(out_dir) / "heatmap_q").string());
    paths.insert(paths.end(), qpaths.begin(), qpaths.end());
  }
  for (const auto& p : paths) std::printf("%s\n", p.c_str());
  return 0;
}

void draw_cross(ImageBuf& img, Point p, int channel) {
  static const unsigned char colors[3][3] = {{255, 0, 0}, {0, 255, 0}, {0, 0, 255}};
  const unsigned char* col = colors[channel % 3];
  for (int k = -6; k <= 6; ++k) {
    for (auto [x, y] : {std::pair{p.x + k, p.y}, std::pair{p.x, p.y + k}}) {
      if (x < 0 || y < 0 || x >= img.width || y >= img.height) continue;
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = col[c];
    }
  }
}

int cmd_detect(const std::string& model_path, const std::string& image_path,
               const std::string& mode, float threshold, double nms_radius,
               const std::string& out_dir, int threads) {
  Model model = load_model(model_path);
  ImageBuf img = load_pnm(image_path);
  fs::create_directories(out_dir);
  const DetectMode m = mode == "dense" ? DetectMode::Dense : DetectMode::Saccade;
  DetectResult result = detect(model, img, m, threshold, nms_radius, threads);

  atomic_write_file((fs::path(out_dir) / "detections.csv").string(), detections_csv(result));

  ImageBuf annotated(img.width, img.height, 3);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c)
        annotated.at(x, y, c) = img.at(x, y, img.channels == 1 ? 0 : c);
  for (const Detection& d : result.detections) draw_cross(annotated, d.point, d.channel);
  save_pnm(annotated, (fs::path(out_dir) / "annotated.ppm").string());

  std::printf("%zu detections, %lld evals (%s mode)\n", result.detections.size(),
              result.total_evals, mode.c_str());
  return 0;
}

int cmd_benchmark(const std::string& model_path, const std::string& images_dir,
                  const std::string& out_file, int threads) {
  Model model = load_model(model_path);
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(images_dir)) {
    const std::string ext = entry.path().extension().string();
    if (ext == ".ppm" || ext == ".pgm") names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  if (names.empty()) throw DataError("benchmark: no .ppm/.pgm images in " + images_dir);

  std::string csv =
      "image,dense_evals,saccade_evals,eval_ratio,dense_ms,saccade_ms,agreed,dense_total,agreement\n";
  char buf[256];
  double sum_de = 0, sum_se = 0, sum_ratio = 0, sum_dms = 0, sum_sms = 0, sum_agree = 0;
  long long sum_agreed = 0, sum_total = 0;
  using clock = std::chrono::steady_clock;
  for (const std::string& name : names) {
    ImageBuf img = load_pnm((fs::path(images_dir) / name).string());
    const auto t0 = clock::now();
    DetectResult dense = detect(model, img, DetectMode::Dense, kDetectThreshold, kNmsRadius, threads);
    const auto t1 = clock::now();
    DetectResult sacc = detect(model, img, DetectMode::Saccade, kDetectThreshold, kNmsRadius, threads);
    const auto t2 = clock::now();

    long long agreed = 0;
    for (const Detection& d : dense.detections) {
      for (const Detection& s : sacc.detections) {
        if (s.channel == d.channel && euclid_dist(s.point, d.point) <= 5.0) {
          ++agreed;
          break;
        }
      }
    }
    const long long total = static_cast<long long>(dense.detections.size());
    const double ratio = static_cast<double>(sacc.total_evals) / static_cast<double>(dense.total_evals);
    const double dms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    const double sms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    const double agreement = total == 0 ? 1.0 : static_cast<double>(agreed) / static_cast<double>(total);
    std::snprintf(buf, sizeof(buf), "%s,%lld,%lld,%.6g,%.1f,%.1f,%lld,%lld,%.6g\n", name.c_str(),
                  dense.total_evals, sacc.total_evals, ratio, dms, sms, agreed, total, agreement);
    csv += buf;
    std::fputs(buf, stdout);
    sum_de += static_cast<double>(dense.total_evals);
    sum_se += static_cast<double>(sacc.total_evals);
    sum_ratio += ratio;
    sum_dms += dms;
    sum_sms += sms;
    sum_agree += agreement;
    sum_agreed += agreed;
    sum_total += total;
  }
  const double n = static_cast<double>(names.size());
  std::snprintf(buf, sizeof(buf), "mean,%.6g,%.6g,%.6g,%.1f,%.1f,%lld,%lld,%.6g\n", sum_de / n,
                sum_se / n, sum_ratio / n, sum_dms / n, sum_sms / n, sum_agreed, sum_total,
                sum_agree / n);
  csv += buf;
  std::fputs(buf, stdout);
  atomic_write_file(out_file, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distance-to-feature patch scoring: train, score, and detect by saccaded search"};
  app.require_subcommand(1);

  int synth_count = 10;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate labeled synthetic scenes");
  synth->add_option("--count", synth_count, "Number of images")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Base seed")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  std::string tr_images, tr_landmarks, tr_out, tr_init = "glorot", tr_sampling = "uniform";
  TrainConfig tr_cfg;
  float tr_dropout = 0.0f;
  int tr_patch = 35;
  auto* train_cmd = app.add_subcommand("train", "Train the patch scorer");
  train_cmd->add_option("--images", tr_images, "Image directory")->required();
  train_cmd->add_option("--landmarks", tr_landmarks, "Landmark file")->required();
  train_cmd->add_option("--batches", tr_cfg.batches, "Batch count");
  train_cmd->add_option("--batchsize", tr_cfg.batchsize, "Patches per batch");
  train_cmd->add_option("--lr", tr_cfg.lr, "Learning rate");
  train_cmd->add_option("--momentum", tr_cfg.momentum, "SGD momentum");
  train_cmd->add_option("--patch", tr_patch, "Patch size (odd)");
  train_cmd->add_option("--seed", tr_cfg.seed, "Run seed")->required();
  train_cmd->add_option("--out", tr_out, "Model output path")->required();
  train_cmd->add_option("--dropout", tr_dropout, "Dropout probability");
  train_cmd->add_option("--init", tr_init, "Init scheme")->check(CLI::IsMember({"glorot", "fanin"}));
  train_cmd->add_option("--sampling", tr_sampling, "Patch center sampling")
      ->check(CLI::IsMember({"uniform", "saccade"}));
  train_cmd->add_option("--d-inner", tr_cfg.score.d_inner, "Score inner knee distance");
  train_cmd->add_option("--d-outer", tr_cfg.score.d_outer, "Score zero distance");
  train_cmd->add_option("--s-knee", tr_cfg.score.s_knee, "Score value at the knee");

  std::string hm_model, hm_image, hm_out;
  bool hm_quantize = false;
  int hm_threads = 1;
  auto* heatmap_cmd = app.add_subcommand("heatmap", "Dense score field over an image");
  heatmap_cmd->add_option("--model", hm_model, "Model file")->required();
  heatmap_cmd->add_option("--image", hm_image, "PPM/PGM image")->required();
  heatmap_cmd->add_flag("--quantize", hm_quantize, "Also write the three-level variant");
  heatmap_cmd->add_option("--out", hm_out, "Output directory")->required();
  heatmap_cmd->add_option("--threads", hm_threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string dt_model, dt_image, dt_mode, dt_out;
  float dt_threshold = kDetectThreshold;
  double dt_nms = kNmsRadius;
  int dt_threads = 1;
  auto* detect_cmd = app.add_subcommand("detect", "Locate feature centroids");
  detect_cmd->add_option("--model", dt_model, "Model file")->required();
  detect_cmd->add_option("--image", dt_image, "PPM/PGM image")->required();
  detect_cmd->add_option("--mode", dt_mode, "dense or saccade")
      ->required()
      ->check(CLI::IsMember({"dense", "saccade"}));
  detect_cmd->add_option("--threshold", dt_threshold, "Detection threshold");
  detect_cmd->add_option("--nms", dt_nms, "NMS radius in px");
  detect_cmd->add_option("--out", dt_out, "Output directory")->required();
  detect_cmd->add_option("--threads", dt_threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string bm_model, bm_images, bm_out;
  int bm_threads = 1;
  auto* bench = app.add_subcommand("benchmark", "Dense vs saccade evaluation counts");
  bench->add_option("--model", bm_model, "Model file")->required();
  bench->add_option("--images", bm_images, "Image directory")->required();
  bench->add_option("--out", bm_out, "Report CSV path")->required();
  bench->add_option("--threads", bm_threads, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_count, synth_seed, synth_out);
    if (train_cmd->parsed()) {
      tr_cfg.patch = PatchSpec(tr_patch);
      tr_cfg.sampling = tr_sampling == "saccade" ? TrainConfig::Sampling::SaccadeCentered
                                                 : TrainConfig::Sampling::Uniform;
      const InitScheme scheme = tr_init == "fanin" ? InitScheme::FanIn : InitScheme::Glorot;
      return cmd_train(tr_images, tr_landmarks, tr_cfg, tr_dropout, scheme, tr_out);
    }
    if (heatmap_cmd->parsed())
      return cmd_heatmap(hm_model, hm_image, hm_quantize, hm_out, hm_threads);
    if (detect_cmd->parsed())
      return cmd_detect(dt_model, dt_image, dt_mode, dt_threshold, dt_nms, dt_out, dt_threads);
    if (bench->parsed()) return cmd_benchmark(bm_model, bm_images, bm_out, bm_threads);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 2;
}
