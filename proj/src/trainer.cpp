#include "dift/trainer.h"

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "dift/boundary.h"
#include "dift/errors.h"
#include "dift/image.h"
#include "dift/rng.h"

namespace dift {

void TrainConfig::validate() const {
  if (batches < 0) throw DataError("batches must be >= 0");
  if (batchsize < 1) throw DataError("batchsize must be >= 1");
  if (!(lr >= 0.0f) || !std::isfinite(lr)) throw DataError("lr must be finite and >= 0");
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw DataError("momentum must be in [0, 1)");
  patch.validate();
  score.validate();
}

void sgd_step(NamedTensors<float>& params, const NamedTensors<float>& grads,
              NamedTensors<float>& velocity, float lr, float momentum) {
  if (grads.size() != params.size()) throw DimError("sgd_step: gradient/parameter count mismatch");
  if (velocity.empty()) {
    velocity.reserve(params.size());
    for (const auto& [name, p] : params) velocity.emplace_back(name, Tensor::zeros_like(p));
  }
  if (velocity.size() != params.size()) throw DimError("sgd_step: velocity/parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& [pname, p] = params[i];
    const auto& [gname, g] = grads[i];
    auto& [vname, v] = velocity[i];
    if (gname != pname || vname != pname)
      throw DimError("sgd_step: tensor name mismatch at '" + pname + "'");
    if (!g.same_dims(p) || !v.same_dims(p))
      throw DimError("sgd_step: shape mismatch for '" + pname + "'");
    float* pd = p.data.data();
    const float* gd = g.data.data();
    float* vd = v.data.data();
    const std::size_t n = p.numel();
    for (std::size_t k = 0; k < n; ++k) {
      vd[k] = momentum * vd[k] + gd[k];
      pd[k] -= lr * vd[k];
    }
  }
}

namespace {

void check_dataset(const Model& model, const std::vector<LabeledImage>& dataset,
                   const TrainConfig& cfg) {
  if (dataset.empty()) throw DataError("train: dataset is empty");
  for (const auto& item : dataset) {
    const int span_x = item.image.width - 2 * cfg.patch.border;
    const int span_y = item.image.height - 2 * cfg.patch.border;
    if (span_x <= 0 || span_y <= 0)
      throw DataError("train: image '" + item.id + "' too small for patch border " +
                      std::to_string(cfg.patch.border));
    if (item.landmarks.channel_count() != model.arch.out_channels)
      throw DataError("train: image '" + item.id + "' has " +
                      std::to_string(item.landmarks.channel_count()) +
                      " landmark channels, model expects " +
                      std::to_string(model.arch.out_channels));
  }
}

}  // namespace

LossTrace train(Model& model, const std::vector<LabeledImage>& dataset, const TrainConfig& cfg,
                const ProgressFn& progress) {
  cfg.validate();
  if (cfg.patch.size != model.arch.patch_size)
    throw DataError("train: patch size " + std::to_string(cfg.patch.size) +
                    " does not match model patch size " + std::to_string(model.arch.patch_size));
  check_dataset(model, dataset, cfg);

  Rng root(cfg.seed);
  Rng pick_rng = root.fork(1);
  Rng coord_rng = root.fork(2);
  Rng drop_rng = root.fork(3);

  // Saccade-centered sampling draws patch centers from each image's interest
  // points; computed lazily since uniform mode never needs them.
  std::vector<std::optional<std::vector<Point>>> interest(dataset.size());
  auto interest_points = [&](std::size_t idx) -> const std::vector<Point>& {
    auto& slot = interest[idx];
    if (!slot) {
      BoundaryChains chains = boundary_chains(dataset[idx].image);
      slot = saccade_points(chains, kSaccadeStride, cfg.patch.border);
      if (slot->empty())
        throw DataError("train: image '" + dataset[idx].id + "' yields no saccade points");
    }
    return *slot;
  };

  const int B = cfg.batchsize;
  const int S = cfg.patch.size;
  const int C = model.arch.out_channels;
  Tensor batch({B, 3, S, S});
  Tensor target({B, C});

  NamedTensors<float> velocity;
  LossTrace trace;
  trace.losses.reserve(cfg.batches);
  trace.running_mean.reserve(cfg.batches);
  double loss_sum = 0.0;

  for (int step = 0; step < cfg.batches; ++step) {
    const std::size_t idx = pick_rng.uniform_u32(static_cast<std::uint32_t>(dataset.size()));
    const LabeledImage& item = dataset[idx];

    for (int b = 0; b < B; ++b) {
      Point center;
      if (cfg.sampling == TrainConfig::Sampling::SaccadeCentered) {
        const auto& pts = interest_points(idx);
        center = pts[coord_rng.uniform_u32(static_cast<std::uint32_t>(pts.size()))];
      } else {
        center = rand_coords(item.image.width, item.image.height, cfg.patch, coord_rng);
      }
      Tensor patch = extract_patch(item.image, center, cfg.patch.size);
      std::copy(patch.data.begin(), patch.data.end(),
                batch.data.begin() + static_cast<std::size_t>(b) * patch.numel());
      std::vector<double> tv = target_vector(center, item.landmarks, cfg.score);
      for (int c = 0; c < C; ++c) target.at(b, c) = static_cast<float>(tv[c]);
    }

    Tape tape;
    Tensor pred = net_forward<float>(model.params, model.arch, batch, Mode::Train, &drop_rng, &tape);
    const double loss = mse_loss(pred, target);
    if (!std::isfinite(loss))
      throw NumericError("train: non-finite loss at batch " + std::to_string(step));

    Tensor gout = mse_grad(pred, target);
    NetGrads<float> grads = net_backward<float>(model.params, model.arch, tape, gout);
    sgd_step(model.params, grads.params, velocity, cfg.lr, cfg.momentum);

    loss_sum += loss;
    trace.losses.push_back(loss);
    trace.running_mean.push_back(loss_sum / static_cast<double>(step + 1));
    if (progress) progress(step, loss, trace.running_mean.back());
  }
  return trace;
}

void write_loss_csv(const LossTrace& trace, const std::string& path) {
  std::string out = "batch,loss,running_mean\n";
  char buf[96];
  for (std::size_t i = 0; i < trace.losses.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", i, trace.losses[i], trace.running_mean[i]);
    out += buf;
  }
  atomic_write_file(path, out);
}

}  // namespace dift
