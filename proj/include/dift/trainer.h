#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dift/model.h"
#include "dift/sampler.h"
#include "dift/score.h"

namespace dift {

struct TrainConfig {
  int batches = 2000;
  int batchsize = 32;
  float lr = 0.05f;
  float momentum = 0.9f;
  std::uint64_t seed = 0;
  PatchSpec patch;
  ScoreParams score;

  enum class Sampling { Uniform, SaccadeCentered };
  Sampling sampling = Sampling::Uniform;

  void validate() const;
};

struct LossTrace {
  std::vector<double> losses;
  std::vector<double> running_mean;
};

// v <- momentum * v + g; theta <- theta - lr * v. Velocities start at zero and
// are owned by the caller so training can be stepped externally.
void sgd_step(NamedTensors<float>& params, const NamedTensors<float>& grads,
              NamedTensors<float>& velocity, float lr, float momentum);

using ProgressFn = std::function<void(int batch, double loss, double running_mean)>;

// One batch per step, all patches drawn from a single uniformly chosen image.
// Everything (image choice, coords, dropout) derives from cfg.seed.
LossTrace train(Model& model, const std::vector<LabeledImage>& dataset, const TrainConfig& cfg,
                const ProgressFn& progress = {});

void write_loss_csv(const LossTrace& trace, const std::string& path);

}  // namespace dift
