#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dift/image.h"
#include "dift/rng.h"
#include "dift/score.h"
#include "dift/tensor.h"

namespace dift {

struct PatchSpec {
  int size = 35;
  int border = 17;

  PatchSpec() = default;
  explicit PatchSpec(int s) : size(s), border(s / 2) {}
  PatchSpec(int s, int b) : size(s), border(b) {}

  void validate() const;
};

struct LabeledImage {
  ImageBuf image;
  LandmarkChannels landmarks;
  std::string id;
};

// Uniform over [border, width-border-1] x [border, height-border-1].
Point rand_coords(int width, int height, const PatchSpec& spec, Rng& rng);

// [3,size,size] floats in [0,1], channel-first, sample/255. Grayscale input is
// promoted to three identical planes. Out-of-bounds patches are an error.
Tensor extract_patch(const ImageBuf& img, Point center, int size);

// Maps each of the five CelebA landmark columns (by point index 0..4:
// lefteye, righteye, nose, leftmouth, rightmouth) to a named channel.
struct ChannelGrouping {
  std::vector<std::pair<std::string, std::vector<int>>> groups;

  static ChannelGrouping default_grouping() {
    return {{{"eyes", {0, 1}}, {"nose", {2}}, {"mouth_corners", {3, 4}}}};
  }
};

// File order preserved so load -> save -> load is a fixed point.
using LandmarkSet = std::vector<std::pair<std::string, LandmarkChannels>>;

LandmarkSet load_celeba_landmarks(const std::string& path,
                                  const ChannelGrouping& grouping = ChannelGrouping::default_grouping());
void save_celeba_landmarks(const LandmarkSet& set, const std::string& path);

// Labeled synthetic scene: two rings (eyes), one filled disc (nose), two
// crosses (mouth corners) on a textured background of smooth blotches, fine
// noise, dipole hatching strokes and a soft color halo around each feature.
struct SynthSpec {
  int width = 178;
  int height = 218;

  int ring_radius = 8;
  int ring_thickness = 3;
  int disc_radius = 7;
  int cross_arm = 8;

  double base = 150.0;
  double blotch_amp = 12.0;
  int blotch_cell = 24;
  double noise_amp = 8.0;
  int strokes = 150;
  double stroke_len_min = 30.0, stroke_len_max = 60.0;
  double stroke_amp_min = 14.0, stroke_amp_max = 22.0;
  double stroke_excl = 42.0;
  int stroke_attempts = 60;
  double halo_amp = 26.0;
  double halo_radius = 52.0;
  double feature_jitter = 10.0;
  int slot_margin = 30;
  int slot_jitter = 5;
  double min_dist_cross_channel = 80.0;
  double min_dist_same_channel = 50.0;
  int max_place_attempts = 1000;
};

LabeledImage synth_image(std::uint64_t seed, const SynthSpec& spec = {});

}  // namespace dift
