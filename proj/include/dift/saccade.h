#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "dift/boundary.h"
#include "dift/heatmap.h"
#include "dift/image.h"
#include "dift/model.h"
#include "dift/score.h"

namespace dift {

inline constexpr float kDetectThreshold = 0.5f;
inline constexpr double kNmsRadius = 20.0;
inline constexpr float kStartSkip = 0.05f;
inline constexpr int kMaxClimbIters = 50;
inline const std::vector<int> kClimbSteps = {4, 2, 1};

// Multi-channel score source over the valid patch-center rectangle, memoized:
// revisiting a point is free and evals() counts distinct evaluations.
class Scorer {
 public:
  Scorer(int x_min, int y_min, int x_max, int y_max, int channels)
      : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max), channels_(channels) {}
  virtual ~Scorer() = default;

  const std::vector<float>& eval(Point p);
  bool in_region(Point p) const {
    return p.x >= x_min_ && p.x <= x_max_ && p.y >= y_min_ && p.y <= y_max_;
  }
  long long evals() const { return evals_; }
  int channels() const { return channels_; }

 protected:
  virtual std::vector<float> compute(Point p) = 0;

 private:
  int x_min_, y_min_, x_max_, y_max_, channels_;
  long long evals_ = 0;
  std::unordered_map<std::uint64_t, std::vector<float>> memo_;
};

// Network forward on the patch centered at p, inference mode.
class ModelScorer : public Scorer {
 public:
  ModelScorer(const Model& model, const ImageBuf& img);

 protected:
  std::vector<float> compute(Point p) override;

 private:
  const Model& model_;
  const ImageBuf& img_;
};

// The ideal cone field: score_fn of the distance to the nearest centroid of
// each channel. Network-free stand-in for oracle tests.
class AnalyticConeScorer : public Scorer {
 public:
  AnalyticConeScorer(const LandmarkChannels& landmarks, const ScoreParams& params, int x_min,
                     int y_min, int x_max, int y_max);

 protected:
  std::vector<float> compute(Point p) override;

 private:
  LandmarkChannels landmarks_;
  ScoreParams params_;
};

struct ClimbResult {
  Point point;
  float score = 0.0f;
  long long evals = 0;
};

// Coarse-to-fine neighborhood ascent: at each step size, probe the 8 neighbors
// and move to the strict maximum (first of N,NE,E,SE,S,SW,W,NW on ties); when
// nothing improves, shrink the step. A start whose score is not positive
// returns immediately: the score surface is zero beyond the outer radius, so
// there is nothing to ascend. evals counts evaluations this climb added.
ClimbResult hill_climb(Scorer& scorer, Point start, int channel,
                       const std::vector<int>& steps = kClimbSteps,
                       int max_iters = kMaxClimbIters);
ClimbResult hill_climb(const Model& model, const ImageBuf& img, Point start, int channel,
                       const std::vector<int>& steps = kClimbSteps,
                       int max_iters = kMaxClimbIters);

struct Detection {
  int channel = 0;
  Point point;
  float score = 0.0f;
  long long evals_used = 0;
};

enum class DetectMode { Dense, Saccade };

struct DetectResult {
  std::vector<Detection> detections;
  long long total_evals = 0;
};

// Greedy per-channel NMS: descending score (ties by y then x), keep a
// detection iff it is farther than nms_radius from everything already kept.
std::vector<Detection> nms(std::vector<Detection> candidates, double nms_radius);

// Thresholded local maxima of a score field plus NMS, reported in image
// coordinates. The dense half of detect(), usable on any precomputed field.
std::vector<Detection> dense_detections(const ScoreField& field, float threshold = kDetectThreshold,
                                        double nms_radius = kNmsRadius);

// Dense mode scores every valid patch center and keeps thresholded local
// maxima; saccade mode hill-climbs from boundary interest points, skipping
// starts whose initial score is below kStartSkip. Both end with the same NMS.
DetectResult detect(const Model& model, const ImageBuf& img, DetectMode mode,
                    float threshold = kDetectThreshold, double nms_radius = kNmsRadius,
                    int threads = 1);

std::string detections_csv(const DetectResult& result);

}  // namespace dift
