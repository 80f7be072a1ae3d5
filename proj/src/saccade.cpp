#include "dift/saccade.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "dift/errors.h"
#include "dift/sampler.h"

namespace dift {

namespace {

constexpr int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
constexpr int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};

std::uint64_t pack(Point p) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.x)) << 32) |
         static_cast<std::uint32_t>(p.y);
}

}  // namespace

const std::vector<float>& Scorer::eval(Point p) {
  auto it = memo_.find(pack(p));
  if (it != memo_.end()) return it->second;
  ++evals_;
  return memo_.emplace(pack(p), compute(p)).first->second;
}

ModelScorer::ModelScorer(const Model& model, const ImageBuf& img)
    : Scorer(model.arch.patch_size / 2, model.arch.patch_size / 2,
             img.width - model.arch.patch_size / 2 - 1,
             img.height - model.arch.patch_size / 2 - 1, model.arch.out_channels),
      model_(model),
      img_(img) {
  if (img.width < model.arch.patch_size || img.height < model.arch.patch_size)
    throw DataError("scorer: image too small for patch size " +
                    std::to_string(model.arch.patch_size));
}

std::vector<float> ModelScorer::compute(Point p) {
  Tensor patch = extract_patch(img_, p, model_.arch.patch_size);
  patch.set_dims({1, 3, model_.arch.patch_size, model_.arch.patch_size});
  Tensor out = forward(model_, patch, Mode::Infer);
  return std::vector<float>(out.data.begin(), out.data.end());
}

AnalyticConeScorer::AnalyticConeScorer(const LandmarkChannels& landmarks,
                                       const ScoreParams& params, int x_min, int y_min, int x_max,
                                       int y_max)
    : Scorer(x_min, y_min, x_max, y_max, landmarks.channel_count()),
      landmarks_(landmarks),
      params_(params) {}

std::vector<float> AnalyticConeScorer::compute(Point p) {
  std::vector<double> t = target_vector(p, landmarks_, params_);
  return std::vector<float>(t.begin(), t.end());
}

ClimbResult hill_climb(Scorer& scorer, Point start, int channel, const std::vector<int>& steps,
                       int max_iters) {
  if (!scorer.in_region(start))
    throw DataError("hill_climb: start (" + std::to_string(start.x) + "," +
                    std::to_string(start.y) + ") outside valid region");
  if (channel < 0 || channel >= scorer.channels())
    throw DataError("hill_climb: channel out of range");
  const long long before = scorer.evals();

  Point cur = start;
  float cur_score = scorer.eval(cur)[channel];
  // A non-positive score means no feature within the outer radius, so there is
  // no surface to ascend; probing would turn the climb into a local scan.
  if (cur_score <= 0.0f) return {cur, cur_score, scorer.evals() - before};
  std::size_t si = 0;
  int iters = 0;
  while (si < steps.size() && iters < max_iters) {
    ++iters;
    const int s = steps[si];
    Point best_p = cur;
    float best = cur_score;
    bool improved = false;
    for (int k = 0; k < 8; ++k) {
      const Point n{cur.x + kDx[k] * s, cur.y + kDy[k] * s};
      if (!scorer.in_region(n)) continue;
      const float v = scorer.eval(n)[channel];
      if (v > best) {
        best = v;
        best_p = n;
        improved = true;
      }
    }
    if (improved) {
      cur = best_p;
      cur_score = best;
    } else {
      ++si;
    }
  }
  return {cur, cur_score, scorer.evals() - before};
}

ClimbResult hill_climb(const Model& model, const ImageBuf& img, Point start, int channel,
                       const std::vector<int>& steps, int max_iters) {
  ModelScorer scorer(model, img);
  return hill_climb(scorer, start, channel, steps, max_iters);
}

std::vector<Detection> nms(std::vector<Detection> candidates, double nms_radius) {
  std::stable_sort(candidates.begin(), candidates.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.point.y != b.point.y) return a.point.y < b.point.y;
    return a.point.x < b.point.x;
  });
  std::vector<Detection> kept;
  for (const Detection& d : candidates) {
    bool ok = true;
    for (const Detection& k : kept) {
      if (k.channel == d.channel && euclid_dist(k.point, d.point) <= nms_radius) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(d);
  }
  return kept;
}

namespace {

std::vector<Detection> order_by_channel(std::vector<Detection> dets) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.channel < b.channel; });
  return dets;
}

}  // namespace

std::vector<Detection> dense_detections(const ScoreField& field, float threshold,
                                        double nms_radius) {
  std::vector<Detection> cands;
  for (int c = 0; c < field.channels; ++c)
    for (int y = 0; y < field.height; ++y)
      for (int x = 0; x < field.width; ++x) {
        const float v = field.at(c, y, x);
        if (!(v >= threshold)) continue;
        bool is_max = true;
        for (int k = 0; k < 8 && is_max; ++k) {
          const int nx = x + kDx[k], ny = y + kDy[k];
          if (nx < 0 || ny < 0 || nx >= field.width || ny >= field.height) continue;
          if (field.at(c, ny, nx) > v) is_max = false;
        }
        if (is_max) cands.push_back({c, {x + field.border, y + field.border}, v, 1});
      }
  return order_by_channel(nms(std::move(cands), nms_radius));
}

DetectResult detect(const Model& model, const ImageBuf& img, DetectMode mode, float threshold,
                    double nms_radius, int threads) {
  DetectResult result;
  const int border = model.arch.patch_size / 2;

  if (mode == DetectMode::Dense) {
    ScoreField field = dense_heatmap(model, img, threads);
    result.total_evals = static_cast<long long>(field.cells());
    result.detections = dense_detections(field, threshold, nms_radius);
    return result;
  }

  BoundaryChains chains = boundary_chains(img);
  std::vector<Point> starts = saccade_points(chains, kSaccadeStride, border);
  ModelScorer scorer(model, img);
  std::vector<Detection> cands;
  for (const Point& start : starts) {
    const std::vector<float> s0 = scorer.eval(start);
    for (int c = 0; c < scorer.channels(); ++c) {
      if (s0[c] < kStartSkip) continue;
      ClimbResult r = hill_climb(scorer, start, c);
      if (r.score >= threshold) cands.push_back({c, r.point, r.score, r.evals});
    }
  }
  result.detections = order_by_channel(nms(std::move(cands), nms_radius));
  result.total_evals = scorer.evals();
  return result;
}

std::string detections_csv(const DetectResult& result) {
  std::string out = "channel,x,y,score,evals\n";
  char buf[128];
  for (const Detection& d : result.detections) {
    std::snprintf(buf, sizeof(buf), "%d,%d,%d,%.9g,%lld\n", d.channel, d.point.x, d.point.y,
                  static_cast<double>(d.score), d.evals_used);
    out += buf;
  }
  out += "# evals=" + std::to_string(result.total_evals) + "\n";
  return out;
}

}  // namespace dift
