#include "dift/score.h"

#include <cmath>

namespace dift {

double euclid_dist(Point p1, Point p2) {
  const double dx = static_cast<double>(p1.x) - p2.x;
  const double dy = static_cast<double>(p1.y) - p2.y;
  return std::sqrt(dx * dx + dy * dy);
}

void ScoreParams::validate() const {
  if (!(d_inner > 0.0 && d_inner < d_outer)) throw DataError("score params: need 0 < d_inner < d_outer");
  if (!(s_knee > 0.0 && s_knee < 1.0)) throw DataError("score params: need 0 < s_knee < 1");
}

double score_fn(double d, const ScoreParams& params) {
  params.validate();
  if (d < 0.0) throw DataError("score_fn: distance must be non-negative");
  if (d <= params.d_inner) return 1.0 - (1.0 - params.s_knee) * (d / params.d_inner);
  if (d <= params.d_outer)
    return params.s_knee * ((params.d_outer - d) / (params.d_outer - params.d_inner));
  return 0.0;
}

std::vector<double> target_vector(Point p, const LandmarkChannels& landmarks,
                                  const ScoreParams& params) {
  std::vector<double> out;
  out.reserve(landmarks.channels.size());
  for (const auto& [name, pts] : landmarks.channels) {
    if (pts.empty()) throw DataError("target_vector: channel '" + name + "' has no landmarks");
    double best = euclid_dist(p, pts.front());
    for (std::size_t i = 1; i < pts.size(); ++i) best = std::min(best, euclid_dist(p, pts[i]));
    out.push_back(score_fn(best, params));
  }
  return out;
}

}  // namespace dift
