#pragma once

#include <string>
#include <vector>

#include "dift/errors.h"

namespace dift {

// Pixel coordinates, origin top-left, x = column, y = row.
struct Point {
  int x = 0;
  int y = 0;
};

inline bool operator==(Point a, Point b) { return a.x == b.x && a.y == b.y; }
inline bool operator!=(Point a, Point b) { return !(a == b); }

double euclid_dist(Point p1, Point p2);

// Piecewise-linear distance-to-score profile: 1 at d=0, s_knee at d_inner,
// 0 at d_outer and beyond. Defaults give 1 - 3d/80 on [0,20], 1/2 - d/80 on
// (20,40], 0 past 40.
struct ScoreParams {
  double d_inner = 20.0;
  double d_outer = 40.0;
  double s_knee = 0.25;

  void validate() const;
};

double score_fn(double d, const ScoreParams& params = {});

struct LandmarkChannels {
  std::vector<std::pair<std::string, std::vector<Point>>> channels;

  static LandmarkChannels default_channels() {
    return {{{"eyes", {}}, {"nose", {}}, {"mouth_corners", {}}}};
  }

  int channel_count() const { return static_cast<int>(channels.size()); }
  const std::vector<Point>& points(int c) const { return channels[static_cast<std::size_t>(c)].second; }
  const std::string& name(int c) const { return channels[static_cast<std::size_t>(c)].first; }
};

// Component c = score of the distance from p to the nearest point in channel c.
std::vector<double> target_vector(Point p, const LandmarkChannels& landmarks,
                                  const ScoreParams& params = {});

}  // namespace dift
