// Copyright 2026 The dtdtrack Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "dtd/core.hpp"

namespace dtd {

inline constexpr int kPointsPerLandmark = 16;
inline constexpr int kCloudSize = kNumLandmarks * kPointsPerLandmark;  // 80

// The tracking cloud: 16 grid points per landmark, 80 total.
struct PointCloud {
  std::vector<Point2> points;       // size 80
  std::vector<int> owner_landmark;  // same size, values in [0, 5)
};

struct BoxEstimate {
  BoundingBox box;
  double dx = 0.0;
  double dy = 0.0;
  double scale = 1.0;
  std::size_t support = 0;  // point pairs the medians were taken over
};

// Symmetric 4x4 grid around each landmark at offsets {±0.5s, ±1.5s}² with
// s = 5% of the box short side. The grid centroid coincides with the landmark,
// so the landmark itself is carried implicitly as the group centroid.
inline PointCloud generate_grid_points(const LandmarkSet& lm, const BoundingBox& box) {
  const double s = 0.05 * box.short_side();
  if (s <= 0.0) throw DegenerateBoxError("generate_grid_points: non-positive grid spacing");
  static constexpr double kOffsets[4] = {-1.5, -0.5, 0.5, 1.5};
  PointCloud cloud;
  cloud.points.reserve(kCloudSize);
  cloud.owner_landmark.reserve(kCloudSize);
  for (int l = 0; l < kNumLandmarks; ++l) {
    for (double oy : kOffsets) {
      for (double ox : kOffsets) {
        cloud.points.push_back({lm[l].x + ox * s, lm[l].y + oy * s});
        cloud.owner_landmark.push_back(l);
      }
    }
  }
  return cloud;
}

inline constexpr std::size_t kDefaultMinSupport = 8;

// Median translation + median pairwise-distance-ratio scale, applied about the
// previous box center. Robust to just under half the pairs being corrupted.
inline BoxEstimate estimate_box(const BoundingBox& prev_box,
                                const std::vector<std::pair<Point2, Point2>>& pairs,
                                std::size_t min_support = kDefaultMinSupport) {
  if (pairs.size() < min_support) {
    throw InsufficientSupportError("estimate_box: fewer pairs than min_support");
  }
  std::vector<double> dxs, dys;
  dxs.reserve(pairs.size());
  dys.reserve(pairs.size());
  for (const auto& [prev, curr] : pairs) {
    dxs.push_back(curr.x - prev.x);
    dys.push_back(curr.y - prev.y);
  }
  BoxEstimate est;
  est.dx = median_of(std::move(dxs));
  est.dy = median_of(std::move(dys));
  est.support = pairs.size();

  std::vector<double> ratios;
  ratios.reserve(pairs.size() * (pairs.size() - 1) / 2);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      const double d_prev = distance(pairs[i].first, pairs[j].first);
      if (d_prev < 1e-6) continue;  // degenerate pair
      ratios.push_back(distance(pairs[i].second, pairs[j].second) / d_prev);
    }
  }
  est.scale = ratios.empty() ? 1.0 : median_of(std::move(ratios));

  const Point2 c = prev_box.center();
  const double nw = prev_box.w * est.scale;
  const double nh = prev_box.h * est.scale;
  est.box = {c.x + est.dx - 0.5 * nw, c.y + est.dy - 0.5 * nh, nw, nh};
  return est;
}

// Transport landmarks from prev_box to new_box, preserving box-normalized
// coordinates.
inline LandmarkSet estimate_landmarks(const LandmarkSet& prev_lm, const BoundingBox& prev_box,
                                      const BoundingBox& new_box) {
  return normalized_to_landmarks(landmarks_to_normalized(prev_lm, prev_box), new_box);
}

}  // namespace dtd
