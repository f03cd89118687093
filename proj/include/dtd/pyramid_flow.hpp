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

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "dtd/core.hpp"

namespace dtd {

struct FlowConfig {
  int window_radius = 4;           // 9x9 integration window
  int pyramid_levels = 3;
  int max_iterations = 20;
  double epsilon = 0.01;           // stop when the update norm drops below this (px)
  double min_eigen_threshold = 1e-4;  // per-pixel min eigenvalue of the gradient matrix

  int window_size() const { return 2 * window_radius + 1; }
};

struct ImagePyramid {
  std::vector<GrayImage> levels;  // level 0 = full resolution

  int num_levels() const { return static_cast<int>(levels.size()); }
  const GrayImage& level(int k) const { return levels[static_cast<std::size_t>(k)]; }
};

enum class TrackStatus {
  Ok,
  LostTexture,   // min eigenvalue of the gradient matrix below threshold
  OutOfBounds,   // point (or its window) left the valid image region
};

enum class FBStatus {
  Ok,
  LostForward,
  LostBackward,
  OutOfBounds,
};

inline const char* to_string(FBStatus s) {
  switch (s) {
    case FBStatus::Ok: return "Ok";
    case FBStatus::LostForward: return "LostForward";
    case FBStatus::LostBackward: return "LostBackward";
    case FBStatus::OutOfBounds: return "OutOfBounds";
  }
  return "?";
}

struct FBResult {
  Point2 original{};           // x_{t-1}
  Point2 forward_estimate{};   // x̂_t
  Point2 backward_estimate{};  // x̂_{t-1}
  double fb_error = 0.0;       // ‖original − backward_estimate‖₂, defined for Ok only
  FBStatus status = FBStatus::Ok;
};

// 2x2 box-mean downsample; output dims are floor-halved.
inline GrayImage downsample_half(const GrayImage& img) {
  GrayImage out(img.width / 2, img.height / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const float sum = img.at(2 * x, 2 * y) + img.at(2 * x + 1, 2 * y) +
                        img.at(2 * x, 2 * y + 1) + img.at(2 * x + 1, 2 * y + 1);
      out.at(x, y) = 0.25f * sum;
    }
  }
  return out;
}

inline ImagePyramid build_pyramid(const GrayImage& img, const FlowConfig& cfg) {
  const int win = cfg.window_size();
  if (img.width < win || img.height < win) {
    throw ImageTooSmallError("build_pyramid: level 0 cannot host the LK window");
  }
  ImagePyramid pyr;
  pyr.levels.push_back(img);
  while (pyr.num_levels() < cfg.pyramid_levels) {
    const GrayImage& prev = pyr.levels.back();
    const int nw = prev.width / 2;
    const int nh = prev.height / 2;
    if (nw < win || nh < win) break;  // next level could not host the window
    pyr.levels.push_back(downsample_half(prev));
  }
  return pyr;
}

namespace detail {

// One iterative LK solve at a single pyramid level. `p` is the point position
// at this level; `guess` is the displacement carried in from coarser levels
// and is updated in place.
inline TrackStatus lk_solve_level(const GrayImage& prev, const GrayImage& next, Point2 p,
                                  const FlowConfig& cfg, Point2& guess) {
  const int r = cfg.window_radius;
  const int n = cfg.window_size() * cfg.window_size();

  // Spatial gradients need samples at +/-1 around every window point.
  if (!prev.in_bilinear_domain(p.x - r - 1, p.y - r - 1) ||
      !prev.in_bilinear_domain(p.x + r + 1, p.y + r + 1)) {
    return TrackStatus::OutOfBounds;
  }

  // Gradient matrix of the previous-frame window, fixed across iterations.
  std::vector<double> gx(static_cast<std::size_t>(n));
  std::vector<double> gy(static_cast<std::size_t>(n));
  std::vector<double> iv(static_cast<std::size_t>(n));
  double gxx = 0.0, gxy = 0.0, gyy = 0.0;
  int idx = 0;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx, ++idx) {
      const double qx = p.x + dx;
      const double qy = p.y + dy;
      const double dgx = 0.5 * (prev.sample_bilinear(qx + 1.0, qy) - prev.sample_bilinear(qx - 1.0, qy));
      const double dgy = 0.5 * (prev.sample_bilinear(qx, qy + 1.0) - prev.sample_bilinear(qx, qy - 1.0));
      gx[static_cast<std::size_t>(idx)] = dgx;
      gy[static_cast<std::size_t>(idx)] = dgy;
      iv[static_cast<std::size_t>(idx)] = prev.sample_bilinear(qx, qy);
      gxx += dgx * dgx;
      gxy += dgx * dgy;
      gyy += dgy * dgy;
    }
  }

  // Texture gate: smaller eigenvalue of G, normalized per window pixel.
  const double trace_half = 0.5 * (gxx + gyy);
  const double det = gxx * gyy - gxy * gxy;
  const double disc = std::sqrt(std::max(trace_half * trace_half - det, 0.0));
  const double min_eig = (trace_half - disc) / n;
  if (min_eig < cfg.min_eigen_threshold) return TrackStatus::LostTexture;
  const double inv_det = 1.0 / (gxx * gyy - gxy * gxy);

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const double cx = p.x + guess.x;
    const double cy = p.y + guess.y;
    if (!next.in_bilinear_domain(cx - r, cy - r) || !next.in_bilinear_domain(cx + r, cy + r)) {
      return TrackStatus::OutOfBounds;
    }
    double bx = 0.0, by = 0.0;
    idx = 0;
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx, ++idx) {
        const double di = iv[static_cast<std::size_t>(idx)] - next.sample_bilinear(cx + dx, cy + dy);
        bx += di * gx[static_cast<std::size_t>(idx)];
        by += di * gy[static_cast<std::size_t>(idx)];
      }
    }
    const double vx = (gyy * bx - gxy * by) * inv_det;
    const double vy = (gxx * by - gxy * bx) * inv_det;
    guess.x += vx;
    guess.y += vy;
    if (std::hypot(vx, vy) < cfg.epsilon) break;
  }
  return TrackStatus::Ok;
}

}  // namespace detail

// Coarse-to-fine iterative Lucas-Kanade for a single point. Returns the
// tracked position in `next` and a status; failures are data, not exceptions.
inline std::pair<Point2, TrackStatus> lk_track_point(const ImagePyramid& prev, const ImagePyramid& next,
                                                     Point2 p, const FlowConfig& cfg) {
  const int levels = std::min(prev.num_levels(), next.num_levels());
  Point2 guess{0.0, 0.0};
  for (int level = levels - 1; level >= 0; --level) {
    const double scale = static_cast<double>(1 << level);
    const Point2 pl{p.x / scale, p.y / scale};
    const TrackStatus st = detail::lk_solve_level(prev.level(level), next.level(level), pl, cfg, guess);
    if (st != TrackStatus::Ok) return {p, st};
    if (level > 0) {
      guess.x *= 2.0;
      guess.y *= 2.0;
    }
  }
  return {{p.x + guess.x, p.y + guess.y}, TrackStatus::Ok};
}

inline std::pair<Point2, TrackStatus> lk_track_point(const GrayImage& prev, const GrayImage& next,
                                                     Point2 p, const FlowConfig& cfg) {
  return lk_track_point(build_pyramid(prev, cfg), build_pyramid(next, cfg), p, cfg);
}

// Forward-backward tracking over prebuilt pyramids (built once, reused for all
// points). fb_error = ‖x_{t-1} − x̂_{t-1}‖₂.
inline std::vector<FBResult> track_forward_backward(const ImagePyramid& prev, const ImagePyramid& next,
                                                    const std::vector<Point2>& points, const FlowConfig& cfg) {
  if (points.empty()) throw EmptyPointListError("track_forward_backward: no points");
  if (!prev.level(0).same_size(next.level(0))) {
    throw DimensionMismatchError("track_forward_backward: image dimensions differ");
  }
  std::vector<FBResult> results;
  results.reserve(points.size());
  for (const Point2& p : points) {
    FBResult r;
    r.original = p;
    auto [fwd, fwd_status] = lk_track_point(prev, next, p, cfg);
    if (fwd_status != TrackStatus::Ok) {
      r.status = fwd_status == TrackStatus::OutOfBounds ? FBStatus::OutOfBounds : FBStatus::LostForward;
      results.push_back(r);
      continue;
    }
    r.forward_estimate = fwd;
    auto [bwd, bwd_status] = lk_track_point(next, prev, fwd, cfg);
    if (bwd_status != TrackStatus::Ok) {
      r.status = FBStatus::LostBackward;
      results.push_back(r);
      continue;
    }
    r.backward_estimate = bwd;
    r.fb_error = distance(p, bwd);
    r.status = FBStatus::Ok;
    results.push_back(r);
  }
  return results;
}

inline std::vector<FBResult> track_forward_backward(const GrayImage& prev, const GrayImage& next,
                                                    const std::vector<Point2>& points, const FlowConfig& cfg) {
  if (!prev.same_size(next)) throw DimensionMismatchError("track_forward_backward: image dimensions differ");
  return track_forward_backward(build_pyramid(prev, cfg), build_pyramid(next, cfg), points, cfg);
}

struct MedianFilterResult {
  std::vector<std::size_t> kept;  // indices into the input list, ascending
  double median_error = 0.0;
};

// Keep Ok results whose FB error does not exceed the median FB error over all
// Ok results. Non-Ok entries are never kept.
inline MedianFilterResult filter_by_median(const std::vector<FBResult>& results) {
  std::vector<double> errors;
  errors.reserve(results.size());
  for (const FBResult& r : results) {
    if (r.status == FBStatus::Ok) errors.push_back(r.fb_error);
  }
  if (errors.empty()) throw NoValidPointsError("filter_by_median: no Ok results");
  MedianFilterResult out;
  out.median_error = median_of(std::move(errors));
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].status == FBStatus::Ok && results[i].fb_error <= out.median_error) {
      out.kept.push_back(i);
    }
  }
  return out;
}

}  // namespace dtd
