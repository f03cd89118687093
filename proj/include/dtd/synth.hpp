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
#include <cstdint>
#include <utility>
#include <vector>

#include "dtd/core.hpp"
#include "dtd/face_detector.hpp"

namespace dtd {

// ---------------------------------------------------------------------------
// Deterministic value noise
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Lattice value in [0,1), a pure function of (seed, gx, gy).
inline double lattice01(std::uint64_t seed, std::int64_t gx, std::int64_t gy) {
  const std::uint64_t h =
      splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(gx) * 0x632BE59BD9B4E019ULL ^
                                   splitmix64(static_cast<std::uint64_t>(gy))));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

// Bilinearly interpolated lattice noise with the given cell size, in [0,1).
inline double value_noise(std::uint64_t seed, double x, double y, double cell) {
  const double u = x / cell;
  const double v = y / cell;
  const double fu = std::floor(u);
  const double fv = std::floor(v);
  const auto gx = static_cast<std::int64_t>(fu);
  const auto gy = static_cast<std::int64_t>(fv);
  const double ax = u - fu;
  const double ay = v - fv;
  const double n00 = lattice01(seed, gx, gy);
  const double n10 = lattice01(seed, gx + 1, gy);
  const double n01 = lattice01(seed, gx, gy + 1);
  const double n11 = lattice01(seed, gx + 1, gy + 1);
  return (1.0 - ay) * ((1.0 - ax) * n00 + ax * n10) + ay * ((1.0 - ax) * n01 + ax * n11);
}

// ---------------------------------------------------------------------------
// Scene specification
// ---------------------------------------------------------------------------

struct FramePose {
  Point2 center{};    // face box center, frame coordinates
  double scale = 1.0;  // multiplies base_face_size
};

struct OcclusionEvent {
  int first_frame = 0;
  int last_frame = 0;  // inclusive
  BoundingBox rect;    // frame coordinates
};

struct SyntheticSceneSpec {
  int frame_w = 1280;
  int frame_h = 720;
  int num_frames = 1;
  double base_face_size = 120.0;  // face box side at scale 1 (square)
  std::uint64_t texture_seed = 1;
  std::vector<FramePose> trajectory;  // one pose per frame
  std::vector<OcclusionEvent> occlusions;
};

// Fixed face layout, in face-box fractional coordinates.
struct FacePattern {
  static constexpr double kEllipseRx = 0.46;
  static constexpr double kEllipseRy = 0.48;
  static constexpr double kEyeY = 0.40;
  static constexpr double kLeftEyeX = 0.31;
  static constexpr double kRightEyeX = 0.69;
  static constexpr double kEyeRadius = 0.075;
  static constexpr double kNoseTipY = 0.60;
  static constexpr double kMouthY = 0.76;
  static constexpr double kMouthHalfW = 0.16;
  static constexpr double kMouthHalfH = 0.035;

  static std::array<Point2, kNumLandmarks> landmark_fractions() {
    return {Point2{kLeftEyeX, kEyeY}, Point2{kRightEyeX, kEyeY}, Point2{0.5, kNoseTipY},
            Point2{0.5 - kMouthHalfW, kMouthY}, Point2{0.5 + kMouthHalfW, kMouthY}};
  }
};

// Deterministic renderer: background value noise, a structured face pattern
// (bright ellipse, dark eye blobs, mid-intensity nose wedge, dark mouth bar)
// moved/scaled per trajectory, plus optional occluder rectangles. Ground
// truth comes from the trajectory analytically.
class SyntheticVideo {
 public:
  explicit SyntheticVideo(SyntheticSceneSpec spec) : spec_(std::move(spec)) {
    if (spec_.frame_w < 8 || spec_.frame_h < 8 || spec_.num_frames < 1 || spec_.base_face_size <= 0.0) {
      throw InvalidSpecError("SyntheticVideo: bad frame size / count / face size");
    }
    if (spec_.trajectory.size() != static_cast<std::size_t>(spec_.num_frames)) {
      throw InvalidSpecError("SyntheticVideo: trajectory length != num_frames");
    }
    for (const FramePose& pose : spec_.trajectory) {
      if (pose.scale <= 0.0) throw InvalidSpecError("SyntheticVideo: non-positive scale");
    }
    for (const OcclusionEvent& occ : spec_.occlusions) {
      if (occ.last_frame < occ.first_frame) throw InvalidSpecError("SyntheticVideo: bad occlusion range");
    }
  }

  const SyntheticSceneSpec& spec() const { return spec_; }
  int num_frames() const { return spec_.num_frames; }

  BoundingBox gt_box(int t) const {
    const FramePose& pose = spec_.trajectory[static_cast<std::size_t>(t)];
    const double side = spec_.base_face_size * pose.scale;
    return {pose.center.x - 0.5 * side, pose.center.y - 0.5 * side, side, side};
  }

  LandmarkSet gt_landmarks(int t) const {
    const BoundingBox box = gt_box(t);
    LandmarkSet lm;
    const auto fractions = FacePattern::landmark_fractions();
    for (int i = 0; i < kNumLandmarks; ++i) {
      lm[i] = {box.x + fractions[static_cast<std::size_t>(i)].x * box.w,
               box.y + fractions[static_cast<std::size_t>(i)].y * box.h};
    }
    return lm;
  }

  bool occluded(int t) const {
    for (const OcclusionEvent& occ : spec_.occlusions) {
      if (t >= occ.first_frame && t <= occ.last_frame) return true;
    }
    return false;
  }

  GrayImage render(int t) const {
    GrayImage frame = render_background();
    composite_face(frame, gt_box(t));
    for (const OcclusionEvent& occ : spec_.occlusions) {
      if (t >= occ.first_frame && t <= occ.last_frame) draw_occluder(frame, occ.rect);
    }
    return frame;
  }

  // Draws the face pattern into an arbitrary frame; render() uses this, and
  // multi-face scenes can be composed from it.
  void composite_face(GrayImage& frame, const BoundingBox& box) const { draw_face(frame, box); }

 private:
  // Background texture is deliberately fine-grained (no coherent structure
  // above ~12 px), so band-contrast features average it out at face scales
  // while point tracking still sees gradients everywhere.
  GrayImage render_background() const {
    GrayImage frame(spec_.frame_w, spec_.frame_h);
    const std::uint64_t s = spec_.texture_seed;
    for (int y = 0; y < frame.height; ++y) {
      for (int x = 0; x < frame.width; ++x) {
        const double n = 0.30 * value_noise(s + 1, x, y, 4.0) + 0.40 * value_noise(s + 2, x, y, 2.4) +
                         0.30 * value_noise(s + 3, x, y, 1.5);
        frame.at(x, y) = static_cast<float>(0.30 + 0.32 * n);
      }
    }
    return frame;
  }

  // Skin carries fine noise in face-local coordinates so the texture moves
  // and scales with the face, which is what point tracking latches onto.
  double face_texture(double u, double v) const {
    return 0.08 * (value_noise(spec_.texture_seed + 9, u * spec_.base_face_size,
                               v * spec_.base_face_size, 3.0) -
                   0.5);
  }

  void draw_face(GrayImage& frame, const BoundingBox& box) const {
    const int x0 = std::max(0, static_cast<int>(std::floor(box.x)));
    const int y0 = std::max(0, static_cast<int>(std::floor(box.y)));
    const int x1 = std::min(frame.width, static_cast<int>(std::ceil(box.right())) + 1);
    const int y1 = std::min(frame.height, static_cast<int>(std::ceil(box.bottom())) + 1);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const double u = (x - box.x) / box.w;
        const double v = (y - box.y) / box.h;
        const double eu = (u - 0.5) / FacePattern::kEllipseRx;
        const double ev = (v - 0.5) / FacePattern::kEllipseRy;
        if (eu * eu + ev * ev > 1.0) continue;
        double value = 0.85 + face_texture(u, v);
        const double le = std::hypot(u - FacePattern::kLeftEyeX, v - FacePattern::kEyeY);
        const double re = std::hypot(u - FacePattern::kRightEyeX, v - FacePattern::kEyeY);
        if (le <= FacePattern::kEyeRadius || re <= FacePattern::kEyeRadius) {
          value = 0.10 + 0.5 * face_texture(u, v);
        } else if (v >= 0.48 && v <= FacePattern::kNoseTipY + 0.02 && std::abs(u - 0.5) <= 0.5 * (v - 0.48)) {
          value = 0.45 + face_texture(u, v);
        } else if (std::abs(u - 0.5) <= FacePattern::kMouthHalfW &&
                   std::abs(v - FacePattern::kMouthY) <= FacePattern::kMouthHalfH) {
          value = 0.10 + 0.5 * face_texture(u, v);
        }
        frame.at(x, y) = static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
  }

  // Occluders are deliberately near-flat: points tracked onto them fail the
  // texture gate instead of confidently tracking the occluder.
  void draw_occluder(GrayImage& frame, const BoundingBox& rect) const {
    const int x0 = std::max(0, static_cast<int>(std::floor(rect.x)));
    const int y0 = std::max(0, static_cast<int>(std::floor(rect.y)));
    const int x1 = std::min(frame.width, static_cast<int>(std::ceil(rect.right())));
    const int y1 = std::min(frame.height, static_cast<int>(std::ceil(rect.bottom())));
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) frame.at(x, y) = 0.5f;
    }
  }

  SyntheticSceneSpec spec_;
};

class SyntheticFrameSource final : public FrameSource {
 public:
  explicit SyntheticFrameSource(const SyntheticVideo& video) : video_(video) {}

  std::optional<GrayImage> next() override {
    if (index_ >= video_.num_frames()) return std::nullopt;
    return video_.render(index_++);
  }

 private:
  const SyntheticVideo& video_;
  int index_ = 0;
};

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

inline std::vector<FramePose> static_trajectory(Point2 center, double scale, int n) {
  return std::vector<FramePose>(static_cast<std::size_t>(n), FramePose{center, scale});
}

inline std::vector<FramePose> linear_trajectory(Point2 start, Point2 velocity, double scale, int n) {
  std::vector<FramePose> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    out.push_back({{start.x + velocity.x * t, start.y + velocity.y * t}, scale});
  }
  return out;
}

// Seeded bounded random walk with a slow scale oscillation; per-frame center
// displacement never exceeds max_step.
inline std::vector<FramePose> random_walk_trajectory(std::uint64_t seed, Point2 start, double max_step,
                                                     double base_scale, double scale_amplitude, int n,
                                                     const BoundingBox& bounds) {
  std::vector<FramePose> out;
  out.reserve(static_cast<std::size_t>(n));
  Point2 pos = start;
  Point2 drift{0.0, 0.0};
  for (int t = 0; t < n; ++t) {
    const double scale = base_scale * (1.0 + scale_amplitude * std::sin(2.0 * 3.14159265358979 * t / 97.0));
    out.push_back({pos, scale});
    // Smooth heading changes: blend the previous drift with fresh noise.
    const double nx = 2.0 * value_noise(seed + 21, t * 7.0, 0.0, 13.0) - 1.0;
    const double ny = 2.0 * value_noise(seed + 22, t * 7.0, 0.0, 13.0) - 1.0;
    drift.x = 0.8 * drift.x + 0.6 * nx;
    drift.y = 0.8 * drift.y + 0.6 * ny;
    const double len = norm(drift);
    const Point2 step = len > 1.0 ? drift * (max_step / len) : drift * max_step;
    pos.x = std::clamp(pos.x + step.x, bounds.x, bounds.right());
    pos.y = std::clamp(pos.y + step.y, bounds.y, bounds.bottom());
  }
  return out;
}

// Occluder rectangle covering the face (with margin) over a frame range.
inline OcclusionEvent make_full_occlusion(const SyntheticVideo& video, int first_frame, int last_frame,
                                          double margin_factor = 1.4) {
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (int t = first_frame; t <= last_frame; ++t) {
    const BoundingBox b = video.gt_box(t).scaled_about_center(margin_factor);
    x0 = std::min(x0, b.x);
    y0 = std::min(y0, b.y);
    x1 = std::max(x1, b.right());
    y1 = std::max(y1, b.bottom());
  }
  return {first_frame, last_frame, {x0, y0, x1 - x0, y1 - y0}};
}

// ---------------------------------------------------------------------------
// Fixture cascade matched to the synthetic face pattern. Thresholds were
// chosen from measured score distributions on pattern windows vs background
// windows (see the detector tests for the margins).
// ---------------------------------------------------------------------------

inline CascadeModel make_fixture_cascade() {
  CascadeModel model;
  model.base_window = 24;

  // Eye band darker than the forehead above and the cheeks below.
  HaarFeature eye_band;
  eye_band.rects = {{4, 8, 16, 4, 1.0}, {4, 4, 16, 4, -0.5}, {4, 12, 16, 4, -0.5}};
  // Mouth bar darker than the bands above and below it.
  HaarFeature mouth_band;
  mouth_band.rects = {{6, 17, 12, 3, 1.0}, {6, 14, 12, 3, -0.5}, {6, 20, 12, 3, -0.5}};
  // Mouth bar darker than the cheeks beside it; rejects full-width dark
  // streaks that fool mouth_band.
  HaarFeature mouth_flank;
  mouth_flank.rects = {{8, 17, 8, 3, 1.0}, {2, 17, 6, 3, -2.0 / 3.0}, {16, 17, 6, 3, -2.0 / 3.0}};
  // Ellipse interior brighter than the window as a whole; sub-face windows
  // (no background in the corners) fail this one.
  HaarFeature interior;
  interior.rects = {{5, 5, 14, 14, 1.0}, {0, 0, 24, 24, -196.0 / 576.0}};
  // Eyes darker than the bridge between them.
  HaarFeature eye_contrast;
  eye_contrast.rects = {{4, 8, 6, 4, 1.0}, {14, 8, 6, 4, 1.0}, {10, 8, 4, 4, -3.0}};

  CascadeStage stage0;
  stage0.weak.push_back({eye_band, -0.055, 1.0, -1.0});
  stage0.threshold = 0.5;

  CascadeStage stage1;
  stage1.weak.push_back({mouth_band, -0.025, 1.0, -1.0});
  stage1.weak.push_back({mouth_flank, -0.025, 1.0, -1.0});
  stage1.threshold = 1.5;

  CascadeStage stage2;
  stage2.weak.push_back({interior, 0.040, -1.0, 1.0});  // bright interior: score above split
  stage2.weak.push_back({eye_contrast, -0.060, 1.0, -1.0});
  stage2.threshold = 1.5;

  model.stages = {stage0, stage1, stage2};
  validate_cascade_model(model);
  return model;
}

}  // namespace dtd
