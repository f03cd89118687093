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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dtd {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoOverlapError final : public Error { public: using Error::Error; };
class ImageTooSmallError final : public Error { public: using Error::Error; };
class DimensionMismatchError final : public Error { public: using Error::Error; };
class EmptyPointListError final : public Error { public: using Error::Error; };
class NoValidPointsError final : public Error { public: using Error::Error; };
class InsufficientSupportError final : public Error { public: using Error::Error; };
class DegenerateBoxError final : public Error { public: using Error::Error; };
class EmptyImageError final : public Error { public: using Error::Error; };
class OutOfBoundsError final : public Error { public: using Error::Error; };
class RegionOutsideFrameError final : public Error { public: using Error::Error; };
class ShapeMismatchError final : public Error { public: using Error::Error; };
class DegenerateRegionError final : public Error { public: using Error::Error; };
class EmptyDatasetError final : public Error { public: using Error::Error; };
class EmptySequenceError final : public Error { public: using Error::Error; };
class ContractError final : public Error { public: using Error::Error; };
class InvalidSpecError final : public Error { public: using Error::Error; };
class InvalidModelError final : public Error { public: using Error::Error; };
class UnreadableFileError final : public Error { public: using Error::Error; };
class MixedDimensionsError final : public Error { public: using Error::Error; };
class IoError final : public Error { public: using Error::Error; };

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(Point2 a, double s) { return {a.x * s, a.y * s}; }

inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

// Axis-aligned box in frame coordinates. Kept in floating point: the tracker
// produces sub-pixel motion and rounding only happens at patch extraction.
struct BoundingBox {
  double x = 0.0;  // left
  double y = 0.0;  // top
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  Point2 center() const { return {x + 0.5 * w, y + 0.5 * h}; }
  double area() const { return w * h; }
  double short_side() const { return std::min(w, h); }
  bool valid() const { return w > 0.0 && h > 0.0 && std::isfinite(x) && std::isfinite(y) && std::isfinite(w) && std::isfinite(h); }

  bool contains(Point2 p) const {
    return p.x >= x && p.x <= right() && p.y >= y && p.y <= bottom();
  }

  BoundingBox scaled_about_center(double factor) const {
    const Point2 c = center();
    return {c.x - 0.5 * w * factor, c.y - 0.5 * h * factor, w * factor, h * factor};
  }
};

// The five facial landmarks, in this fixed semantic order.
enum Landmark : int {
  kLeftEye = 0,
  kRightEye = 1,
  kNose = 2,
  kLeftMouth = 3,
  kRightMouth = 4,
};

inline constexpr int kNumLandmarks = 5;

inline const char* landmark_name(int i) {
  static const char* kNames[kNumLandmarks] = {"left_eye", "right_eye", "nose", "left_mouth", "right_mouth"};
  return kNames[i];
}

struct LandmarkSet {
  std::array<Point2, kNumLandmarks> points{};

  Point2& operator[](int i) { return points[static_cast<std::size_t>(i)]; }
  const Point2& operator[](int i) const { return points[static_cast<std::size_t>(i)]; }
};

// ---------------------------------------------------------------------------
// GrayImage — single-channel raster, intensities nominally in [0,1] after load.
// ---------------------------------------------------------------------------

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // row-major, size == width * height

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    if (w <= 0 || h <= 0) throw EmptyImageError("GrayImage: non-positive dimensions");
  }

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

  bool same_size(const GrayImage& other) const {
    return width == other.width && height == other.height;
  }

  // Bilinear read; callers must keep (x, y) inside [0, width-1] x [0, height-1]
  // (see in_bilinear_domain). The index clamp below only handles the exact
  // right/bottom edge, where floor(x) would index one past the last cell.
  double sample_bilinear(double x, double y) const {
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    if (x0 > width - 2) x0 = width - 2;
    if (y0 > height - 2) y0 = height - 2;
    if (x0 < 0) x0 = 0;
    if (y0 < 0) y0 = 0;
    const double fx = x - x0;
    const double fy = y - y0;
    const double i00 = at(x0, y0);
    const double i10 = at(x0 + 1, y0);
    const double i01 = at(x0, y0 + 1);
    const double i11 = at(x0 + 1, y0 + 1);
    return (1.0 - fy) * ((1.0 - fx) * i00 + fx * i10) + fy * ((1.0 - fx) * i01 + fx * i11);
  }

  bool in_bilinear_domain(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width - 1.0 && y <= height - 1.0;
  }

  BoundingBox frame_rect() const { return {0.0, 0.0, static_cast<double>(width), static_cast<double>(height)}; }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Intersection-over-union; 0 for disjoint boxes. Areas are computed from the
// same edge differences as the intersection so that identical boxes give
// exactly 1 despite rounding in x + w.
inline double bbox_iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double area_a = (a.right() - a.x) * (a.bottom() - a.y);
  const double area_b = (b.right() - b.x) * (b.bottom() - b.y);
  return inter / (area_a + area_b - inter);
}

// Box-relative [0,1]^2 coordinates of each landmark.
inline std::array<Point2, kNumLandmarks> landmarks_to_normalized(const LandmarkSet& lm, const BoundingBox& box) {
  std::array<Point2, kNumLandmarks> out{};
  for (int i = 0; i < kNumLandmarks; ++i) {
    out[static_cast<std::size_t>(i)] = {(lm[i].x - box.x) / box.w, (lm[i].y - box.y) / box.h};
  }
  return out;
}

inline LandmarkSet normalized_to_landmarks(const std::array<Point2, kNumLandmarks>& norm, const BoundingBox& box) {
  LandmarkSet out;
  for (int i = 0; i < kNumLandmarks; ++i) {
    out[i] = {box.x + norm[static_cast<std::size_t>(i)].x * box.w, box.y + norm[static_cast<std::size_t>(i)].y * box.h};
  }
  return out;
}

// Intersection of box with the frame rectangle. Throws NoOverlapError when the
// intersection is empty or degenerate.
inline BoundingBox clamp_bbox(const BoundingBox& box, double frame_w, double frame_h) {
  const double x0 = std::max(box.x, 0.0);
  const double y0 = std::max(box.y, 0.0);
  const double x1 = std::min(box.right(), frame_w);
  const double y1 = std::min(box.bottom(), frame_h);
  if (x1 - x0 <= 0.0 || y1 - y0 <= 0.0) {
    throw NoOverlapError("clamp_bbox: box does not intersect frame");
  }
  return {x0, y0, x1 - x0, y1 - y0};
}

// A pull-based sequence of frames: video directories and synthetic scenes both
// implement this, so the pipeline never needs a whole sequence in memory.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<GrayImage> next() = 0;
};

// Median with the even-count convention used throughout (mean of the two
// middle values). Precondition: non-empty.
inline double median_of(std::vector<double> values) {
  const std::size_t n = values.size();
  if (n == 0) throw ContractError("median_of: empty input");
  const std::size_t mid = n / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double upper = values[mid];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace dtd
