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
#include <cmath>
#include <cstddef>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtd/core.hpp"

namespace dtd {

// ---------------------------------------------------------------------------
// Integral image
// ---------------------------------------------------------------------------

// Summed-area table with a zero first row/column; ii(x, y) is the sum of all
// pixels strictly above and left of (x, y). Accumulators are double so that
// rectangle sums on [0,1] images stay exact to well below 1e-9 up to 4096².
struct IntegralImage {
  int width = 0;   // of the source image
  int height = 0;
  std::vector<double> table;  // (width+1) x (height+1), row-major

  double ii(int x, int y) const { return table[static_cast<std::size_t>(y) * (width + 1) + x]; }
  double& ii(int x, int y) { return table[static_cast<std::size_t>(y) * (width + 1) + x]; }
};

namespace detail {

template <typename PixelFn>
IntegralImage build_integral(const GrayImage& img, PixelFn&& pixel) {
  if (img.width <= 0 || img.height <= 0 || img.data.empty()) {
    throw EmptyImageError("integral_image: empty input");
  }
  IntegralImage out;
  out.width = img.width;
  out.height = img.height;
  out.table.assign(static_cast<std::size_t>(img.width + 1) * (img.height + 1), 0.0);
  for (int y = 0; y < img.height; ++y) {
    double row = 0.0;
    for (int x = 0; x < img.width; ++x) {
      row += pixel(img.at(x, y));
      out.ii(x + 1, y + 1) = out.ii(x + 1, y) + row;
    }
  }
  return out;
}

}  // namespace detail

inline IntegralImage integral_image(const GrayImage& img) {
  return detail::build_integral(img, [](float v) { return static_cast<double>(v); });
}

inline IntegralImage integral_image_squared(const GrayImage& img) {
  return detail::build_integral(img, [](float v) { return static_cast<double>(v) * static_cast<double>(v); });
}

inline double rect_sum(const IntegralImage& ii, int x, int y, int w, int h) {
  if (w <= 0 || h <= 0 || x < 0 || y < 0 || x + w > ii.width || y + h > ii.height) {
    throw OutOfBoundsError("rect_sum: rectangle outside image");
  }
  return ii.ii(x + w, y + h) - ii.ii(x, y + h) - ii.ii(x + w, y) + ii.ii(x, y);
}

// ---------------------------------------------------------------------------
// Cascade model
// ---------------------------------------------------------------------------

struct HaarRect {
  int x = 0, y = 0, w = 0, h = 0;  // base-window units
  double weight = 0.0;
};

// 2- or 3-rectangle feature; weighted areas sum to zero so constant windows
// score exactly 0.
struct HaarFeature {
  std::vector<HaarRect> rects;
};

struct WeakClassifier {
  HaarFeature feature;
  double split = 0.0;       // threshold on the variance-normalized feature score
  double left_value = 0.0;  // vote when score < split
  double right_value = 0.0;
};

struct CascadeStage {
  double threshold = 0.0;
  std::vector<WeakClassifier> weak;
};

struct CascadeModel {
  int base_window = 24;
  std::vector<CascadeStage> stages;
};

struct DetectParams {
  int min_size = 24;
  double scale_factor = 1.1;
  double step_fraction = 0.05;  // of the window size, min 1 px
  int group_min_neighbors = 3;
  double group_iou = 0.3;
  std::optional<BoundingBox> region;  // restricts the scan when set
};

inline constexpr double kValidationIou = 0.5;
inline constexpr double kLocalRegionExpansion = 2.0;

struct WindowEval {
  bool pass = false;
  int rejected_stage = -1;  // first failing stage, -1 on pass
};

namespace detail {

struct ScaledRect {
  int x, y, w, h;
  double weight;
};

// Scale feature rects from base-window units to the concrete window, then
// re-balance the first rect's weight so the weighted areas still sum to zero
// after integer rounding.
inline bool scale_feature(const HaarFeature& f, int wx, int wy, int wsize, int base,
                          std::vector<ScaledRect>& out) {
  const double s = static_cast<double>(wsize) / base;
  out.clear();
  for (const HaarRect& r : f.rects) {
    ScaledRect sr;
    sr.x = wx + static_cast<int>(std::lround(r.x * s));
    sr.y = wy + static_cast<int>(std::lround(r.y * s));
    sr.w = static_cast<int>(std::lround(r.w * s));
    sr.h = static_cast<int>(std::lround(r.h * s));
    sr.weight = r.weight;
    if (sr.w <= 0 || sr.h <= 0) return false;
    out.push_back(sr);
  }
  double rest = 0.0;
  for (std::size_t i = 1; i < out.size(); ++i) rest += out[i].weight * out[i].w * out[i].h;
  out[0].weight = -rest / (static_cast<double>(out[0].w) * out[0].h);
  return true;
}

}  // namespace detail

// Evaluate one square window against the full cascade. Feature scores are
// normalized by the window's intensity standard deviation (computed from the
// plain and squared integral images) and by the window pixel count.
inline WindowEval eval_window(const IntegralImage& ii, const IntegralImage& ii_sq,
                              const CascadeModel& model, int wx, int wy, int wsize) {
  if (wx < 0 || wy < 0 || wsize <= 0 || wx + wsize > ii.width || wy + wsize > ii.height) {
    throw OutOfBoundsError("eval_window: window outside image");
  }
  const double n = static_cast<double>(wsize) * wsize;
  const double mean = rect_sum(ii, wx, wy, wsize, wsize) / n;
  const double mean_sq = rect_sum(ii_sq, wx, wy, wsize, wsize) / n;
  const double var = mean_sq - mean * mean;
  const double sigma = var > 0.0 ? std::sqrt(var) : 1.0;
  const double norm = 1.0 / (sigma * n);

  std::vector<detail::ScaledRect> scaled;
  for (std::size_t k = 0; k < model.stages.size(); ++k) {
    const CascadeStage& stage = model.stages[k];
    double sum = 0.0;
    for (const WeakClassifier& weak : stage.weak) {
      double score = 0.0;
      if (detail::scale_feature(weak.feature, wx, wy, wsize, model.base_window, scaled)) {
        double raw = 0.0;
        for (const detail::ScaledRect& r : scaled) raw += r.weight * rect_sum(ii, r.x, r.y, r.w, r.h);
        score = raw * norm;
      }
      sum += score < weak.split ? weak.left_value : weak.right_value;
    }
    if (sum < stage.threshold) return {false, static_cast<int>(k)};
  }
  return {true, -1};
}

inline WindowEval eval_window(const IntegralImage& ii, const IntegralImage& ii_sq,
                              const CascadeModel& model, const BoundingBox& window) {
  return eval_window(ii, ii_sq, model,
                     static_cast<int>(std::lround(window.x)), static_cast<int>(std::lround(window.y)),
                     static_cast<int>(std::lround(window.w)));
}

struct DetectStats {
  std::size_t windows_evaluated = 0;
  std::size_t raw_detections = 0;
  std::vector<int> group_neighbors;  // per returned box, same order
};

namespace detail {

struct IntRect {
  int x0, y0, x1, y1;  // half-open
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};

inline IntRect rasterize_scan_region(const std::optional<BoundingBox>& region, int img_w, int img_h) {
  IntRect r{0, 0, img_w, img_h};
  if (region) {
    r.x0 = std::max(0, static_cast<int>(std::ceil(region->x)));
    r.y0 = std::max(0, static_cast<int>(std::ceil(region->y)));
    r.x1 = std::min(img_w, static_cast<int>(std::floor(region->right())));
    r.y1 = std::min(img_h, static_cast<int>(std::floor(region->bottom())));
    if (r.width() <= 0 || r.height() <= 0) {
      throw RegionOutsideFrameError("detect_faces: scan region outside frame");
    }
  }
  return r;
}

inline GrayImage crop(const GrayImage& img, const IntRect& r) {
  GrayImage out(r.width(), r.height());
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) out.at(x, y) = img.at(r.x0 + x, r.y0 + y);
  }
  return out;
}

}  // namespace detail

// Multi-scale sliding-window scan. When params.region is set the scan (and the
// integral images it builds) covers only that region, so cost scales with the
// region area — the mechanism behind local detection being cheap.
inline std::vector<BoundingBox> detect_faces(const GrayImage& img, const CascadeModel& model,
                                             const DetectParams& params, DetectStats* stats = nullptr) {
  const detail::IntRect scan = detail::rasterize_scan_region(params.region, img.width, img.height);
  GrayImage crop_storage;
  const GrayImage* subp = &img;
  if (params.region.has_value()) {
    crop_storage = detail::crop(img, scan);
    subp = &crop_storage;
  }
  const GrayImage& sub = *subp;
  const IntegralImage ii = integral_image(sub);
  const IntegralImage ii_sq = integral_image_squared(sub);

  std::vector<BoundingBox> raw;
  std::size_t windows = 0;
  const int short_side = std::min(scan.width(), scan.height());
  int last_size = 0;
  for (double s = params.min_size; static_cast<int>(std::lround(s)) <= short_side; s *= params.scale_factor) {
    const int size = static_cast<int>(std::lround(s));
    if (size == last_size) continue;
    last_size = size;
    const int step = std::max(1, static_cast<int>(std::lround(params.step_fraction * size)));
    for (int y = 0; y + size <= sub.height; y += step) {
      for (int x = 0; x + size <= sub.width; x += step) {
        ++windows;
        if (eval_window(ii, ii_sq, model, x, y, size).pass) {
          raw.push_back({static_cast<double>(scan.x0 + x), static_cast<double>(scan.y0 + y),
                         static_cast<double>(size), static_cast<double>(size)});
        }
      }
    }
  }
  if (stats) {
    stats->windows_evaluated = windows;
    stats->raw_detections = raw.size();
    stats->group_neighbors.clear();
  }

  // Group raw hits: connected components under IoU >= group_iou.
  const std::size_t n = raw.size();
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (bbox_iou(raw[i], raw[j]) >= params.group_iou) parent[find(i)] = find(j);
    }
  }
  struct Group {
    BoundingBox mean{};
    int count = 0;
  };
  std::vector<std::size_t> roots;
  std::vector<Group> groups;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = find(i);
    std::size_t gi;
    auto it = std::find(roots.begin(), roots.end(), root);
    if (it == roots.end()) {
      roots.push_back(root);
      groups.push_back({});
      gi = groups.size() - 1;
    } else {
      gi = static_cast<std::size_t>(it - roots.begin());
    }
    groups[gi].mean.x += raw[i].x;
    groups[gi].mean.y += raw[i].y;
    groups[gi].mean.w += raw[i].w;
    groups[gi].mean.h += raw[i].h;
    groups[gi].count += 1;
  }
  std::vector<Group> kept;
  for (Group& g : groups) {
    if (g.count < params.group_min_neighbors) continue;
    g.mean.x /= g.count;
    g.mean.y /= g.count;
    g.mean.w /= g.count;
    g.mean.h /= g.count;
    kept.push_back(g);
  }
  std::sort(kept.begin(), kept.end(), [](const Group& a, const Group& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.mean.x != b.mean.x) return a.mean.x < b.mean.x;
    if (a.mean.y != b.mean.y) return a.mean.y < b.mean.y;
    return a.mean.w < b.mean.w;
  });
  std::vector<BoundingBox> out;
  out.reserve(kept.size());
  for (const Group& g : kept) {
    out.push_back(g.mean);
    if (stats) stats->group_neighbors.push_back(g.count);
  }
  return out;
}

// Full-frame scan; the top-ranked grouped detection, if any.
inline std::optional<BoundingBox> detect_global(const GrayImage& img, const CascadeModel& model,
                                                DetectParams params, DetectStats* stats = nullptr) {
  params.region.reset();
  std::vector<BoundingBox> found = detect_faces(img, model, params, stats);
  if (found.empty()) return std::nullopt;
  return found.front();
}

// Local detection: scan a 2x-expanded region around the estimated box and
// accept when some detection overlaps it with IoU >= 0.5. On success the
// estimated box is returned unchanged — the detector only confirms it, to
// avoid re-introducing detector jitter into the landmark network's input.
inline std::optional<BoundingBox> validate_local(const GrayImage& img, const CascadeModel& model,
                                                 DetectParams params, const BoundingBox& est_box,
                                                 DetectStats* stats = nullptr) {
  BoundingBox region = est_box.scaled_about_center(kLocalRegionExpansion);
  try {
    region = clamp_bbox(region, img.width, img.height);
  } catch (const NoOverlapError&) {
    return std::nullopt;
  }
  params.region = region;
  std::vector<BoundingBox> found;
  try {
    found = detect_faces(img, model, params, stats);
  } catch (const RegionOutsideFrameError&) {
    return std::nullopt;
  }
  for (const BoundingBox& b : found) {
    if (bbox_iou(b, est_box) >= kValidationIou) return est_box;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Model file I/O
// Schema: {base_window, stages:[{threshold, weak:[{rects:[{x,y,w,h,weight}],
//          split, left, right}]}]}
// ---------------------------------------------------------------------------

inline void validate_cascade_model(const CascadeModel& model) {
  if (model.base_window < 2) throw InvalidModelError("cascade model: base_window < 2");
  if (model.stages.empty()) throw InvalidModelError("cascade model: no stages");
  for (const CascadeStage& stage : model.stages) {
    if (stage.weak.empty()) throw InvalidModelError("cascade model: stage with no weak classifiers");
    for (const WeakClassifier& weak : stage.weak) {
      const auto& rects = weak.feature.rects;
      if (rects.size() < 2 || rects.size() > 3) {
        throw InvalidModelError("cascade model: feature must have 2 or 3 rects");
      }
      double area_sum = 0.0;
      for (const HaarRect& r : rects) {
        if (r.w <= 0 || r.h <= 0 || r.x < 0 || r.y < 0 ||
            r.x + r.w > model.base_window || r.y + r.h > model.base_window) {
          throw InvalidModelError("cascade model: rect outside base window");
        }
        area_sum += r.weight * r.w * r.h;
      }
      if (std::abs(area_sum) > 1e-9) {
        throw InvalidModelError("cascade model: feature weights do not sum to zero over area");
      }
    }
  }
}

inline nlohmann::json cascade_model_to_json(const CascadeModel& model) {
  nlohmann::json j;
  j["base_window"] = model.base_window;
  j["stages"] = nlohmann::json::array();
  for (const CascadeStage& stage : model.stages) {
    nlohmann::json js;
    js["threshold"] = stage.threshold;
    js["weak"] = nlohmann::json::array();
    for (const WeakClassifier& weak : stage.weak) {
      nlohmann::json jw;
      jw["rects"] = nlohmann::json::array();
      for (const HaarRect& r : weak.feature.rects) {
        jw["rects"].push_back({{"x", r.x}, {"y", r.y}, {"w", r.w}, {"h", r.h}, {"weight", r.weight}});
      }
      jw["split"] = weak.split;
      jw["left"] = weak.left_value;
      jw["right"] = weak.right_value;
      js["weak"].push_back(jw);
    }
    j["stages"].push_back(js);
  }
  return j;
}

inline CascadeModel cascade_model_from_json(const nlohmann::json& j) {
  CascadeModel model;
  try {
    model.base_window = j.at("base_window").get<int>();
    for (const auto& js : j.at("stages")) {
      CascadeStage stage;
      stage.threshold = js.at("threshold").get<double>();
      for (const auto& jw : js.at("weak")) {
        WeakClassifier weak;
        for (const auto& jr : jw.at("rects")) {
          weak.feature.rects.push_back({jr.at("x").get<int>(), jr.at("y").get<int>(),
                                        jr.at("w").get<int>(), jr.at("h").get<int>(),
                                        jr.at("weight").get<double>()});
        }
        weak.split = jw.at("split").get<double>();
        weak.left_value = jw.at("left").get<double>();
        weak.right_value = jw.at("right").get<double>();
        stage.weak.push_back(std::move(weak));
      }
      model.stages.push_back(std::move(stage));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidModelError(std::string("cascade model: malformed json: ") + e.what());
  }
  validate_cascade_model(model);
  return model;
}

inline void save_cascade_model(const CascadeModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << cascade_model_to_json(model).dump(2) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

inline CascadeModel load_cascade_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UnreadableFileError("cannot open cascade model: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidModelError(std::string("cascade model: parse error in ") + path + ": " + e.what());
  }
  return cascade_model_from_json(j);
}

}  // namespace dtd
