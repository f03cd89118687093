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
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtd/core.hpp"
#include "dtd/nn.hpp"

namespace dtd {

// ---------------------------------------------------------------------------
// Patch extraction
// ---------------------------------------------------------------------------

// Bilinear resample of an arbitrary region to (out_h, out_w); reads outside
// the frame are 0. At native size and integer coordinates this reproduces the
// source pixels exactly.
inline nn::Tensor resample_region(const GrayImage& img, const BoundingBox& region, int out_h, int out_w) {
  if (region.w <= 0.0 || region.h <= 0.0 || out_h <= 0 || out_w <= 0) {
    throw DegenerateRegionError("resample_region: degenerate region");
  }
  nn::Tensor out(1, out_h, out_w);
  const double sx = region.w / out_w;
  const double sy = region.h / out_h;
  for (int i = 0; i < out_h; ++i) {
    const double src_y = region.y + (i + 0.5) * sy - 0.5;
    for (int j = 0; j < out_w; ++j) {
      const double src_x = region.x + (j + 0.5) * sx - 0.5;
      out.at(0, i, j) = img.in_bilinear_domain(src_x, src_y) ? img.sample_bilinear(src_x, src_y) : 0.0;
    }
  }
  return out;
}

// Zero-mean, unit-variance in place; patches with no contrast become all
// zeros (sigma floor 1e-8).
inline void normalize_patch(nn::Tensor& patch) {
  const double n = static_cast<double>(patch.data.size());
  double mean = 0.0;
  for (double v : patch.data) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : patch.data) var += (v - mean) * (v - mean);
  var /= n;
  const double sigma = std::sqrt(var);
  if (sigma < 1e-8) {
    std::fill(patch.data.begin(), patch.data.end(), 0.0);
    return;
  }
  const double inv = 1.0 / sigma;
  for (double& v : patch.data) v = (v - mean) * inv;
}

inline nn::Tensor extract_patch(const GrayImage& img, const BoundingBox& region, int out_h, int out_w) {
  nn::Tensor patch = resample_region(img, region, out_h, out_w);
  normalize_patch(patch);
  return patch;
}

// ---------------------------------------------------------------------------
// Cascade structure — 3 level-1 networks plus 2 networks per landmark at each
// of levels 2 and 3: 23 networks total.
// ---------------------------------------------------------------------------

struct CascadeSpec {
  nn::NetworkSpec f1;   // whole face, predicts all 5 landmarks
  nn::NetworkSpec en1;  // top band, predicts eyes + nose
  nn::NetworkSpec nm1;  // bottom band, predicts nose + mouth corners
  double en1_band = 0.60;  // top fraction of the face box fed to EN1
  double nm1_band = 0.60;  // bottom fraction fed to NM1
  nn::NetworkSpec level2_proto;  // shared shape of all level-2 networks
  nn::NetworkSpec level3_proto;
  double level2_half_size = 0.16;  // local patch half-size, fraction of face short side
  double level3_half_size = 0.09;
};

// Landmarks covered by each level-1 network, in output order.
inline const std::vector<int>& f1_landmarks() {
  static const std::vector<int> v{kLeftEye, kRightEye, kNose, kLeftMouth, kRightMouth};
  return v;
}
inline const std::vector<int>& en1_landmarks() {
  static const std::vector<int> v{kLeftEye, kRightEye, kNose};
  return v;
}
inline const std::vector<int>& nm1_landmarks() {
  static const std::vector<int> v{kNose, kLeftMouth, kRightMouth};
  return v;
}

// Table-1 names: level-2 networks carry suffix 1 (LE1...), level-3 suffix 2.
inline std::string refine_net_name(int level, int landmark) {
  static const char* kBase[kNumLandmarks] = {"LE", "RE", "N", "LM", "RM"};
  return std::string(kBase[landmark]) + (level == 2 ? "1" : "2");
}

// Each landmark is refined by a pair of networks; instances are ":a" / ":b".
inline std::string refine_instance_id(int level, int landmark, int instance) {
  return refine_net_name(level, landmark) + (instance == 0 ? ":a" : ":b");
}

inline std::vector<std::string> cascade_instance_ids() {
  std::vector<std::string> ids{"F1", "EN1", "NM1"};
  for (int level = 2; level <= 3; ++level) {
    for (int lm = 0; lm < kNumLandmarks; ++lm) {
      for (int inst = 0; inst < 2; ++inst) ids.push_back(refine_instance_id(level, lm, inst));
    }
  }
  return ids;
}

using CascadeWeights = std::map<std::string, nn::NetworkWeights>;

inline const nn::NetworkSpec& instance_spec(const CascadeSpec& spec, const std::string& id) {
  if (id == "F1") return spec.f1;
  if (id == "EN1") return spec.en1;
  if (id == "NM1") return spec.nm1;
  // Refinement nets: Table-1 names ending in '1' are level 2, '2' are level 3.
  const char level_digit = id[id.find(':') - 1];
  return level_digit == '1' ? spec.level2_proto : spec.level3_proto;
}

inline int count_layers(const nn::NetworkSpec& spec, int kind) {  // 0=conv,1=pool,2=fc
  int n = 0;
  for (const auto& l : spec.layers) {
    if (kind == 0 && std::holds_alternative<nn::ConvSpec>(l)) ++n;
    if (kind == 1 && std::holds_alternative<nn::PoolSpec>(l)) ++n;
    if (kind == 2 && std::holds_alternative<nn::FcSpec>(l)) ++n;
  }
  return n;
}

// Structural checks: output dims per Table 1 and the stated layer counts
// (level 1: 4 conv / 3 pool / 2 fc; levels 2-3: 3 conv / 2 pool / 1 fc).
inline void validate_cascade_spec(const CascadeSpec& spec) {
  auto check = [](const nn::NetworkSpec& net, int out_dim, int convs, int pools, int fcs) {
    nn::derive_shapes(net);
    if (net.output_dim != out_dim) {
      throw InvalidSpecError(net.name + ": expected output_dim " + std::to_string(out_dim));
    }
    if (count_layers(net, 0) != convs || count_layers(net, 1) != pools || count_layers(net, 2) != fcs) {
      throw InvalidSpecError(net.name + ": layer counts do not match its cascade level");
    }
  };
  check(spec.f1, 2 * kNumLandmarks, 4, 3, 2);
  check(spec.en1, 6, 4, 3, 2);
  check(spec.nm1, 6, 4, 3, 2);
  check(spec.level2_proto, 2, 3, 2, 1);
  check(spec.level3_proto, 2, 3, 2, 1);
  if (spec.en1_band <= 0.0 || spec.en1_band > 1.0 || spec.nm1_band <= 0.0 || spec.nm1_band > 1.0 ||
      spec.level2_half_size <= 0.0 || spec.level3_half_size <= 0.0) {
    throw InvalidSpecError("cascade spec: band/half-size fractions out of range");
  }
}

inline CascadeWeights init_cascade_weights(const CascadeSpec& spec, std::uint64_t seed) {
  CascadeWeights weights;
  std::uint64_t salt = 0;
  for (const std::string& id : cascade_instance_ids()) {
    weights[id] = nn::init_weights(instance_spec(spec, id), seed + 0x9e3779b97f4a7c15ULL * ++salt);
  }
  return weights;
}

// ---------------------------------------------------------------------------
// Cascade inference
// ---------------------------------------------------------------------------

namespace detail {

inline Point2 patch_to_frame(const GrayImage& img, const BoundingBox& region, double nx, double ny) {
  Point2 p{region.x + nx * region.w, region.y + ny * region.h};
  p.x = std::clamp(p.x, 0.0, static_cast<double>(img.width - 1));
  p.y = std::clamp(p.y, 0.0, static_cast<double>(img.height - 1));
  return p;
}

inline std::vector<double> run_net(const CascadeSpec& spec, const CascadeWeights& weights,
                                   const std::string& id, const GrayImage& img, const BoundingBox& region) {
  const nn::NetworkSpec& net = instance_spec(spec, id);
  auto it = weights.find(id);
  if (it == weights.end()) throw ShapeMismatchError("cascade weights missing network " + id);
  return nn::net_forward(net, it->second, extract_patch(img, region, net.input_h, net.input_w)).data;
}

}  // namespace detail

// Coarse-to-fine prediction: level 1 averages the frame-mapped estimates of
// every network covering a landmark, levels 2 and 3 refine each landmark from
// a shrinking local patch centered on the current estimate (two networks per
// landmark, averaged).
inline LandmarkSet cascade_predict(const GrayImage& img, const BoundingBox& face_box,
                                   const CascadeSpec& spec, const CascadeWeights& weights) {
  const BoundingBox whole = face_box;
  const BoundingBox top{face_box.x, face_box.y, face_box.w, face_box.h * spec.en1_band};
  const BoundingBox bottom{face_box.x, face_box.y + face_box.h * (1.0 - spec.nm1_band),
                           face_box.w, face_box.h * spec.nm1_band};

  const std::vector<double> f1_out = detail::run_net(spec, weights, "F1", img, whole);
  const std::vector<double> en1_out = detail::run_net(spec, weights, "EN1", img, top);
  const std::vector<double> nm1_out = detail::run_net(spec, weights, "NM1", img, bottom);

  std::array<Point2, kNumLandmarks> sum{};
  std::array<int, kNumLandmarks> votes{};
  auto accumulate = [&](const std::vector<double>& out, const std::vector<int>& lms, const BoundingBox& region) {
    for (std::size_t k = 0; k < lms.size(); ++k) {
      const Point2 p = detail::patch_to_frame(img, region, out[2 * k], out[2 * k + 1]);
      sum[static_cast<std::size_t>(lms[k])] = sum[static_cast<std::size_t>(lms[k])] + p;
      votes[static_cast<std::size_t>(lms[k])] += 1;
    }
  };
  accumulate(f1_out, f1_landmarks(), whole);
  accumulate(en1_out, en1_landmarks(), top);
  accumulate(nm1_out, nm1_landmarks(), bottom);

  LandmarkSet estimate;
  for (int i = 0; i < kNumLandmarks; ++i) {
    estimate[i] = sum[static_cast<std::size_t>(i)] * (1.0 / votes[static_cast<std::size_t>(i)]);
  }

  for (int level = 2; level <= 3; ++level) {
    const double half = (level == 2 ? spec.level2_half_size : spec.level3_half_size) * face_box.short_side();
    for (int lm = 0; lm < kNumLandmarks; ++lm) {
      const BoundingBox region{estimate[lm].x - half, estimate[lm].y - half, 2.0 * half, 2.0 * half};
      Point2 acc{0.0, 0.0};
      for (int inst = 0; inst < 2; ++inst) {
        const std::vector<double> out =
            detail::run_net(spec, weights, refine_instance_id(level, lm, inst), img, region);
        acc = acc + detail::patch_to_frame(img, region, out[0], out[1]);
      }
      estimate[lm] = acc * 0.5;
    }
  }
  return estimate;
}

// ---------------------------------------------------------------------------
// Augmentation — the ±5° rotations, their mirrors, and the mirrored original.
// ---------------------------------------------------------------------------

struct TrainingSample {
  GrayImage image;
  BoundingBox box;
  LandmarkSet landmarks;
};

namespace detail {

inline TrainingSample rotate_sample(const TrainingSample& s, double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  const double ca = std::cos(rad);
  const double sa = std::sin(rad);
  const double cx = (s.image.width - 1) * 0.5;
  const double cy = (s.image.height - 1) * 0.5;

  TrainingSample out;
  out.image = GrayImage(s.image.width, s.image.height);
  // Inverse-map every output pixel back into the source.
  for (int y = 0; y < out.image.height; ++y) {
    for (int x = 0; x < out.image.width; ++x) {
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = ca * dx + sa * dy + cx;
      const double sy = -sa * dx + ca * dy + cy;
      out.image.at(x, y) =
          s.image.in_bilinear_domain(sx, sy) ? static_cast<float>(s.image.sample_bilinear(sx, sy)) : 0.0f;
    }
  }
  auto fwd = [&](Point2 p) -> Point2 {
    const double dx = p.x - cx;
    const double dy = p.y - cy;
    return {ca * dx - sa * dy + cx, sa * dx + ca * dy + cy};
  };
  for (int i = 0; i < kNumLandmarks; ++i) out.landmarks[i] = fwd(s.landmarks[i]);
  const Point2 corners[4] = {fwd({s.box.x, s.box.y}), fwd({s.box.right(), s.box.y}),
                             fwd({s.box.x, s.box.bottom()}), fwd({s.box.right(), s.box.bottom()})};
  double x0 = corners[0].x, x1 = corners[0].x, y0 = corners[0].y, y1 = corners[0].y;
  for (const Point2& c : corners) {
    x0 = std::min(x0, c.x);
    x1 = std::max(x1, c.x);
    y0 = std::min(y0, c.y);
    y1 = std::max(y1, c.y);
  }
  out.box = {x0, y0, x1 - x0, y1 - y0};
  return out;
}

inline TrainingSample mirror_sample(const TrainingSample& s) {
  TrainingSample out;
  out.image = GrayImage(s.image.width, s.image.height);
  for (int y = 0; y < out.image.height; ++y) {
    for (int x = 0; x < out.image.width; ++x) out.image.at(x, y) = s.image.at(s.image.width - 1 - x, y);
  }
  const double m = static_cast<double>(s.image.width - 1);
  auto flip = [&](Point2 p) -> Point2 { return {m - p.x, p.y}; };
  // Horizontal flip swaps the left/right eye and mouth-corner labels.
  out.landmarks[kLeftEye] = flip(s.landmarks[kRightEye]);
  out.landmarks[kRightEye] = flip(s.landmarks[kLeftEye]);
  out.landmarks[kNose] = flip(s.landmarks[kNose]);
  out.landmarks[kLeftMouth] = flip(s.landmarks[kRightMouth]);
  out.landmarks[kRightMouth] = flip(s.landmarks[kLeftMouth]);
  out.box = {m - s.box.right(), s.box.y, s.box.w, s.box.h};
  return out;
}

}  // namespace detail

// One input sample expands to 6: the original, the ±5° rotations, the mirror
// of each rotation, and the mirrored original.
inline std::vector<TrainingSample> augment(const GrayImage& img, const BoundingBox& box, const LandmarkSet& lm) {
  const TrainingSample original{img, box, lm};
  const TrainingSample rot_cw = detail::rotate_sample(original, 5.0);
  const TrainingSample rot_ccw = detail::rotate_sample(original, -5.0);
  std::vector<TrainingSample> out;
  out.reserve(6);
  out.push_back(original);
  out.push_back(rot_cw);
  out.push_back(rot_ccw);
  out.push_back(detail::mirror_sample(rot_cw));
  out.push_back(detail::mirror_sample(rot_ccw));
  out.push_back(detail::mirror_sample(original));
  return out;
}

// ---------------------------------------------------------------------------
// Weights file — text header (magic, per-network layer shapes), then one raw
// little-endian float32 blob in declaration order. Round-trips bit-exactly.
// ---------------------------------------------------------------------------

inline constexpr const char* kWeightsMagic = "DTDWEIGHTS 1";

inline void save_cascade_weights(const CascadeWeights& weights, const CascadeSpec& spec,
                                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  std::ostringstream header;
  header << kWeightsMagic << "\n";
  header << "nets " << weights.size() << "\n";
  std::vector<float> blob;
  for (const auto& [id, net_weights] : weights) {
    const nn::NetworkSpec& net = instance_spec(spec, id);
    if (net_weights.layers.size() != net.layers.size()) {
      throw ShapeMismatchError("save_cascade_weights: layer count mismatch for " + id);
    }
    header << "net " << id << " " << net.layers.size() << "\n";
    nn::LayerShape in{1, net.input_h, net.input_w};
    const std::vector<nn::LayerShape> shapes = nn::derive_shapes(net);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      const nn::LayerWeights& lw = net_weights.layers[i];
      if (const auto* conv = std::get_if<nn::ConvSpec>(&net.layers[i])) {
        header << "layer conv " << conv->out_channels << " " << in.c << " " << conv->kernel_h << " "
               << conv->kernel_w << " " << conv->stride << "\n";
      } else if (std::get_if<nn::ReluSpec>(&net.layers[i])) {
        header << "layer relu\n";
      } else if (const auto* pool = std::get_if<nn::PoolSpec>(&net.layers[i])) {
        header << "layer pool " << pool->size << " " << pool->stride << "\n";
      } else if (const auto* fc = std::get_if<nn::FcSpec>(&net.layers[i])) {
        header << "layer fc " << fc->out_units << " " << in.c * in.h * in.w << "\n";
      }
      for (double v : lw.w) blob.push_back(static_cast<float>(v));
      for (double v : lw.b) blob.push_back(static_cast<float>(v));
      in = shapes[i];
    }
  }
  header << "data\n";
  const std::string head = header.str();
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path);
}

inline CascadeWeights load_cascade_weights(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnreadableFileError("cannot open weights file: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kWeightsMagic) {
    throw UnreadableFileError("weights file: bad magic in " + path);
  }
  std::size_t num_nets = 0;
  {
    std::getline(in, line);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok >> num_nets) || tok != "nets") throw UnreadableFileError("weights file: missing nets count");
  }
  struct PendingLayer {
    std::size_t w_count = 0;
    std::size_t b_count = 0;
  };
  std::vector<std::pair<std::string, std::vector<PendingLayer>>> layout;
  std::size_t total_floats = 0;
  for (std::size_t n = 0; n < num_nets; ++n) {
    if (!std::getline(in, line)) throw UnreadableFileError("weights file: truncated header");
    std::istringstream ls(line);
    std::string tok, id;
    std::size_t layers = 0;
    if (!(ls >> tok >> id >> layers) || tok != "net") throw UnreadableFileError("weights file: bad net line");
    std::vector<PendingLayer> pls;
    for (std::size_t l = 0; l < layers; ++l) {
      if (!std::getline(in, line)) throw UnreadableFileError("weights file: truncated layer list");
      std::istringstream lls(line);
      std::string ltok, kind;
      lls >> ltok >> kind;
      if (ltok != "layer") throw UnreadableFileError("weights file: bad layer line");
      PendingLayer pl;
      if (kind == "conv") {
        std::size_t out_c, in_c, kh, kw, stride;
        if (!(lls >> out_c >> in_c >> kh >> kw >> stride)) throw UnreadableFileError("weights file: bad conv line");
        pl.w_count = out_c * in_c * kh * kw;
        pl.b_count = out_c;
      } else if (kind == "fc") {
        std::size_t out_u, in_u;
        if (!(lls >> out_u >> in_u)) throw UnreadableFileError("weights file: bad fc line");
        pl.w_count = out_u * in_u;
        pl.b_count = out_u;
      } else if (kind != "relu" && kind != "pool") {
        throw UnreadableFileError("weights file: unknown layer kind " + kind);
      }
      total_floats += pl.w_count + pl.b_count;
      pls.push_back(pl);
    }
    layout.emplace_back(id, std::move(pls));
  }
  if (!std::getline(in, line) || line != "data") throw UnreadableFileError("weights file: missing data marker");

  std::vector<float> blob(total_floats);
  in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(total_floats * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != total_floats * sizeof(float)) {
    throw UnreadableFileError("weights file: truncated data blob");
  }

  CascadeWeights weights;
  std::size_t pos = 0;
  for (const auto& [id, pls] : layout) {
    nn::NetworkWeights nw;
    for (const PendingLayer& pl : pls) {
      nn::LayerWeights lw;
      lw.w.reserve(pl.w_count);
      for (std::size_t i = 0; i < pl.w_count; ++i) lw.w.push_back(blob[pos++]);
      lw.b.reserve(pl.b_count);
      for (std::size_t i = 0; i < pl.b_count; ++i) lw.b.push_back(blob[pos++]);
      nw.layers.push_back(std::move(lw));
    }
    weights[id] = std::move(nw);
  }
  return weights;
}

// ---------------------------------------------------------------------------
// Architecture configuration
// ---------------------------------------------------------------------------

inline nlohmann::json layer_to_json(const nn::LayerSpec& layer) {
  if (const auto* conv = std::get_if<nn::ConvSpec>(&layer)) {
    return {{"type", "conv"}, {"out", conv->out_channels}, {"kh", conv->kernel_h},
            {"kw", conv->kernel_w}, {"stride", conv->stride}};
  }
  if (std::get_if<nn::ReluSpec>(&layer)) return {{"type", "relu"}};
  if (const auto* pool = std::get_if<nn::PoolSpec>(&layer)) {
    return {{"type", "pool"}, {"size", pool->size}, {"stride", pool->stride}};
  }
  const auto& fc = std::get<nn::FcSpec>(layer);
  return {{"type", "fc"}, {"out", fc.out_units}};
}

inline nn::LayerSpec layer_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "conv") {
    return nn::ConvSpec{j.at("out").get<int>(), j.at("kh").get<int>(), j.at("kw").get<int>(),
                        j.value("stride", 1)};
  }
  if (type == "relu") return nn::ReluSpec{};
  if (type == "pool") return nn::PoolSpec{j.at("size").get<int>(), j.at("stride").get<int>()};
  if (type == "fc") return nn::FcSpec{j.at("out").get<int>()};
  throw InvalidSpecError("net config: unknown layer type " + type);
}

inline nlohmann::json network_spec_to_json(const nn::NetworkSpec& net) {
  nlohmann::json j;
  j["input"] = {net.input_h, net.input_w};
  j["output_dim"] = net.output_dim;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers) j["layers"].push_back(layer_to_json(l));
  return j;
}

inline nn::NetworkSpec network_spec_from_json(const nlohmann::json& j, const std::string& name) {
  nn::NetworkSpec net;
  net.name = name;
  net.input_h = j.at("input").at(0).get<int>();
  net.input_w = j.at("input").at(1).get<int>();
  net.output_dim = j.at("output_dim").get<int>();
  for (const auto& jl : j.at("layers")) net.layers.push_back(layer_from_json(jl));
  return net;
}

inline nlohmann::json cascade_spec_to_json(const CascadeSpec& spec) {
  nlohmann::json j;
  j["f1"] = network_spec_to_json(spec.f1);
  j["en1"] = network_spec_to_json(spec.en1);
  j["nm1"] = network_spec_to_json(spec.nm1);
  j["en1_band"] = spec.en1_band;
  j["nm1_band"] = spec.nm1_band;
  j["level2"] = {{"proto", network_spec_to_json(spec.level2_proto)}, {"half_size", spec.level2_half_size}};
  j["level3"] = {{"proto", network_spec_to_json(spec.level3_proto)}, {"half_size", spec.level3_half_size}};
  return j;
}

inline CascadeSpec cascade_spec_from_json(const nlohmann::json& j) {
  CascadeSpec spec;
  try {
    spec.f1 = network_spec_from_json(j.at("f1"), "F1");
    spec.en1 = network_spec_from_json(j.at("en1"), "EN1");
    spec.nm1 = network_spec_from_json(j.at("nm1"), "NM1");
    spec.en1_band = j.value("en1_band", 0.60);
    spec.nm1_band = j.value("nm1_band", 0.60);
    spec.level2_proto = network_spec_from_json(j.at("level2").at("proto"), "L2");
    spec.level3_proto = network_spec_from_json(j.at("level3").at("proto"), "L3");
    spec.level2_half_size = j.at("level2").value("half_size", 0.16);
    spec.level3_half_size = j.at("level3").value("half_size", 0.09);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSpecError(std::string("net config: malformed json: ") + e.what());
  }
  validate_cascade_spec(spec);
  return spec;
}

inline void save_cascade_spec(const CascadeSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << cascade_spec_to_json(spec).dump(2) << "\n";
}

inline CascadeSpec load_cascade_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UnreadableFileError("cannot open net config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidSpecError(std::string("net config: parse error in ") + path + ": " + e.what());
  }
  return cascade_spec_from_json(j);
}

// ---------------------------------------------------------------------------
// Built-in configurations
// ---------------------------------------------------------------------------

namespace detail {

inline nn::NetworkSpec make_level1_net(std::string name, int in_h, int in_w, int c1, int c2, int c3,
                                       int c4, int fc_hidden, int out_dim) {
  nn::NetworkSpec net;
  net.name = std::move(name);
  net.input_h = in_h;
  net.input_w = in_w;
  net.layers = {
      nn::ConvSpec{c1, 4, 4, 1}, nn::ReluSpec{}, nn::PoolSpec{2, 2},
      nn::ConvSpec{c2, 3, 3, 1}, nn::ReluSpec{}, nn::PoolSpec{2, 2},
      nn::ConvSpec{c3, 3, 3, 1}, nn::ReluSpec{}, nn::PoolSpec{2, 2},
      nn::ConvSpec{c4, 2, 2, 1}, nn::ReluSpec{},
      nn::FcSpec{fc_hidden},     nn::ReluSpec{},
      nn::FcSpec{out_dim},
  };
  net.output_dim = out_dim;
  return net;
}

inline nn::NetworkSpec make_refine_net(std::string name, int in_size, int c1, int c2, int c3) {
  nn::NetworkSpec net;
  net.name = std::move(name);
  net.input_h = in_size;
  net.input_w = in_size;
  net.layers = {
      nn::ConvSpec{c1, 4, 4, 1}, nn::ReluSpec{}, nn::PoolSpec{2, 2},
      nn::ConvSpec{c2, 3, 3, 1}, nn::ReluSpec{}, nn::PoolSpec{2, 2},
      nn::ConvSpec{c3, 2, 2, 1}, nn::ReluSpec{},
      nn::FcSpec{2},
  };
  net.output_dim = 2;
  return net;
}

}  // namespace detail

// Full-size architecture (the shipped default).
inline CascadeSpec default_cascade_spec() {
  CascadeSpec spec;
  spec.f1 = detail::make_level1_net("F1", 39, 39, 20, 40, 60, 80, 120, 10);
  spec.en1 = detail::make_level1_net("EN1", 31, 39, 20, 40, 60, 80, 120, 6);
  spec.nm1 = detail::make_level1_net("NM1", 31, 39, 20, 40, 60, 80, 120, 6);
  spec.level2_proto = detail::make_refine_net("L2", 15, 20, 40, 60);
  spec.level3_proto = detail::make_refine_net("L3", 15, 20, 40, 60);
  return spec;
}

// Reduced architecture for desk-scale training; same layer structure, fewer
// channels, square band inputs.
inline CascadeSpec toy_cascade_spec() {
  CascadeSpec spec;
  spec.f1 = detail::make_level1_net("F1", 31, 31, 8, 12, 16, 20, 48, 10);
  spec.en1 = detail::make_level1_net("EN1", 31, 31, 8, 12, 16, 20, 48, 6);
  spec.nm1 = detail::make_level1_net("NM1", 31, 31, 8, 12, 16, 20, 48, 6);
  spec.level2_proto = detail::make_refine_net("L2", 15, 6, 10, 14);
  spec.level3_proto = detail::make_refine_net("L3", 15, 6, 10, 14);
  return spec;
}

}  // namespace dtd
