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

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "dtd/core.hpp"
#include "dtd/landmark_net.hpp"
#include "dtd/nn.hpp"
#include "dtd/synth.hpp"

namespace dtd {

// Desk-scale training of the 23-network cascade on generated faces. The box
// fed to each network is jittered around the ground truth the way detector
// and tracker outputs are at inference time.
struct ToyTrainParams {
  int num_faces = 500;
  std::uint64_t seed = 7;
  double face_size = 96.0;      // face box side in the training canvas
  int canvas = 160;             // square canvas side
  double jitter_translate = 0.10;  // of the face side, per axis
  double jitter_scale = 0.10;
  double refine_shift = 0.40;   // patch-center shift range, of the patch half-size
  int level1_epochs = 40;
  int refine_epochs = 30;
  int batch_size = 16;
  double learning_rate = 0.05;
  double momentum = 0.9;
};

struct LabeledFace {
  GrayImage image;
  BoundingBox gt_box;
  LandmarkSet gt_landmarks;
  BoundingBox jittered_box;
};

inline std::vector<LabeledFace> generate_labeled_faces(int count, std::uint64_t seed, double face_size,
                                                       int canvas, double jitter_translate,
                                                       double jitter_scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> scale_dist(0.9, 1.1);
  std::vector<LabeledFace> faces;
  faces.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    SyntheticSceneSpec scene;
    scene.frame_w = canvas;
    scene.frame_h = canvas;
    scene.num_frames = 1;
    scene.base_face_size = face_size;
    scene.texture_seed = splitmix64(seed + static_cast<std::uint64_t>(i) + 1);
    const double cx = canvas * 0.5 + 4.0 * unit(rng);
    const double cy = canvas * 0.5 + 4.0 * unit(rng);
    scene.trajectory = {{{cx, cy}, scale_dist(rng)}};
    const SyntheticVideo video(scene);

    LabeledFace face;
    face.image = video.render(0);
    face.gt_box = video.gt_box(0);
    face.gt_landmarks = video.gt_landmarks(0);
    const double side = face.gt_box.short_side();
    const double dx = jitter_translate * side * unit(rng);
    const double dy = jitter_translate * side * unit(rng);
    const double ds = 1.0 + jitter_scale * unit(rng);
    const Point2 c = face.gt_box.center();
    face.jittered_box = {c.x + dx - 0.5 * side * ds, c.y + dy - 0.5 * side * ds, side * ds, side * ds};
    faces.push_back(std::move(face));
  }
  return faces;
}

namespace detail {

// FNV-1a; std::hash would work here but is not pinned across library versions.
inline std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::vector<double> landmarks_in_region(const LandmarkSet& lm, const std::vector<int>& which,
                                               const BoundingBox& region) {
  std::vector<double> target;
  target.reserve(which.size() * 2);
  for (int idx : which) {
    target.push_back((lm[idx].x - region.x) / region.w);
    target.push_back((lm[idx].y - region.y) / region.h);
  }
  return target;
}

inline BoundingBox level1_region(const CascadeSpec& spec, const std::string& id, const BoundingBox& box) {
  if (id == "EN1") return {box.x, box.y, box.w, box.h * spec.en1_band};
  if (id == "NM1") return {box.x, box.y + box.h * (1.0 - spec.nm1_band), box.w, box.h * spec.nm1_band};
  return box;
}

inline const std::vector<int>& level1_landmarks(const std::string& id) {
  if (id == "EN1") return en1_landmarks();
  if (id == "NM1") return nm1_landmarks();
  return f1_landmarks();
}

}  // namespace detail

struct ToyCascadeTraining {
  CascadeSpec spec;
  CascadeWeights weights;
  std::map<std::string, nn::TrainReport> reports;
  std::map<std::string, double> initial_mse;  // before any update
};

inline double dataset_mse(const nn::NetworkSpec& spec, const nn::NetworkWeights& weights,
                          const std::vector<nn::TrainSample>& dataset) {
  double acc = 0.0;
  for (const nn::TrainSample& s : dataset) {
    acc += nn::mse_loss(nn::net_forward(spec, weights, s.input).data, s.target);
  }
  return acc / static_cast<double>(dataset.size());
}

inline ToyCascadeTraining train_toy_cascade(const ToyTrainParams& params,
                                            const CascadeSpec& spec = toy_cascade_spec()) {
  validate_cascade_spec(spec);
  ToyCascadeTraining out;
  out.spec = spec;
  out.weights = init_cascade_weights(spec, params.seed);

  const std::vector<LabeledFace> faces =
      generate_labeled_faces(params.num_faces, params.seed, params.face_size, params.canvas,
                             params.jitter_translate, params.jitter_scale);

  // Level 1: one dataset per network, crops from the jittered face box.
  for (const std::string& id : {std::string("F1"), std::string("EN1"), std::string("NM1")}) {
    const nn::NetworkSpec& net = instance_spec(spec, id);
    std::vector<nn::TrainSample> dataset;
    dataset.reserve(faces.size());
    for (const LabeledFace& face : faces) {
      const BoundingBox region = detail::level1_region(spec, id, face.jittered_box);
      nn::TrainSample sample;
      sample.input = extract_patch(face.image, region, net.input_h, net.input_w);
      sample.target = detail::landmarks_in_region(face.gt_landmarks, detail::level1_landmarks(id), region);
      dataset.push_back(std::move(sample));
    }
    out.initial_mse[id] = dataset_mse(net, out.weights[id], dataset);
    nn::SgdHyper hyper{params.batch_size, params.learning_rate, params.momentum, params.level1_epochs,
                       splitmix64(params.seed ^ detail::name_hash(id))};
    out.reports[id] = nn::sgd_train(net, out.weights[id], dataset, hyper);
  }

  // Levels 2 and 3: patches centered near the true landmark; each instance of
  // a pair sees its own random shifts so the averaged pair decorrelates.
  std::mt19937_64 shift_rng(splitmix64(params.seed + 0x51ED270B));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int level = 2; level <= 3; ++level) {
    const nn::NetworkSpec& proto = level == 2 ? spec.level2_proto : spec.level3_proto;
    const double half_frac = level == 2 ? spec.level2_half_size : spec.level3_half_size;
    for (int lm = 0; lm < kNumLandmarks; ++lm) {
      for (int inst = 0; inst < 2; ++inst) {
        const std::string id = refine_instance_id(level, lm, inst);
        std::vector<nn::TrainSample> dataset;
        dataset.reserve(faces.size());
        for (const LabeledFace& face : faces) {
          const double half = half_frac * face.jittered_box.short_side();
          const Point2 truth = face.gt_landmarks[lm];
          const Point2 center{truth.x + params.refine_shift * half * unit(shift_rng),
                              truth.y + params.refine_shift * half * unit(shift_rng)};
          const BoundingBox region{center.x - half, center.y - half, 2.0 * half, 2.0 * half};
          nn::TrainSample sample;
          sample.input = extract_patch(face.image, region, proto.input_h, proto.input_w);
          sample.target = {(truth.x - region.x) / region.w, (truth.y - region.y) / region.h};
          dataset.push_back(std::move(sample));
        }
        out.initial_mse[id] = dataset_mse(proto, out.weights[id], dataset);
        nn::SgdHyper hyper{params.batch_size, params.learning_rate, params.momentum, params.refine_epochs,
                           splitmix64(params.seed ^ detail::name_hash(id))};
        out.reports[id] = nn::sgd_train(proto, out.weights[id], dataset, hyper);
      }
    }
  }
  return out;
}

// Mean landmark error of the full cascade on freshly generated faces, as a
// fraction of the face-box short side. The ground-truth box is the input, the
// generator's landmark positions are the reference.
inline double eval_toy_cascade(const CascadeSpec& spec, const CascadeWeights& weights, int count,
                               std::uint64_t seed, double face_size = 96.0, int canvas = 160) {
  const std::vector<LabeledFace> faces = generate_labeled_faces(count, seed, face_size, canvas, 0.0, 0.0);
  double total = 0.0;
  std::size_t n = 0;
  for (const LabeledFace& face : faces) {
    const LandmarkSet got = cascade_predict(face.image, face.gt_box, spec, weights);
    for (int i = 0; i < kNumLandmarks; ++i) {
      total += distance(got[i], face.gt_landmarks[i]) / face.gt_box.short_side();
      ++n;
    }
  }
  return total / static_cast<double>(n);
}

}  // namespace dtd
