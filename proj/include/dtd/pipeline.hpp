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

#include <chrono>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dtd/box_estimator.hpp"
#include "dtd/core.hpp"
#include "dtd/face_detector.hpp"
#include "dtd/landmark_net.hpp"
#include "dtd/pyramid_flow.hpp"

namespace dtd {

enum class PipelineMode { Uninitialized, Tracking, Lost };

enum class FrameStatus { DetectedGlobal, TrackedValidated, RecoveredGlobal, Lost, GroundTruth };

inline const char* to_string(FrameStatus s) {
  switch (s) {
    case FrameStatus::DetectedGlobal: return "DetectedGlobal";
    case FrameStatus::TrackedValidated: return "TrackedValidated";
    case FrameStatus::RecoveredGlobal: return "RecoveredGlobal";
    case FrameStatus::Lost: return "Lost";
    case FrameStatus::GroundTruth: return "GroundTruth";
  }
  return "?";
}

inline std::optional<FrameStatus> frame_status_from_string(const std::string& s) {
  for (FrameStatus st : {FrameStatus::DetectedGlobal, FrameStatus::TrackedValidated,
                         FrameStatus::RecoveredGlobal, FrameStatus::Lost, FrameStatus::GroundTruth}) {
    if (s == to_string(st)) return st;
  }
  return std::nullopt;
}

struct StageTimings {
  double track = 0.0;
  double box_estimate = 0.0;
  double local_detect = 0.0;
  double global_detect = 0.0;
  double landmark_net = 0.0;
  double total = 0.0;  // milliseconds, monotonic clock
};

struct FrameResult {
  int frame_index = 0;
  FrameStatus status = FrameStatus::Lost;
  std::optional<BoundingBox> box;
  std::optional<LandmarkSet> landmarks;
  int points_kept = 0;
  StageTimings timings;
};

struct PipelineState {
  int frame_index = 0;  // frames processed so far
  std::optional<BoundingBox> box;
  std::optional<LandmarkSet> landmarks;
  std::optional<GrayImage> prev_image;
  PipelineMode mode = PipelineMode::Uninitialized;
  int lost_streak = 0;
};

struct PipelineModels {
  CascadeModel detector;
  CascadeSpec nets;
  CascadeWeights weights;
};

namespace detail {

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

// The DTD state machine of one video stream: first-frame global detection,
// then per-frame track -> filter -> box estimate -> local validation ->
// landmark re-detection, with global re-detection as the fallback on any
// failure. Owns its state exclusively; one instance per stream.
class DtdPipeline {
 public:
  explicit DtdPipeline(PipelineModels models, FlowConfig flow = {}, DetectParams detect = {})
      : models_(std::move(models)), flow_(flow), detect_(detect) {
    validate_cascade_model(models_.detector);
    validate_cascade_spec(models_.nets);
  }

  const PipelineState& state() const { return state_; }

  FrameResult process_first_frame(const GrayImage& img) {
    if (state_.mode != PipelineMode::Uninitialized) {
      throw ContractError("process_first_frame: pipeline already initialized");
    }
    return process_global_only(img);
  }

  FrameResult process_next_frame(const GrayImage& img) {
    if (state_.mode != PipelineMode::Tracking) return process_global_only(img);

    const detail::StageTimer total;
    FrameResult result;
    result.frame_index = state_.frame_index;
    std::optional<ImagePyramid> next_pyramid;
    bool tracked = false;

    // Tracking path; any failure falls through to global recovery.
    do {
      const detail::StageTimer track_timer;
      PointCloud cloud;
      std::vector<FBResult> fb;
      MedianFilterResult filtered;
      try {
        cloud = generate_grid_points(*state_.landmarks, *state_.box);
        if (!prev_pyramid_) prev_pyramid_ = build_pyramid(*state_.prev_image, flow_);
        next_pyramid = build_pyramid(img, flow_);
        if (!prev_pyramid_->level(0).same_size(img)) {
          throw DimensionMismatchError("process_next_frame: frame size changed mid-stream");
        }
        fb = track_forward_backward(*prev_pyramid_, *next_pyramid, cloud.points, flow_);
        filtered = filter_by_median(fb);
      } catch (const NoValidPointsError&) {
        result.timings.track = track_timer.ms();
        break;
      } catch (const DegenerateBoxError&) {
        result.timings.track = track_timer.ms();
        break;
      }
      result.timings.track = track_timer.ms();
      result.points_kept = static_cast<int>(filtered.kept.size());

      const detail::StageTimer box_timer;
      BoxEstimate estimate;
      try {
        std::vector<std::pair<Point2, Point2>> pairs;
        pairs.reserve(filtered.kept.size());
        for (std::size_t idx : filtered.kept) {
          pairs.emplace_back(fb[idx].original, fb[idx].forward_estimate);
        }
        estimate = estimate_box(*state_.box, pairs);
      } catch (const InsufficientSupportError&) {
        result.timings.box_estimate = box_timer.ms();
        break;
      }
      result.timings.box_estimate = box_timer.ms();

      const detail::StageTimer local_timer;
      const std::optional<BoundingBox> validated =
          validate_local(img, models_.detector, detect_, estimate.box);
      result.timings.local_detect = local_timer.ms();
      if (!validated) break;

      const detail::StageTimer net_timer;
      const LandmarkSet landmarks = cascade_predict(img, *validated, models_.nets, models_.weights);
      result.timings.landmark_net = net_timer.ms();

      result.status = FrameStatus::TrackedValidated;
      result.box = *validated;
      result.landmarks = landmarks;
      state_.box = *validated;
      state_.landmarks = landmarks;
      tracked = true;
    } while (false);

    if (!tracked) {
      // Fallback: one global detection on this frame.
      const detail::StageTimer global_timer;
      const std::optional<BoundingBox> found = detect_global(img, models_.detector, detect_);
      result.timings.global_detect = global_timer.ms();
      if (found) {
        const detail::StageTimer net_timer;
        const LandmarkSet landmarks = cascade_predict(img, *found, models_.nets, models_.weights);
        result.timings.landmark_net += net_timer.ms();
        result.status = FrameStatus::RecoveredGlobal;
        result.box = *found;
        result.landmarks = landmarks;
        state_.box = *found;
        state_.landmarks = landmarks;
        state_.mode = PipelineMode::Tracking;
        state_.lost_streak = 0;
      } else {
        // Stale box/landmarks stay in the state for diagnostics but are
        // never emitted as results.
        result.status = FrameStatus::Lost;
        state_.mode = PipelineMode::Lost;
        state_.lost_streak += 1;
      }
    } else {
      state_.mode = PipelineMode::Tracking;
      state_.lost_streak = 0;
    }

    state_.prev_image = img;
    prev_pyramid_ = std::move(next_pyramid);  // empty when tracking failed early
    state_.frame_index += 1;
    result.timings.total = total.ms();
    return result;
  }

 private:
  // Global detection + landmark prediction; used for the first frame and for
  // every frame while no face is being tracked.
  FrameResult process_global_only(const GrayImage& img) {
    const detail::StageTimer total;
    FrameResult result;
    result.frame_index = state_.frame_index;

    const detail::StageTimer global_timer;
    const std::optional<BoundingBox> found = detect_global(img, models_.detector, detect_);
    result.timings.global_detect = global_timer.ms();

    if (found) {
      const detail::StageTimer net_timer;
      const LandmarkSet landmarks = cascade_predict(img, *found, models_.nets, models_.weights);
      result.timings.landmark_net = net_timer.ms();
      result.status = state_.mode == PipelineMode::Lost ? FrameStatus::RecoveredGlobal
                                                        : FrameStatus::DetectedGlobal;
      result.box = *found;
      result.landmarks = landmarks;
      state_.box = *found;
      state_.landmarks = landmarks;
      state_.prev_image = img;
      prev_pyramid_.reset();
      state_.mode = PipelineMode::Tracking;
      state_.lost_streak = 0;
    } else {
      result.status = FrameStatus::Lost;
      if (state_.mode == PipelineMode::Lost) {
        state_.lost_streak += 1;
        state_.prev_image = img;
        prev_pyramid_.reset();
      }
      // Uninitialized stays Uninitialized: global detection retries every
      // frame until a face appears.
    }
    state_.frame_index += 1;
    result.timings.total = total.ms();
    return result;
  }

  PipelineModels models_;
  FlowConfig flow_;
  DetectParams detect_;
  PipelineState state_;
  std::optional<ImagePyramid> prev_pyramid_;  // cache of prev_image's pyramid
};

// Drive a fresh pipeline over a frame sequence. Frames must keep one size.
inline std::vector<FrameResult> run_dtd(FrameSource& frames, const PipelineModels& models,
                                        const FlowConfig& flow = {}, const DetectParams& detect = {}) {
  DtdPipeline pipeline(models, flow, detect);
  std::vector<FrameResult> results;
  int frame_w = 0, frame_h = 0;
  std::optional<GrayImage> frame = frames.next();
  if (!frame) throw EmptySequenceError("run_dtd: no frames");
  frame_w = frame->width;
  frame_h = frame->height;
  results.push_back(pipeline.process_first_frame(*frame));
  while ((frame = frames.next())) {
    if (frame->width != frame_w || frame->height != frame_h) {
      throw DimensionMismatchError("run_dtd: frame dimensions changed mid-sequence");
    }
    results.push_back(pipeline.process_next_frame(*frame));
  }
  return results;
}

// Comparison baseline: global detection + landmark prediction on every frame,
// no tracking state.
inline std::vector<FrameResult> run_baseline_frame_by_frame(FrameSource& frames,
                                                            const PipelineModels& models,
                                                            const DetectParams& detect = {}) {
  validate_cascade_model(models.detector);
  validate_cascade_spec(models.nets);
  std::vector<FrameResult> results;
  int frame_w = 0, frame_h = 0;
  int index = 0;
  std::optional<GrayImage> frame;
  while ((frame = frames.next())) {
    if (index == 0) {
      frame_w = frame->width;
      frame_h = frame->height;
    } else if (frame->width != frame_w || frame->height != frame_h) {
      throw DimensionMismatchError("run_baseline: frame dimensions changed mid-sequence");
    }
    const detail::StageTimer total;
    FrameResult result;
    result.frame_index = index;
    const detail::StageTimer global_timer;
    const std::optional<BoundingBox> found = detect_global(*frame, models.detector, detect);
    result.timings.global_detect = global_timer.ms();
    if (found) {
      const detail::StageTimer net_timer;
      const LandmarkSet landmarks = cascade_predict(*frame, *found, models.nets, models.weights);
      result.timings.landmark_net = net_timer.ms();
      result.status = FrameStatus::DetectedGlobal;
      result.box = *found;
      result.landmarks = landmarks;
    } else {
      result.status = FrameStatus::Lost;
    }
    result.timings.total = total.ms();
    results.push_back(std::move(result));
    ++index;
  }
  if (results.empty()) throw EmptySequenceError("run_baseline: no frames");
  return results;
}

}  // namespace dtd
