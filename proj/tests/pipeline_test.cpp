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

#include "dtd/pipeline.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "dtd/synth.hpp"
#include "test_support.hpp"

namespace dtd {
namespace {

DetectParams scan_params() {
  DetectParams p;
  p.min_size = 64;
  p.scale_factor = 1.10;
  p.step_fraction = 0.04;
  p.group_min_neighbors = 3;
  return p;
}

PipelineModels test_models() {
  const CascadeSpec spec = toy_cascade_spec();
  return {make_fixture_cascade(), spec, test::center_rigged_weights(spec)};
}

SyntheticVideo make_video(SyntheticSceneSpec scene) { return SyntheticVideo(std::move(scene)); }

SyntheticSceneSpec base_scene(int frames) {
  SyntheticSceneSpec scene;
  scene.frame_w = 640;
  scene.frame_h = 480;
  scene.num_frames = frames;
  scene.base_face_size = 120;
  scene.texture_seed = 31;
  scene.trajectory = static_trajectory({320, 240}, 1.0, frames);
  return scene;
}

// A source that yields pure background (face parked far off-frame).
SyntheticSceneSpec blank_scene(int frames) {
  SyntheticSceneSpec scene = base_scene(frames);
  scene.trajectory = static_trajectory({-1000, -1000}, 1.0, frames);
  return scene;
}

void check_state_invariants(const PipelineState& state) {
  if (state.mode == PipelineMode::Tracking) {
    EXPECT_TRUE(state.box.has_value());
    EXPECT_TRUE(state.landmarks.has_value());
    EXPECT_TRUE(state.prev_image.has_value());
    EXPECT_EQ(state.lost_streak, 0);
  }
}

TEST(ProcessFirstFrame, DetectsPlantedFace) {
  const SyntheticVideo video = make_video(base_scene(1));
  DtdPipeline pipeline(test_models(), FlowConfig{}, scan_params());
  const FrameResult r = pipeline.process_first_frame(video.render(0));
  EXPECT_EQ(r.status, FrameStatus::DetectedGlobal);
  ASSERT_TRUE(r.box.has_value());
  EXPECT_GE(bbox_iou(*r.box, video.gt_box(0)), 0.5);
  ASSERT_TRUE(r.landmarks.has_value());
  EXPECT_EQ(pipeline.state().mode, PipelineMode::Tracking);
  check_state_invariants(pipeline.state());
}

TEST(ProcessFirstFrame, BlankFrameStaysUninitialized) {
  const SyntheticVideo video = make_video(blank_scene(2));
  DtdPipeline pipeline(test_models(), FlowConfig{}, scan_params());
  const FrameResult r = pipeline.process_first_frame(video.render(0));
  EXPECT_EQ(r.status, FrameStatus::Lost);
  EXPECT_FALSE(r.box.has_value());
  EXPECT_FALSE(r.landmarks.has_value());
  EXPECT_EQ(pipeline.state().mode, PipelineMode::Uninitialized);

  // The pipeline keeps retrying global detection while uninitialized.
  const SyntheticVideo with_face = make_video(base_scene(1));
  const FrameResult r2 = pipeline.process_next_frame(with_face.render(0));
  EXPECT_EQ(r2.status, FrameStatus::DetectedGlobal);
  EXPECT_EQ(pipeline.state().mode, PipelineMode::Tracking);
}

TEST(ProcessFirstFrame, SecondCallIsContractError) {
  const SyntheticVideo video = make_video(base_scene(1));
  DtdPipeline pipeline(test_models(), FlowConfig{}, scan_params());
  pipeline.process_first_frame(video.render(0));
  EXPECT_THROW(pipeline.process_first_frame(video.render(0)), ContractError);
}

TEST(ProcessNextFrame, StationaryFaceIsTrackedWithTinyDrift) {
  const SyntheticVideo video = make_video(base_scene(2));
  DtdPipeline pipeline(test_models(), FlowConfig{}, scan_params());
  const FrameResult first = pipeline.process_first_frame(video.render(0));
  ASSERT_EQ(first.status, FrameStatus::DetectedGlobal);
  const FrameResult second = pipeline.process_next_frame(video.render(1));
  EXPECT_EQ(second.status, FrameStatus::TrackedValidated);
  ASSERT_TRUE(second.box.has_value());
  EXPECT_LT(std::abs(second.box->x - first.box->x), 1.0);
  EXPECT_LT(std::abs(second.box->y - first.box->y), 1.0);
  for (int i = 0; i < kNumLandmarks; ++i) {
    EXPECT_LT(distance((*second.landmarks)[i], (*first.landmarks)[i]), 0.5);
  }
  EXPECT_GE(second.points_kept, 8);
  EXPECT_GT(second.timings.track, 0.0);
  EXPECT_GT(second.timings.local_detect, 0.0);
  EXPECT_DOUBLE_EQ(second.timings.global_detect, 0.0);
}

TEST(ProcessNextFrame, FollowsTranslation) {
  SyntheticSceneSpec scene = base_scene(8);
  scene.trajectory = linear_trajectory({280, 230}, {4, 2}, 1.0, 8);
  const SyntheticVideo video = make_video(scene);
  DtdPipeline pipeline(test_models(), FlowConfig{}, scan_params());
  pipeline.process_first_frame(video.render(0));
  for (int t = 1; t < 8; ++t) {
    const FrameResult r = pipeline.process_next_frame(video.render(t));
    ASSERT_EQ(r.status, FrameStatus::TrackedValidated) << "frame " << t;
    EXPECT_GE(bbox_iou(*r.box, video.gt_box(t)), 0.7) << "frame " << t;
    check_state_invariants(pipeline.state());
  }
}

TEST(ProcessNextFrame, OcclusionCausesLossThenRecovery) {
  SyntheticSceneSpec scene = base_scene(8);
  {
    const SyntheticVideo plain = make_video(scene);
    scene.occlusions.push_back(make_full_occlusion(plain, 2, 4));
  }
  const SyntheticVideo video = make_video(scene);
  DtdPipeline pipeline(test_models(), FlowConfig{}, scan_params());
  EXPECT_EQ(pipeline.process_first_frame(video.render(0)).status, FrameStatus::DetectedGlobal);
  EXPECT_EQ(pipeline.process_next_frame(video.render(1)).status, FrameStatus::TrackedValidated);

  for (int t = 2; t <= 4; ++t) {
    const FrameResult r = pipeline.process_next_frame(video.render(t));
    EXPECT_EQ(r.status, FrameStatus::Lost) << "frame " << t;
    EXPECT_FALSE(r.box.has_value());
    EXPECT_FALSE(r.landmarks.has_value());
    EXPECT_EQ(pipeline.state().mode, PipelineMode::Lost);
    // Stale memory is kept internally, never emitted.
    EXPECT_TRUE(pipeline.state().box.has_value());
    EXPECT_EQ(pipeline.state().lost_streak, t - 1);
  }

  // Monotone recovery: the first unoccluded frame recovers globally.
  const FrameResult recovered = pipeline.process_next_frame(video.render(5));
  EXPECT_EQ(recovered.status, FrameStatus::RecoveredGlobal);
  EXPECT_EQ(pipeline.state().mode, PipelineMode::Tracking);
  EXPECT_EQ(pipeline.state().lost_streak, 0);
  EXPECT_EQ(pipeline.process_next_frame(video.render(6)).status, FrameStatus::TrackedValidated);
}

TEST(Run, SingleFrameSequence) {
  const SyntheticVideo video = make_video(base_scene(1));
  SyntheticFrameSource source(video);
  const auto results = run_dtd(source, test_models(), FlowConfig{}, scan_params());
  ASSERT_EQ(results.size(), 1u);
  EXPECT_EQ(results[0].status, FrameStatus::DetectedGlobal);
  EXPECT_EQ(results[0].frame_index, 0);
}

TEST(Run, SmoothMotionSequenceMostlyTracked) {
  SyntheticSceneSpec scene = base_scene(50);
  scene.trajectory = random_walk_trajectory(8, {320, 240}, 5.0, 1.0, 0.02, 50,
                                            {200, 180, 240, 120});
  const SyntheticVideo video = make_video(scene);
  SyntheticFrameSource source(video);
  const auto results = run_dtd(source, test_models(), FlowConfig{}, scan_params());
  ASSERT_EQ(results.size(), 50u);
  EXPECT_EQ(results[0].status, FrameStatus::DetectedGlobal);
  int tracked = 0;
  for (std::size_t t = 1; t < results.size(); ++t) {
    if (results[t].status == FrameStatus::TrackedValidated) ++tracked;
  }
  EXPECT_GE(tracked, 48);
}

TEST(Run, EmptyAndDimensionErrors) {
  class EmptySource final : public FrameSource {
   public:
    std::optional<GrayImage> next() override { return std::nullopt; }
  } empty;
  EXPECT_THROW(run_dtd(empty, test_models(), FlowConfig{}, scan_params()), EmptySequenceError);

  class ShrinkingSource final : public FrameSource {
   public:
    std::optional<GrayImage> next() override {
      if (count_ == 2) return std::nullopt;
      ++count_;
      return count_ == 1 ? GrayImage(200, 150, 0.4f) : GrayImage(100, 80, 0.4f);
    }

   private:
    int count_ = 0;
  } shrinking;
  EXPECT_THROW(run_dtd(shrinking, test_models(), FlowConfig{}, scan_params()), DimensionMismatchError);
}

TEST(Baseline, BlankSequenceAllLost) {
  const SyntheticVideo video = make_video(blank_scene(3));
  SyntheticFrameSource source(video);
  const auto results = run_baseline_frame_by_frame(source, test_models(), scan_params());
  ASSERT_EQ(results.size(), 3u);
  for (const FrameResult& r : results) {
    EXPECT_EQ(r.status, FrameStatus::Lost);
    EXPECT_GT(r.timings.global_detect, 0.0);
  }
}

TEST(Baseline, FirstFrameEquivalentToDtd) {
  const SyntheticVideo video = make_video(base_scene(3));
  const PipelineModels models = test_models();

  SyntheticFrameSource dtd_source(video);
  const auto dtd_results = run_dtd(dtd_source, models, FlowConfig{}, scan_params());
  SyntheticFrameSource base_source(video);
  const auto base_results = run_baseline_frame_by_frame(base_source, models, scan_params());

  ASSERT_FALSE(dtd_results.empty());
  ASSERT_FALSE(base_results.empty());
  ASSERT_TRUE(dtd_results[0].box.has_value());
  ASSERT_TRUE(base_results[0].box.has_value());
  // Bit-for-bit identical frame-0 outputs.
  EXPECT_EQ(dtd_results[0].status, base_results[0].status);
  EXPECT_EQ(std::memcmp(&*dtd_results[0].box, &*base_results[0].box, sizeof(BoundingBox)), 0);
  EXPECT_EQ(std::memcmp(&*dtd_results[0].landmarks, &*base_results[0].landmarks, sizeof(LandmarkSet)), 0);
}

TEST(StateMachine, InvariantsHoldUnderRandomizedSequences) {
  // Random mix of blank, face, moved-face and occluded frames.
  std::mt19937_64 rng(1357);
  const PipelineModels models = test_models();

  for (int trial = 0; trial < 3; ++trial) {
    DtdPipeline pipeline(models, FlowConfig{}, scan_params());
    Point2 center{320, 240};
    bool first = true;
    for (int step = 0; step < 25; ++step) {
      const int kind = static_cast<int>(rng() % 4);
      SyntheticSceneSpec scene = base_scene(1);
      scene.texture_seed = 31;  // static background across frames
      if (kind == 0) {
        scene.trajectory = static_trajectory({-1000, -1000}, 1.0, 1);  // blank
      } else if (kind == 3) {
        scene.trajectory = static_trajectory(center, 1.0, 1);
        const SyntheticVideo plain = make_video(scene);
        scene.occlusions.push_back(make_full_occlusion(plain, 0, 0));
      } else {
        center.x = std::clamp(center.x + static_cast<double>(rng() % 11) - 5.0, 200.0, 440.0);
        center.y = std::clamp(center.y + static_cast<double>(rng() % 11) - 5.0, 200.0, 280.0);
        scene.trajectory = static_trajectory(center, 1.0, 1);
      }
      const SyntheticVideo video = make_video(scene);
      const GrayImage frame = video.render(0);
      const FrameResult r = first ? pipeline.process_first_frame(frame) : pipeline.process_next_frame(frame);
      first = false;
      check_state_invariants(pipeline.state());
      if (r.status == FrameStatus::Lost) {
        EXPECT_FALSE(r.landmarks.has_value());
      } else {
        EXPECT_TRUE(r.box.has_value());
        EXPECT_TRUE(r.landmarks.has_value());
      }
      EXPECT_GE(r.timings.total, 0.0);
    }
  }
}

}  // namespace
}  // namespace dtd
