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

#include "dtd/synth.hpp"

#include <gtest/gtest.h>

namespace dtd {
namespace {

SyntheticSceneSpec basic_scene(int frames = 3) {
  SyntheticSceneSpec scene;
  scene.frame_w = 320;
  scene.frame_h = 240;
  scene.num_frames = frames;
  scene.base_face_size = 100;
  scene.texture_seed = 9;
  scene.trajectory = static_trajectory({160, 120}, 1.0, frames);
  return scene;
}

TEST(SyntheticVideo, DeterministicGivenSeed) {
  const SyntheticVideo a(basic_scene());
  const SyntheticVideo b(basic_scene());
  for (int t = 0; t < 3; ++t) {
    EXPECT_EQ(a.render(t).data, b.render(t).data);
  }
  SyntheticSceneSpec other = basic_scene();
  other.texture_seed = 10;
  const SyntheticVideo c(other);
  EXPECT_NE(a.render(0).data, c.render(0).data);
}

TEST(SyntheticVideo, StaticTrajectoryGivesIdenticalGroundTruth) {
  const SyntheticVideo video(basic_scene(5));
  const BoundingBox first = video.gt_box(0);
  for (int t = 1; t < 5; ++t) {
    const BoundingBox b = video.gt_box(t);
    EXPECT_DOUBLE_EQ(b.x, first.x);
    EXPECT_DOUBLE_EQ(b.y, first.y);
    EXPECT_DOUBLE_EQ(b.w, first.w);
    EXPECT_DOUBLE_EQ(b.h, first.h);
  }
}

TEST(SyntheticVideo, GroundTruthFollowsTrajectoryAnalytically) {
  SyntheticSceneSpec scene = basic_scene(4);
  scene.trajectory = linear_trajectory({100, 90}, {5, -2}, 1.0, 4);
  scene.trajectory[3].scale = 1.25;
  const SyntheticVideo video(scene);

  const auto fractions = FacePattern::landmark_fractions();
  for (int t = 0; t < 4; ++t) {
    const FramePose& pose = scene.trajectory[static_cast<std::size_t>(t)];
    const double side = scene.base_face_size * pose.scale;
    const BoundingBox box = video.gt_box(t);
    EXPECT_DOUBLE_EQ(box.w, side);
    EXPECT_DOUBLE_EQ(box.x, pose.center.x - side / 2);
    const LandmarkSet lm = video.gt_landmarks(t);
    for (int i = 0; i < kNumLandmarks; ++i) {
      EXPECT_DOUBLE_EQ(lm[i].x, box.x + fractions[static_cast<std::size_t>(i)].x * side);
      EXPECT_DOUBLE_EQ(lm[i].y, box.y + fractions[static_cast<std::size_t>(i)].y * side);
    }
  }
}

TEST(SyntheticVideo, InvalidSpecsThrow) {
  SyntheticSceneSpec scene = basic_scene();
  scene.trajectory.pop_back();
  EXPECT_THROW(SyntheticVideo{scene}, InvalidSpecError);

  scene = basic_scene();
  scene.num_frames = 0;
  EXPECT_THROW(SyntheticVideo{scene}, InvalidSpecError);

  scene = basic_scene();
  scene.trajectory[1].scale = -1.0;
  EXPECT_THROW(SyntheticVideo{scene}, InvalidSpecError);

  scene = basic_scene();
  scene.occlusions.push_back({5, 2, {0, 0, 10, 10}});
  EXPECT_THROW(SyntheticVideo{scene}, InvalidSpecError);
}

TEST(SyntheticVideo, OcclusionCoversFace) {
  SyntheticSceneSpec scene = basic_scene(3);
  {
    const SyntheticVideo plain(scene);
    scene.occlusions.push_back(make_full_occlusion(plain, 1, 1));
  }
  const SyntheticVideo video(scene);
  EXPECT_FALSE(video.occluded(0));
  EXPECT_TRUE(video.occluded(1));
  EXPECT_FALSE(video.occluded(2));

  const GrayImage occluded = video.render(1);
  const BoundingBox face = video.gt_box(1);
  for (int y = static_cast<int>(face.y); y < static_cast<int>(face.bottom()); y += 7) {
    for (int x = static_cast<int>(face.x); x < static_cast<int>(face.right()); x += 7) {
      EXPECT_FLOAT_EQ(occluded.at(x, y), 0.5f);
    }
  }
  // Frames outside the range show the face (bright skin at the box center).
  const GrayImage visible = video.render(0);
  const Point2 c = video.gt_box(0).center();
  EXPECT_GT(visible.at(static_cast<int>(c.x), static_cast<int>(c.y) - 5), 0.6f);
}

TEST(SyntheticVideo, FrameSourceYieldsAllFramesLazily) {
  const SyntheticVideo video(basic_scene(4));
  SyntheticFrameSource source(video);
  int count = 0;
  while (auto frame = source.next()) {
    EXPECT_EQ(frame->width, 320);
    EXPECT_EQ(frame->height, 240);
    ++count;
  }
  EXPECT_EQ(count, 4);
}

TEST(Trajectories, RandomWalkBoundsAndStepSize) {
  const BoundingBox bounds{100, 100, 400, 200};
  const auto traj = random_walk_trajectory(5, {300, 200}, 4.0, 1.0, 0.05, 200, bounds);
  ASSERT_EQ(traj.size(), 200u);
  for (std::size_t t = 0; t < traj.size(); ++t) {
    EXPECT_GE(traj[t].center.x, bounds.x);
    EXPECT_LE(traj[t].center.x, bounds.right());
    EXPECT_GE(traj[t].center.y, bounds.y);
    EXPECT_LE(traj[t].center.y, bounds.bottom());
    EXPECT_GT(traj[t].scale, 0.9);
    EXPECT_LT(traj[t].scale, 1.1);
    if (t > 0) EXPECT_LE(distance(traj[t].center, traj[t - 1].center), 4.0 + 1e-9);
  }
  // Same seed reproduces; the walk actually moves.
  const auto again = random_walk_trajectory(5, {300, 200}, 4.0, 1.0, 0.05, 200, bounds);
  EXPECT_DOUBLE_EQ(traj[150].center.x, again[150].center.x);
  EXPECT_GT(distance(traj[0].center, traj[199].center), 10.0);
}

TEST(FixtureCascade, IsAValidModel) {
  EXPECT_NO_THROW(validate_cascade_model(make_fixture_cascade()));
  const CascadeModel model = make_fixture_cascade();
  EXPECT_GE(model.stages.size(), 2u);
}

}  // namespace
}  // namespace dtd
