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

#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dtd/image_io.hpp"
#include "dtd/pipeline.hpp"
#include "dtd/results_io.hpp"
#include "dtd/synth.hpp"
#include "dtd/trainer.hpp"

namespace dtd::cli {

namespace detail {

inline CascadeSpec resolve_net_config(const std::string& arg) {
  if (arg == "default") return default_cascade_spec();
  if (arg == "toy") return toy_cascade_spec();
  return load_cascade_spec(arg);
}

inline std::string frame_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05d.pgm", index);
  return buf;
}

inline void zero_timings(std::vector<FrameResult>& results) {
  for (FrameResult& r : results) r.timings = StageTimings{};
}

struct ModelFlags {
  std::string frames_dir;
  std::string cascade_path;
  std::string weights_path;
  std::string net_config = "default";
  std::string out_path;
  std::string timings_mode = "real";
  std::string dump_annotated;

  DetectParams detect;
  FlowConfig flow;

  void add_common(CLI::App* cmd, bool with_flow) {
    cmd->add_option("--frames", frames_dir, "directory of PGM/PNG frames")->required();
    cmd->add_option("--cascade", cascade_path, "cascade model JSON file")->required();
    cmd->add_option("--weights", weights_path, "landmark network weights file")->required();
    cmd->add_option("--net-config", net_config, "'default', 'toy', or a config JSON path");
    cmd->add_option("--out", out_path, "results file (line-delimited JSON)");
    cmd->add_option("--timings", timings_mode, "'real' or 'zero' (zero for byte-reproducible output)")
        ->check(CLI::IsMember({"real", "zero"}));
    cmd->add_option("--dump-annotated", dump_annotated, "directory for annotated PGM frames");
    cmd->add_option("--min-size", detect.min_size, "smallest detection window (px)");
    cmd->add_option("--scale-factor", detect.scale_factor, "window scale step (>1)");
    cmd->add_option("--step-fraction", detect.step_fraction, "slide step as fraction of window");
    cmd->add_option("--group-min-neighbors", detect.group_min_neighbors, "min raw hits per group");
    cmd->add_option("--group-iou", detect.group_iou, "IoU for grouping raw hits");
    if (with_flow) {
      cmd->add_option("--lk-radius", flow.window_radius, "LK window radius (px)");
      cmd->add_option("--lk-levels", flow.pyramid_levels, "pyramid levels");
      cmd->add_option("--lk-iters", flow.max_iterations, "LK iterations per level");
      cmd->add_option("--lk-epsilon", flow.epsilon, "LK convergence threshold (px)");
      cmd->add_option("--min-eigen", flow.min_eigen_threshold, "texture gate threshold");
    }
  }

  PipelineModels load_models() const {
    return {load_cascade_model(cascade_path), resolve_net_config(net_config),
            load_cascade_weights(weights_path)};
  }
};

inline void dump_annotated_frames(const std::string& frames_dir, const std::string& out_dir,
                                  const std::vector<FrameResult>& results) {
  std::filesystem::create_directories(out_dir);
  DirectoryFrameSource frames(frames_dir);
  std::size_t index = 0;
  std::optional<GrayImage> frame;
  while ((frame = frames.next()) && index < results.size()) {
    GrayImage copy = *frame;
    const FrameResult& r = results[index];
    if (r.box && r.landmarks) draw_annotations(copy, *r.box, *r.landmarks);
    write_pgm(copy, (std::filesystem::path(out_dir) / frame_filename(static_cast<int>(index))).string());
    ++index;
  }
}

inline void print_run_summary(std::ostream& out, const std::vector<FrameResult>& results) {
  const RunSummary summary = summarize_results(results);
  out << "frames: " << summary.frames << "\n";
  for (const auto& [status, count] : summary.status_counts) out << "  " << status << ": " << count << "\n";
  out << "median_total_ms: " << summary.timing_stats.at("total").median << "\n";
}

}  // namespace detail

// Entry point shared by the binary and the tests. Returns 0 on success, 2 on
// usage errors, 1 on runtime failures.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"dtdtrack — facial landmark tracking in video (detect, track, re-detect)"};
  app.require_subcommand(1);

  // --- run / baseline / compare -------------------------------------------
  detail::ModelFlags run_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "track landmarks through a frame directory");
  run_flags.add_common(run_cmd, true);

  detail::ModelFlags baseline_flags;
  CLI::App* baseline_cmd = app.add_subcommand("baseline", "frame-by-frame global detection");
  baseline_flags.add_common(baseline_cmd, false);

  detail::ModelFlags compare_flags;
  std::string compare_out_dtd, compare_out_baseline;
  CLI::App* compare_cmd = app.add_subcommand("compare", "run both modes and report the speedup");
  compare_flags.add_common(compare_cmd, true);
  compare_cmd->add_option("--out-dtd", compare_out_dtd, "results file for the tracking mode");
  compare_cmd->add_option("--out-baseline", compare_out_baseline, "results file for the baseline");

  // --- synth ----------------------------------------------------------------
  struct SynthFlags {
    std::string out_dir;
    std::string gt_path;
    std::string cascade_out;
    int frames = 50;
    int width = 1280;
    int height = 720;
    std::uint64_t seed = 1;
    double face_size = 120.0;
    double motion = 4.0;
    double scale_amplitude = 0.03;
    std::string occlude;  // "first:last"
  } synth_flags;
  CLI::App* synth_cmd = app.add_subcommand("synth", "emit a synthetic sequence plus ground truth");
  synth_cmd->add_option("--out", synth_flags.out_dir, "output directory for PGM frames")->required();
  synth_cmd->add_option("--gt", synth_flags.gt_path, "ground-truth file to write");
  synth_cmd->add_option("--cascade-out", synth_flags.cascade_out, "write the matched fixture cascade JSON");
  synth_cmd->add_option("--frames", synth_flags.frames, "number of frames");
  synth_cmd->add_option("--width", synth_flags.width, "frame width");
  synth_cmd->add_option("--height", synth_flags.height, "frame height");
  synth_cmd->add_option("--seed", synth_flags.seed, "texture/trajectory seed");
  synth_cmd->add_option("--face-size", synth_flags.face_size, "face box side at scale 1");
  synth_cmd->add_option("--motion", synth_flags.motion, "max center motion per frame (px)");
  synth_cmd->add_option("--scale-amplitude", synth_flags.scale_amplitude, "relative scale oscillation");
  synth_cmd->add_option("--occlude", synth_flags.occlude, "occlusion frame range 'first:last'");

  // --- eval -------------------------------------------------------------
  struct EvalFlags {
    std::string results_path;
    std::string gt_path;
  } eval_flags;
  CLI::App* eval_cmd = app.add_subcommand("eval", "landmark error of a results file vs ground truth");
  eval_cmd->add_option("--results", eval_flags.results_path, "results file")->required();
  eval_cmd->add_option("--gt", eval_flags.gt_path, "ground-truth file")->required();

  // --- train ----------------------------------------------------------------
  struct TrainFlags {
    std::string out_weights;
    std::string arch = "toy";
    std::string config_out;
    ToyTrainParams params;
  } train_flags;
  CLI::App* train_cmd = app.add_subcommand("train", "train the toy cascade on synthetic faces");
  train_cmd->add_option("--out-weights", train_flags.out_weights, "weights file to write")->required();
  train_cmd->add_option("--arch", train_flags.arch, "'toy', 'default', or a config JSON path");
  train_cmd->add_option("--config-out", train_flags.config_out, "also write the architecture config JSON");
  train_cmd->add_option("--samples", train_flags.params.num_faces, "training faces");
  train_cmd->add_option("--seed", train_flags.params.seed, "training seed");
  train_cmd->add_option("--face-size", train_flags.params.face_size, "face side in the training canvas");
  train_cmd->add_option("--epochs", train_flags.params.level1_epochs, "level-1 epochs");
  train_cmd->add_option("--refine-epochs", train_flags.params.refine_epochs, "level-2/3 epochs");
  train_cmd->add_option("--batch", train_flags.params.batch_size, "mini-batch size");
  train_cmd->add_option("--lr", train_flags.params.learning_rate, "learning rate");
  train_cmd->add_option("--momentum", train_flags.params.momentum, "momentum");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      return app.exit(e, out, err);  // --help
    }
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (run_cmd->parsed()) {
      DirectoryFrameSource frames(run_flags.frames_dir);
      std::vector<FrameResult> results =
          run_dtd(frames, run_flags.load_models(), run_flags.flow, run_flags.detect);
      if (run_flags.timings_mode == "zero") detail::zero_timings(results);
      if (!run_flags.out_path.empty()) write_results(results, run_flags.out_path);
      if (!run_flags.dump_annotated.empty()) {
        detail::dump_annotated_frames(run_flags.frames_dir, run_flags.dump_annotated, results);
      }
      detail::print_run_summary(out, results);
    } else if (baseline_cmd->parsed()) {
      DirectoryFrameSource frames(baseline_flags.frames_dir);
      std::vector<FrameResult> results =
          run_baseline_frame_by_frame(frames, baseline_flags.load_models(), baseline_flags.detect);
      if (baseline_flags.timings_mode == "zero") detail::zero_timings(results);
      if (!baseline_flags.out_path.empty()) write_results(results, baseline_flags.out_path);
      if (!baseline_flags.dump_annotated.empty()) {
        detail::dump_annotated_frames(baseline_flags.frames_dir, baseline_flags.dump_annotated, results);
      }
      detail::print_run_summary(out, results);
    } else if (compare_cmd->parsed()) {
      const PipelineModels models = compare_flags.load_models();
      DirectoryFrameSource dtd_frames(compare_flags.frames_dir);
      const std::vector<FrameResult> dtd_results =
          run_dtd(dtd_frames, models, compare_flags.flow, compare_flags.detect);
      DirectoryFrameSource base_frames(compare_flags.frames_dir);
      const std::vector<FrameResult> base_results =
          run_baseline_frame_by_frame(base_frames, models, compare_flags.detect);
      if (!compare_out_dtd.empty()) write_results(dtd_results, compare_out_dtd);
      if (!compare_out_baseline.empty()) write_results(base_results, compare_out_baseline);

      const RunSummary dtd_summary = summarize_results(dtd_results);
      const RunSummary base_summary = summarize_results(base_results);
      out << std::left << std::setw(16) << "stage" << std::right << std::setw(16) << "dtd_median_ms"
          << std::setw(20) << "baseline_median_ms" << "\n";
      for (const char* stage : {"track", "box_estimate", "local_detect", "global_detect",
                                "landmark_net", "total"}) {
        out << std::left << std::setw(16) << stage << std::right << std::setw(16) << std::fixed
            << std::setprecision(3) << dtd_summary.timing_stats.at(stage).median << std::setw(20)
            << base_summary.timing_stats.at(stage).median << "\n";
      }
      const double dtd_median = dtd_summary.timing_stats.at("total").median;
      const double base_median = base_summary.timing_stats.at("total").median;
      const double speedup = dtd_median > 0.0 ? base_median / dtd_median : 0.0;
      out << "speedup: " << std::fixed << std::setprecision(2) << speedup << "x\n";
    } else if (synth_cmd->parsed()) {
      SyntheticSceneSpec scene;
      scene.frame_w = synth_flags.width;
      scene.frame_h = synth_flags.height;
      scene.num_frames = synth_flags.frames;
      scene.base_face_size = synth_flags.face_size;
      scene.texture_seed = synth_flags.seed;
      const double margin = 1.5 * synth_flags.face_size * (1.0 + synth_flags.scale_amplitude);
      const BoundingBox bounds{margin, margin, std::max(1.0, scene.frame_w - 2.0 * margin),
                               std::max(1.0, scene.frame_h - 2.0 * margin)};
      scene.trajectory = random_walk_trajectory(
          synth_flags.seed, {scene.frame_w * 0.5, scene.frame_h * 0.5}, synth_flags.motion, 1.0,
          synth_flags.scale_amplitude, synth_flags.frames, bounds);
      if (!synth_flags.occlude.empty()) {
        const auto colon = synth_flags.occlude.find(':');
        if (colon == std::string::npos) {
          err << "--occlude expects 'first:last'\n";
          return 2;
        }
        const int first = std::stoi(synth_flags.occlude.substr(0, colon));
        const int last = std::stoi(synth_flags.occlude.substr(colon + 1));
        const SyntheticVideo plain(scene);
        scene.occlusions.push_back(make_full_occlusion(plain, first, last));
      }
      const SyntheticVideo video(scene);
      std::filesystem::create_directories(synth_flags.out_dir);
      std::vector<FrameResult> gt;
      for (int t = 0; t < video.num_frames(); ++t) {
        write_pgm(video.render(t),
                  (std::filesystem::path(synth_flags.out_dir) / detail::frame_filename(t)).string());
        FrameResult r;
        r.frame_index = t;
        r.status = FrameStatus::GroundTruth;
        if (!video.occluded(t)) {
          r.box = video.gt_box(t);
          r.landmarks = video.gt_landmarks(t);
        }
        gt.push_back(std::move(r));
      }
      if (!synth_flags.gt_path.empty()) write_ground_truth(gt, synth_flags.gt_path);
      if (!synth_flags.cascade_out.empty()) save_cascade_model(make_fixture_cascade(), synth_flags.cascade_out);
      out << "frames_written: " << video.num_frames() << "\n";
    } else if (eval_cmd->parsed()) {
      const std::vector<FrameResult> results = read_results(eval_flags.results_path);
      const std::vector<FrameResult> gt = read_results(eval_flags.gt_path);
      const EvalStats stats = evaluate_landmarks(results, gt);
      out << "frames_compared: " << stats.frames_compared << "\n";
      out << "mean_px: " << stats.mean_px << "\n";
      out << "rms_px: " << stats.rms_px << "\n";
      out << "rms_normalized: " << stats.rms_normalized << "\n";
    } else if (train_cmd->parsed()) {
      const CascadeSpec spec = detail::resolve_net_config(train_flags.arch);
      const ToyCascadeTraining trained = train_toy_cascade(train_flags.params, spec);
      save_cascade_weights(trained.weights, trained.spec, train_flags.out_weights);
      if (!train_flags.config_out.empty()) save_cascade_spec(trained.spec, train_flags.config_out);
      for (const auto& [id, report] : trained.reports) {
        out << id << ": mse " << trained.initial_mse.at(id) << " -> " << report.epoch_loss.back() << "\n";
      }
      out << "weights_written: " << train_flags.out_weights << "\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace dtd::cli
