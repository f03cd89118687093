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
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtd/core.hpp"
#include "dtd/pipeline.hpp"

namespace dtd {

// Results are line-delimited JSON: one record per frame, then one summary
// record with aggregate timings and status counts. Ground-truth files use the
// same record schema minus timings, so one parser reads both.

inline nlohmann::json frame_result_to_json(const FrameResult& r, bool include_timings = true) {
  nlohmann::json j;
  j["frame_index"] = r.frame_index;
  j["status"] = to_string(r.status);
  if (r.box) {
    j["box"] = {{"x", r.box->x}, {"y", r.box->y}, {"w", r.box->w}, {"h", r.box->h}};
  } else {
    j["box"] = nullptr;
  }
  if (r.landmarks) {
    nlohmann::json lm = nlohmann::json::array();
    for (int i = 0; i < kNumLandmarks; ++i) lm.push_back({(*r.landmarks)[i].x, (*r.landmarks)[i].y});
    j["landmarks"] = lm;
  } else {
    j["landmarks"] = nullptr;
  }
  j["points_kept"] = r.points_kept;
  if (include_timings) {
    j["timings"] = {{"track", r.timings.track},
                    {"box_estimate", r.timings.box_estimate},
                    {"local_detect", r.timings.local_detect},
                    {"global_detect", r.timings.global_detect},
                    {"landmark_net", r.timings.landmark_net},
                    {"total", r.timings.total}};
  }
  return j;
}

inline FrameResult frame_result_from_json(const nlohmann::json& j) {
  FrameResult r;
  try {
    r.frame_index = j.at("frame_index").get<int>();
    const auto status = frame_status_from_string(j.at("status").get<std::string>());
    if (!status) throw IoError("unknown status in record");
    r.status = *status;
    if (j.contains("box") && !j.at("box").is_null()) {
      const auto& b = j.at("box");
      r.box = BoundingBox{b.at("x").get<double>(), b.at("y").get<double>(), b.at("w").get<double>(),
                          b.at("h").get<double>()};
    }
    if (j.contains("landmarks") && !j.at("landmarks").is_null()) {
      const auto& lm = j.at("landmarks");
      if (lm.size() != kNumLandmarks) throw IoError("landmark array must have 5 entries");
      LandmarkSet set;
      for (int i = 0; i < kNumLandmarks; ++i) {
        set[i] = {lm.at(static_cast<std::size_t>(i)).at(0).get<double>(),
                  lm.at(static_cast<std::size_t>(i)).at(1).get<double>()};
      }
      r.landmarks = set;
    }
    r.points_kept = j.value("points_kept", 0);
    if (j.contains("timings") && !j.at("timings").is_null()) {
      const auto& t = j.at("timings");
      r.timings.track = t.value("track", 0.0);
      r.timings.box_estimate = t.value("box_estimate", 0.0);
      r.timings.local_detect = t.value("local_detect", 0.0);
      r.timings.global_detect = t.value("global_detect", 0.0);
      r.timings.landmark_net = t.value("landmark_net", 0.0);
      r.timings.total = t.value("total", 0.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed frame record: ") + e.what());
  }
  return r;
}

struct TimingStat {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
};

inline TimingStat timing_stat(std::vector<double> values) {
  TimingStat s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  s.median = median_of(values);
  std::sort(values.begin(), values.end());
  const std::size_t idx = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(values.size()))) - 1;
  s.p95 = values[std::min(idx, values.size() - 1)];
  return s;
}

struct RunSummary {
  std::size_t frames = 0;
  std::map<std::string, std::size_t> status_counts;
  std::map<std::string, TimingStat> timing_stats;  // keyed by stage name
};

inline RunSummary summarize_results(const std::vector<FrameResult>& results) {
  RunSummary summary;
  summary.frames = results.size();
  const char* stage_names[6] = {"track", "box_estimate", "local_detect", "global_detect", "landmark_net", "total"};
  std::vector<std::vector<double>> stage_values(6);
  for (const FrameResult& r : results) {
    summary.status_counts[to_string(r.status)] += 1;
    stage_values[0].push_back(r.timings.track);
    stage_values[1].push_back(r.timings.box_estimate);
    stage_values[2].push_back(r.timings.local_detect);
    stage_values[3].push_back(r.timings.global_detect);
    stage_values[4].push_back(r.timings.landmark_net);
    stage_values[5].push_back(r.timings.total);
  }
  for (int i = 0; i < 6; ++i) {
    summary.timing_stats[stage_names[i]] = results.empty() ? TimingStat{} : timing_stat(stage_values[static_cast<std::size_t>(i)]);
  }
  return summary;
}

inline nlohmann::json summary_to_json(const RunSummary& summary) {
  nlohmann::json j;
  j["summary"]["frames"] = summary.frames;
  j["summary"]["status_counts"] = summary.status_counts;
  for (const auto& [stage, stat] : summary.timing_stats) {
    j["summary"]["timings_ms"][stage] = {{"mean", stat.mean}, {"median", stat.median}, {"p95", stat.p95}};
  }
  return j;
}

inline void write_results(const std::vector<FrameResult>& results, const std::string& path,
                          bool include_timings = true) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const FrameResult& r : results) out << frame_result_to_json(r, include_timings).dump() << "\n";
  out << summary_to_json(summarize_results(results)).dump() << "\n";
  if (!out) throw IoError("write failed: " + path);
}

// Reads frame records; the summary line (and any record without a
// frame_index) is skipped.
inline std::vector<FrameResult> read_results(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UnreadableFileError("cannot open results file: " + path);
  std::vector<FrameResult> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("malformed results line: ") + e.what());
    }
    if (!j.contains("frame_index")) continue;
    out.push_back(frame_result_from_json(j));
  }
  return out;
}

// Ground-truth writer: the same record schema minus timings.
inline void write_ground_truth(const std::vector<FrameResult>& gt, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const FrameResult& r : gt) out << frame_result_to_json(r, false).dump() << "\n";
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Landmark error evaluation against ground truth
// ---------------------------------------------------------------------------

struct EvalStats {
  double mean_px = 0.0;
  double rms_px = 0.0;
  double rms_normalized = 0.0;  // per-frame error / gt face short side
  std::size_t frames_compared = 0;
  std::size_t landmarks_compared = 0;
};

inline EvalStats evaluate_landmarks(const std::vector<FrameResult>& results,
                                    const std::vector<FrameResult>& ground_truth) {
  std::map<int, const FrameResult*> gt_by_frame;
  for (const FrameResult& g : ground_truth) gt_by_frame[g.frame_index] = &g;
  EvalStats stats;
  double sum = 0.0, sum_sq = 0.0, sum_norm_sq = 0.0;
  for (const FrameResult& r : results) {
    if (!r.landmarks) continue;
    auto it = gt_by_frame.find(r.frame_index);
    if (it == gt_by_frame.end() || !it->second->landmarks) continue;
    const LandmarkSet& got = *r.landmarks;
    const LandmarkSet& want = *it->second->landmarks;
    const double short_side = it->second->box ? it->second->box->short_side() : 0.0;
    stats.frames_compared += 1;
    for (int i = 0; i < kNumLandmarks; ++i) {
      const double d = distance(got[i], want[i]);
      sum += d;
      sum_sq += d * d;
      if (short_side > 0.0) sum_norm_sq += (d / short_side) * (d / short_side);
      stats.landmarks_compared += 1;
    }
  }
  if (stats.landmarks_compared > 0) {
    const double n = static_cast<double>(stats.landmarks_compared);
    stats.mean_px = sum / n;
    stats.rms_px = std::sqrt(sum_sq / n);
    stats.rms_normalized = std::sqrt(sum_norm_sq / n);
  }
  return stats;
}

}  // namespace dtd
