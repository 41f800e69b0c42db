// Copyright 2026 The rsseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Per-tile multi-pass segmentation.
//
// Each pass paints the already-labeled pixels black, prompts the backend with
// the residual points of a k x k grid, splits every returned mask into
// connected components and assigns the components that are large enough and
// mostly unclaimed. The acceptance thresholds start strict and drop by a fixed
// step only when a pass stops making progress.

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rsseg/backend.hpp"
#include "rsseg/core.hpp"
#include "rsseg/labelmap.hpp"

namespace rsseg {

struct PassConfig {
  std::uint32_t points_per_side = 64;
  double tau_start = 0.93;
  double tau_end = 0.60;
  double step = 0.01;
  double stagnation_pp = 0.1;  // minimum coverage gain, in percentage points
  double target_coverage = 0.99;
  double overlap_reject = 0.5;
  std::uint64_t min_area = 100;
  std::uint32_t max_passes = 500;

  void validate() const {
    if (points_per_side < 1) throw std::invalid_argument("points_per_side must be >= 1");
    if (!(tau_start >= 0.0 && tau_start <= 1.0 && tau_end >= 0.0 && tau_end <= tau_start)) {
      throw std::invalid_argument("thresholds must satisfy 0 <= tau_end <= tau_start <= 1");
    }
    if (!(step > 0.0)) throw std::invalid_argument("step must be > 0");
    if (!(stagnation_pp >= 0.0)) throw std::invalid_argument("stagnation must be >= 0");
    if (!(target_coverage > 0.0 && target_coverage <= 1.0)) {
      throw std::invalid_argument("target_coverage must lie in (0, 1]");
    }
    if (!(overlap_reject >= 0.0 && overlap_reject <= 1.0)) {
      throw std::invalid_argument("overlap_reject must lie in [0, 1]");
    }
    if (max_passes < 1) throw std::invalid_argument("max_passes must be >= 1");
  }

  /// Minimum gain as a coverage fraction.
  double epsilon() const { return stagnation_pp / 100.0; }
};

/// Threshold schedule in integer millionths, so that repeated decay lands on
/// exact values (0.93 - 18 * 0.01 is exactly 0.75).
class TauSchedule {
 public:
  explicit TauSchedule(const PassConfig& cfg)
      : start_(std::llround(cfg.tau_start * 1e6)),
        end_(std::llround(cfg.tau_end * 1e6)),
        step_(std::llround(cfg.step * 1e6)) {
    if (step_ <= 0) throw std::invalid_argument("step must be at least 1e-6");
  }

  double tau(std::uint32_t decays) const { return static_cast<double>(micro(decays)) / 1e6; }
  bool exhausted(std::uint32_t decays) const { return micro(decays) < end_; }

 private:
  long long micro(std::uint32_t decays) const { return start_ - static_cast<long long>(decays) * step_; }

  long long start_;
  long long end_;
  long long step_;
};

enum class ExitReason { target_coverage, tau_exhausted, max_passes };

inline const char* to_string(ExitReason r) {
  switch (r) {
    case ExitReason::target_coverage: return "target_coverage";
    case ExitReason::tau_exhausted: return "tau_exhausted";
    case ExitReason::max_passes: return "max_passes";
  }
  return "unknown";
}

struct PassRecord {
  std::uint32_t pass = 0;  // 1-based
  double tau_iou = 0.0;
  double tau_stab = 0.0;
  std::size_t points = 0;
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  double coverage = 0.0;
  double gain = 0.0;
  Label first_label = 1;  // labels assigned in this pass: [first_label, end_label)
  Label end_label = 1;
  bool decayed = false;  // thresholds drop before the next pass
  double wall_ms = 0.0;
};

struct PassTrace {
  std::vector<PassRecord> passes;
  ExitReason exit = ExitReason::max_passes;
};

/// Thrown when a backend call fails mid-tile; carries the passes completed.
class TileError : public BackendError {
 public:
  TileError(const std::string& what, PassTrace trace)
      : BackendError(what), trace_(std::move(trace)) {}
  const PassTrace& trace() const { return trace_; }

 private:
  PassTrace trace_;
};

inline nlohmann::ordered_json to_json(const PassRecord& r) {
  nlohmann::ordered_json j;
  j["pass"] = r.pass;
  j["tau_iou"] = r.tau_iou;
  j["tau_stab"] = r.tau_stab;
  j["points"] = r.points;
  j["proposals"] = r.proposals;
  j["accepted"] = r.accepted;
  j["coverage"] = r.coverage;
  j["gain"] = r.gain;
  j["decayed"] = r.decayed;
  j["wall_ms"] = r.wall_ms;
  return j;
}

/// One JSON object per pass, one per line. `tile` is added to each line when
/// non-negative.
inline void write_trace_jsonl(std::ostream& out, const PassTrace& trace, long tile = -1) {
  for (const PassRecord& r : trace.passes) {
    nlohmann::ordered_json j;
    if (tile >= 0) j["tile"] = tile;
    const nlohmann::ordered_json rec = to_json(r);
    for (auto it = rec.begin(); it != rec.end(); ++it) j[it.key()] = *it;
    out << j.dump() << '\n';
  }
}

/// Residual prompts: the k x k grid of cell centers minus points on labeled
/// pixels.
inline std::vector<Point> dense_grid(std::uint32_t k, const LabelMap& map) {
  if (k < 1) throw std::invalid_argument("dense_grid: k must be >= 1");
  const std::uint64_t w = map.width();
  const std::uint64_t h = map.height();
  std::vector<Point> out;
  out.reserve(std::size_t{k} * k);
  for (std::uint64_t i = 0; i < k; ++i) {
    const auto y = static_cast<std::uint32_t>((2 * i + 1) * h / (2 * std::uint64_t{k}));
    for (std::uint64_t j = 0; j < k; ++j) {
      const auto x = static_cast<std::uint32_t>((2 * j + 1) * w / (2 * std::uint64_t{k}));
      if (map.at(x, y) == kUnlabeled) out.push_back({x, y});
    }
  }
  return out;
}

/// Splits a proposal into 8-connected components and keeps those with
/// area >= min_area whose labeled share is at most overlap_reject.
inline std::vector<Component> filter_components(const BinaryMask& proposal, const LabelMap& map,
                                                const PassConfig& cfg) {
  if (proposal.width() != map.width() || proposal.height() != map.height()) {
    throw std::out_of_range("filter_components: proposal does not match map bounds");
  }
  std::vector<Component> kept;
  const auto labels = map.labels();
  for (Component& c : connected_components(proposal)) {
    if (c.area < cfg.min_area) continue;
    std::uint64_t overlap = 0;
    c.mask.for_each_run([&](std::uint64_t start, std::uint64_t len) {
      for (std::uint64_t i = start; i < start + len; ++i) overlap += labels[i] != kUnlabeled;
    });
    if (static_cast<double>(overlap) <= cfg.overlap_reject * static_cast<double>(c.area)) {
      kept.push_back(std::move(c));
    }
  }
  return kept;
}

struct PassOutcome {
  std::size_t points = 0;
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  std::uint64_t assigned = 0;  // newly labeled pixels
  double gain = 0.0;
};

/// One pass at threshold `tau`. Components are filtered and assigned in
/// proposal order, each against the map as updated by the ones before it.
/// If the backend call fails the map is untouched.
inline PassOutcome run_pass(const RgbImage& image, LabelMap& map, double tau, const PassConfig& cfg,
                            ProposalSession& session) {
  if (image.width() != map.width() || image.height() != map.height()) {
    throw std::invalid_argument("run_pass: image and map dimensions differ");
  }
  PassOutcome out;
  ProposalRequest request;
  request.points = dense_grid(cfg.points_per_side, map);
  out.points = request.points.size();
  if (request.points.empty()) return out;
  request.tile = paint_black(image, map);
  request.tau_iou = tau;
  request.tau_stab = tau;

  const std::vector<MaskProposal> proposals = session.generate(request);
  check_proposals(request, proposals);
  out.proposals = proposals.size();

  for (const MaskProposal& p : proposals) {
    for (const Component& c : filter_components(p.mask, map, cfg)) {
      const std::uint64_t n = assign_component(map, c);
      if (n > 0) {
        out.assigned += n;
        ++out.accepted;
      }
    }
  }
  out.gain = static_cast<double>(out.assigned) / static_cast<double>(map.size());
  return out;
}

struct TileSegmentation {
  LabelMap map;
  PassTrace trace;
};

/// Runs passes until the coverage target is met, the thresholds decay below
/// tau_end, or max_passes is reached.
inline TileSegmentation segment_tile(const RgbImage& image, const PassConfig& cfg,
                                     ProposalSession& session) {
  cfg.validate();
  const TauSchedule schedule(cfg);
  TileSegmentation result{LabelMap(image.width(), image.height()), {}};
  LabelMap& map = result.map;
  PassTrace& trace = result.trace;
  const double eps = cfg.epsilon();
  std::uint64_t labeled = 0;
  std::uint32_t decays = 0;

  for (std::uint32_t pass = 1; pass <= cfg.max_passes; ++pass) {
    PassRecord rec;
    rec.pass = pass;
    rec.tau_iou = rec.tau_stab = schedule.tau(decays);
    rec.first_label = map.next_label();
    const auto t0 = std::chrono::steady_clock::now();
    PassOutcome o;
    try {
      o = run_pass(image, map, rec.tau_iou, cfg, session);
    } catch (const std::exception& e) {
      throw TileError(std::string("pass ") + std::to_string(pass) + ": " + e.what(), trace);
    }
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    rec.points = o.points;
    rec.proposals = o.proposals;
    rec.accepted = o.accepted;
    rec.gain = o.gain;
    labeled += o.assigned;
    rec.coverage = static_cast<double>(labeled) / static_cast<double>(map.size());
    rec.end_label = map.next_label();

    if (rec.coverage >= cfg.target_coverage) {
      trace.passes.push_back(rec);
      trace.exit = ExitReason::target_coverage;
      return result;
    }
    if (rec.gain < eps) {
      rec.decayed = true;
      ++decays;
    }
    trace.passes.push_back(rec);
    if (rec.decayed && schedule.exhausted(decays)) {
      trace.exit = ExitReason::tau_exhausted;
      return result;
    }
  }
  trace.exit = ExitReason::max_passes;
  return result;
}

}  // namespace rsseg
