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

// Object-based evaluation of a predicted label map against instance ground
// truth.
//
// Each ground-truth object is reconstructed by greedily unioning the predicted
// segments that overlap it, whole, for as long as the union's IoU with the
// object strictly improves. Detection, mean IoU, fragmentation and boundary
// quality are all read off that reconstruction; ASA scores the map as a
// substrate for per-segment classification.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "rsseg/core.hpp"
#include "rsseg/labelmap.hpp"
#include "rsseg/morphology.hpp"
#include "rsseg/rle.hpp"

namespace rsseg {

using ClassId = std::uint32_t;

struct GroundTruth {
  LabelMap instances;
  std::map<Label, ClassId> class_of;
  std::map<ClassId, std::string> class_names;

  /// Reads the sidecar {"classes": {"<gt id>": "<class name>", ...}}. Class ids
  /// are assigned 1.. in sorted name order.
  static GroundTruth with_sidecar(LabelMap instances, const nlohmann::json& sidecar) {
    GroundTruth gt;
    gt.instances = std::move(instances);
    if (!sidecar.is_object() || !sidecar.contains("classes") || !sidecar["classes"].is_object()) {
      throw FormatError("ground-truth sidecar must contain a \"classes\" object");
    }
    std::map<std::string, ClassId> ids;
    for (const auto& [key, name] : sidecar["classes"].items()) {
      if (!name.is_string()) throw FormatError("class name for gt id " + key + " is not a string");
      ids.emplace(name.get<std::string>(), 0);
    }
    ClassId next = 1;
    for (auto& [name, id] : ids) {
      id = next++;
      gt.class_names[id] = name;
    }
    for (const auto& [key, name] : sidecar["classes"].items()) {
      std::size_t used = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(key, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != key.size() || v == 0 || v > 0xffffffffUL) {
        throw FormatError("invalid gt id '" + key + "' in sidecar");
      }
      gt.class_of[static_cast<Label>(v)] = ids.at(name.get<std::string>());
    }
    return gt;
  }

  nlohmann::ordered_json sidecar() const {
    nlohmann::ordered_json classes = nlohmann::ordered_json::object();
    for (const auto& [id, c] : class_of) classes[std::to_string(id)] = class_names.at(c);
    return {{"classes", classes}};
  }
};

/// Pixel counts of every (pred, gt) label pair, plus per-label areas and
/// bounding boxes, from one scan of both maps.
struct Contingency {
  std::unordered_map<std::uint64_t, std::uint64_t> joint;  // key = pred << 32 | gt
  std::unordered_map<Label, std::uint64_t> pred_area;
  std::unordered_map<Label, std::uint64_t> gt_area;
  std::unordered_map<Label, BBox> pred_box;
  std::unordered_map<Label, BBox> gt_box;
  std::uint64_t total = 0;

  static std::uint64_t key(Label pred, Label gt) { return std::uint64_t{pred} << 32 | gt; }
};

inline Contingency contingency(const LabelMap& pred, const LabelMap& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw std::invalid_argument("evaluation: prediction and ground truth dimensions differ");
  }
  Contingency c;
  c.total = pred.size();
  const auto p = pred.labels();
  const auto g = gt.labels();
  const std::uint32_t w = pred.width();
  auto grow = [](std::unordered_map<Label, BBox>& boxes, Label l, std::uint32_t x0, std::uint32_t x1,
                 std::uint32_t y) {
    auto [it, inserted] = boxes.try_emplace(l, BBox{x0, y, x1, y});
    if (!inserted) it->second.extend(BBox{x0, y, x1, y});
  };
  for (std::uint32_t y = 0; y < pred.height(); ++y) {
    const std::size_t row = std::size_t{y} * w;
    std::uint32_t x = 0;
    while (x < w) {
      const Label pl = p[row + x];
      const Label gl = g[row + x];
      std::uint32_t end = x + 1;
      while (end < w && p[row + end] == pl && g[row + end] == gl) ++end;
      const std::uint64_t n = end - x;
      c.joint[Contingency::key(pl, gl)] += n;
      if (pl != kUnlabeled) {
        c.pred_area[pl] += n;
        grow(c.pred_box, pl, x, end - 1, y);
      }
      if (gl != kUnlabeled) {
        c.gt_area[gl] += n;
        grow(c.gt_box, gl, x, end - 1, y);
      }
      x = end;
    }
  }
  return c;
}

/// Achievable segmentation accuracy. Every predicted segment takes the class
/// holding most of its pixels (gt label 0 is a null class 0; ties go to the
/// lowest class id); unlabeled predicted pixels are always wrong.
inline double asa(const Contingency& c, const GroundTruth& gt) {
  if (c.total == 0) return 0.0;
  std::map<Label, std::map<ClassId, std::uint64_t>> votes;
  for (const auto& [key, n] : c.joint) {
    const auto pl = static_cast<Label>(key >> 32);
    const auto gl = static_cast<Label>(key & 0xffffffffu);
    if (pl == kUnlabeled) continue;
    ClassId cls = 0;
    if (gl != kUnlabeled) {
      const auto it = gt.class_of.find(gl);
      if (it == gt.class_of.end()) throw FormatError("gt id " + std::to_string(gl) + " has no class");
      cls = it->second;
    }
    votes[pl][cls] += n;
  }
  std::uint64_t correct = 0;
  for (const auto& [pl, by_class] : votes) {
    std::uint64_t best = 0;
    for (const auto& [cls, n] : by_class) best = std::max(best, n);
    correct += best;
  }
  return static_cast<double>(correct) / static_cast<double>(c.total);
}

inline double asa(const LabelMap& pred, const GroundTruth& gt) {
  return asa(contingency(pred, gt.instances), gt);
}

/// A predicted segment overlapping an object.
struct OracleCandidate {
  Label segment = 0;
  std::uint64_t intersection = 0;  // pixels shared with the object
  std::uint64_t area = 0;          // whole segment
};

struct OracleResult {
  double oracle_iou = 0.0;
  double single_best_iou = 0.0;
  std::vector<Label> segments;  // chosen, in selection order
};

/// Greedy reconstruction from overlap counts. Segments are disjoint, so the
/// union's IoU is sum(intersection) / (object + sum(area) - sum(intersection)).
inline OracleResult greedy_oracle(std::vector<OracleCandidate> candidates, std::uint64_t object_area) {
  if (object_area == 0) throw std::invalid_argument("greedy_oracle: empty object");
  std::sort(candidates.begin(), candidates.end(),
            [](const OracleCandidate& a, const OracleCandidate& b) { return a.segment < b.segment; });
  OracleResult r;
  const auto iou = [&](std::uint64_t inter, std::uint64_t area) {
    return static_cast<double>(inter) / static_cast<double>(object_area + area - inter);
  };
  for (const OracleCandidate& c : candidates) r.single_best_iou = std::max(r.single_best_iou, iou(c.intersection, c.area));
  std::vector<bool> used(candidates.size(), false);
  std::uint64_t inter = 0;
  std::uint64_t area = 0;
  for (;;) {
    std::size_t pick = candidates.size();
    double best = r.oracle_iou;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (used[i]) continue;
      const double v = iou(inter + candidates[i].intersection, area + candidates[i].area);
      if (v > best) {
        best = v;
        pick = i;
      }
    }
    if (pick == candidates.size()) break;
    used[pick] = true;
    inter += candidates[pick].intersection;
    area += candidates[pick].area;
    r.oracle_iou = best;
    r.segments.push_back(candidates[pick].segment);
  }
  return r;
}

/// Greedy reconstruction of one object given as a mask over `pred`.
inline OracleResult greedy_oracle(const LabelMap& pred, const BinaryMask& object) {
  if (object.width() != pred.width() || object.height() != pred.height()) {
    throw std::invalid_argument("greedy_oracle: object mask does not match the prediction");
  }
  std::unordered_map<Label, std::uint64_t> inter;
  const auto p = pred.labels();
  object.for_each_run([&](std::uint64_t start, std::uint64_t len) {
    for (std::uint64_t i = start; i < start + len; ++i) {
      if (p[i] != kUnlabeled) ++inter[p[i]];
    }
  });
  std::unordered_map<Label, std::uint64_t> area;
  for (Label l : p) {
    if (l != kUnlabeled && inter.contains(l)) ++area[l];
  }
  std::vector<OracleCandidate> cands;
  for (const auto& [l, n] : inter) cands.push_back({l, n, area[l]});
  return greedy_oracle(std::move(cands), object.area());
}

/// Foreground pixels within Chebyshev distance d of the mask's boundary, where
/// a boundary pixel is a foreground pixel 4-adjacent to background or to the
/// image edge.
inline std::vector<std::uint8_t> boundary_band(const std::vector<std::uint8_t>& fg, std::uint32_t w,
                                               std::uint32_t h, std::uint32_t d) {
  std::vector<std::uint8_t> edge(fg.size(), 0);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      const std::size_t i = std::size_t{y} * w + x;
      if (!fg[i]) continue;
      edge[i] = x == 0 || y == 0 || x + 1 == w || y + 1 == h || !fg[i - 1] || !fg[i + 1] ||
                !fg[i - w] || !fg[i + w];
    }
  }
  auto band = morph_square(edge, w, h, d, true);
  for (std::size_t i = 0; i < band.size(); ++i) band[i] &= fg[i];
  return band;
}

inline double biou_dense(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b,
                         std::uint32_t w, std::uint32_t h, std::uint32_t d) {
  const auto ba = boundary_band(a, w, h, d);
  const auto bb = boundary_band(b, w, h, d);
  std::uint64_t inter = 0;
  std::uint64_t uni = 0;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    inter += ba[i] & bb[i];
    uni += ba[i] | bb[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Boundary IoU with band width d.
inline double biou(const BinaryMask& a, const BinaryMask& b, std::uint32_t d = 3) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw std::invalid_argument("biou: mask dimensions differ");
  }
  if (d < 1) throw std::invalid_argument("biou: d must be >= 1");
  return biou_dense(a.to_dense(), b.to_dense(), a.width(), a.height(), d);
}

struct ObjectRecord {
  Label gt_id = 0;
  ClassId class_id = 0;
  std::uint64_t area = 0;
  double oracle_iou = 0.0;
  double single_best_iou = 0.0;
  std::size_t segments_used = 0;
  double biou = 0.0;
};

struct ClassRow {
  std::size_t n = 0;
  double det05 = 0.0;
  double ss_det05 = 0.0;
  double miou = 0.0;
  double biou = 0.0;
  double n_bar = 0.0;
};

struct EvalReport {
  double coverage = 0.0;
  double asa = 0.0;
  std::map<ClassId, ClassRow> per_class;
  ClassRow global;
  std::vector<ObjectRecord> objects;
  std::map<ClassId, std::string> class_names;
};

namespace detail {

inline ClassRow summarize(const std::vector<const ObjectRecord*>& objs) {
  ClassRow row;
  row.n = objs.size();
  if (objs.empty()) return row;
  std::size_t det = 0;
  std::size_t ss = 0;
  std::size_t used = 0;
  double iou = 0.0;
  double b = 0.0;
  for (const ObjectRecord* o : objs) {
    if (o->oracle_iou >= 0.5) {
      ++det;
      used += o->segments_used;
    }
    ss += o->single_best_iou >= 0.5;
    iou += o->oracle_iou;
    b += o->biou;
  }
  const auto n = static_cast<double>(objs.size());
  row.det05 = static_cast<double>(det) / n;
  row.ss_det05 = static_cast<double>(ss) / n;
  row.miou = iou / n;
  row.biou = b / n;
  row.n_bar = det == 0 ? 0.0 : static_cast<double>(used) / static_cast<double>(det);
  return row;
}

}  // namespace detail

/// Full evaluation. Per-object BIoU compares the object with its greedy
/// reconstruction, inside the union of their bounding boxes grown by one pixel.
inline EvalReport evaluate(const LabelMap& pred, const GroundTruth& gt, std::uint32_t band = 3) {
  const Contingency c = contingency(pred, gt.instances);
  if (c.gt_area.empty()) throw std::invalid_argument("evaluate: ground truth has no objects");
  EvalReport rep;
  rep.coverage = coverage(pred);
  rep.asa = asa(c, gt);
  rep.class_names = gt.class_names;

  std::unordered_map<Label, std::vector<OracleCandidate>> cands;
  for (const auto& [key, n] : c.joint) {
    const auto pl = static_cast<Label>(key >> 32);
    const auto gl = static_cast<Label>(key & 0xffffffffu);
    if (pl == kUnlabeled || gl == kUnlabeled) continue;
    cands[gl].push_back({pl, n, c.pred_area.at(pl)});
  }

  std::vector<Label> ids;
  for (const auto& [gl, a] : c.gt_area) ids.push_back(gl);
  std::sort(ids.begin(), ids.end());
  const std::uint32_t W = pred.width();
  const std::uint32_t H = pred.height();
  for (Label gl : ids) {
    ObjectRecord o;
    o.gt_id = gl;
    const auto cls = gt.class_of.find(gl);
    if (cls == gt.class_of.end()) throw FormatError("gt id " + std::to_string(gl) + " has no class");
    o.class_id = cls->second;
    o.area = c.gt_area.at(gl);
    const auto it = cands.find(gl);
    OracleResult r = greedy_oracle(it == cands.end() ? std::vector<OracleCandidate>{} : it->second, o.area);
    o.oracle_iou = r.oracle_iou;
    o.single_best_iou = r.single_best_iou;
    o.segments_used = r.segments.size();

    BBox box = c.gt_box.at(gl);
    for (Label s : r.segments) box.extend(c.pred_box.at(s));
    const std::uint32_t x0 = box.x0 > 0 ? box.x0 - 1 : 0;
    const std::uint32_t y0 = box.y0 > 0 ? box.y0 - 1 : 0;
    const std::uint32_t x1 = std::min(box.x1 + 1, W - 1);
    const std::uint32_t y1 = std::min(box.y1 + 1, H - 1);
    const std::uint32_t ww = x1 - x0 + 1;
    const std::uint32_t wh = y1 - y0 + 1;
    // Edges of the crop that are not image edges have a background margin, so
    // the boundary definition is unaffected by cropping.
    std::vector<std::uint8_t> om(std::size_t{ww} * wh, 0);
    std::vector<std::uint8_t> rm(om.size(), 0);
    const std::unordered_set<Label> chosen(r.segments.begin(), r.segments.end());
    for (std::uint32_t y = 0; y < wh; ++y) {
      for (std::uint32_t x = 0; x < ww; ++x) {
        const std::size_t src = std::size_t{y0 + y} * W + x0 + x;
        om[std::size_t{y} * ww + x] = gt.instances[src] == gl;
        rm[std::size_t{y} * ww + x] = !chosen.empty() && chosen.contains(pred[src]);
      }
    }
    o.biou = biou_dense(om, rm, ww, wh, band);
    rep.objects.push_back(o);
  }

  std::map<ClassId, std::vector<const ObjectRecord*>> by_class;
  std::vector<const ObjectRecord*> all;
  for (const ObjectRecord& o : rep.objects) {
    by_class[o.class_id].push_back(&o);
    all.push_back(&o);
  }
  for (const auto& [cls, objs] : by_class) rep.per_class[cls] = detail::summarize(objs);
  rep.global = detail::summarize(all);
  return rep;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  auto row = [](const ClassRow& c) {
    return nlohmann::ordered_json{{"n", c.n},       {"det05", c.det05}, {"ss_det05", c.ss_det05},
                                  {"miou", c.miou}, {"biou", c.biou},   {"n_bar", c.n_bar}};
  };
  nlohmann::ordered_json j;
  j["coverage"] = r.coverage;
  j["asa"] = r.asa;
  auto classes = nlohmann::ordered_json::object();
  for (const auto& [cls, c] : r.per_class) {
    const auto name = r.class_names.find(cls);
    classes[name == r.class_names.end() ? std::to_string(cls) : name->second] = row(c);
  }
  j["classes"] = std::move(classes);
  j["global"] = row(r.global);
  auto objs = nlohmann::ordered_json::array();
  for (const ObjectRecord& o : r.objects) {
    objs.push_back({{"gt_id", o.gt_id},
                    {"class", o.class_id},
                    {"area", o.area},
                    {"oracle_iou", o.oracle_iou},
                    {"single_best_iou", o.single_best_iou},
                    {"segments_used", o.segments_used},
                    {"biou", o.biou}});
  }
  j["objects"] = std::move(objs);
  return j;
}

/// Aligned text table: one row per class plus "all".
inline std::string format_table(const EvalReport& r) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-14s %6s %8s %8s %7s %7s %7s %6s\n", "class", "n", "Det@0.5",
                "SS-Det", "mIoU", "BIoU", "ASA", "n_bar");
  out << buf;
  auto line = [&](const std::string& name, const ClassRow& c, const std::string& asa_col) {
    std::snprintf(buf, sizeof buf, "%-14s %6zu %8.3f %8.3f %7.3f %7.3f %7s %6.2f\n", name.c_str(), c.n,
                  c.det05, c.ss_det05, c.miou, c.biou, asa_col.c_str(), c.n_bar);
    out << buf;
  };
  for (const auto& [cls, c] : r.per_class) {
    const auto name = r.class_names.find(cls);
    line(name == r.class_names.end() ? std::to_string(cls) : name->second, c, "");
  }
  char asa_buf[16];
  std::snprintf(asa_buf, sizeof asa_buf, "%.3f", r.asa);
  line("all", r.global, asa_buf);
  std::snprintf(buf, sizeof buf, "coverage %.4f\n", r.coverage);
  out << buf;
  return out.str();
}

}  // namespace rsseg
