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

// rsseg: segment, merge, eval, synth, render.
//
// Exit codes: 0 success, 2 usage or input error, 3 backend or protocol error.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "png_io.hpp"
#include "rsseg/rsseg.hpp"

namespace fs = std::filesystem;
using namespace rsseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitBackend = 3;

// Config keys that can also be given as --flags (underscores become dashes).
struct Overrides {
  std::map<std::string, std::string> values;

  void add_to(CLI::App& app, const std::vector<std::string>& keys) {
    for (const std::string& key : keys) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      app.add_option_function<std::string>(
          flag, [this, key](const std::string& v) { values[key] = v; }, "config override: " + key);
    }
  }
};

PipelineConfig effective_config(const std::string& config_path, const Overrides& o) {
  PipelineConfig cfg;
  if (!config_path.empty()) load_config_file(cfg, config_path);
  for (const auto& [k, v] : o.values) {
    try {
      apply_setting(cfg, k, v);
    } catch (const FormatError& e) {
      throw FormatError(std::string("command line: ") + e.what());
    }
  }
  return cfg;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

bool has_suffix(const std::string& path, const std::string& ext) {
  std::string e = fs::path(path).extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e == ext;
}

std::string stem_of(const std::string& path) {
  const fs::path p(path);
  return (p.parent_path() / p.stem()).string();
}

QualityRange parse_quality(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw FormatError("quality range must be LO,HI");
  try {
    return {std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw FormatError("quality range must be LO,HI");
  }
}

// --- segment -----------------------------------------------------------------

struct SegmentArgs {
  std::string input;
  std::string output;
  std::string backend;
  std::string config;
  std::string trace;
  std::string merge_report;
  std::optional<std::uint32_t> synth_objects;
  std::string synth_quality = "0.62,0.98";
  Overrides overrides;
};

struct Backend {
  std::unique_ptr<ProposalBackend> backend;
  std::shared_ptr<const SceneModel> scene;  // synthetic only
};

Backend make_backend(const SegmentArgs& a, std::uint32_t width, std::uint32_t height) {
  Backend b;
  if (a.backend.starts_with("synthetic:")) {
    const std::string arg = a.backend.substr(10);
    SceneParams params;
    if (has_suffix(arg, ".json")) {
      params = scene_params_from_json(read_json_file(arg));
    } else {
      try {
        std::size_t used = 0;
        params.seed = std::stoull(arg, &used);
        if (used != arg.size()) throw std::invalid_argument(arg);
      } catch (const std::exception&) {
        throw FormatError("backend synthetic:<seed|scene.json>: cannot parse '" + arg + "'");
      }
      if (width == 0) throw FormatError("synthetic:<seed> needs --input to fix the scene size");
      params.width = width;
      params.height = height;
      params.quality = parse_quality(a.synth_quality);
      params.n_objects = a.synth_objects.value_or(std::max<std::uint32_t>(
          1, static_cast<std::uint32_t>(std::lround(60.0 * width * height / (2048.0 * 2048.0)))));
    }
    b.scene = params.build();
    b.backend = std::make_unique<SyntheticBackend>(b.scene);
  } else if (a.backend.starts_with("worker:")) {
    b.backend = WireBackend::from_address(a.backend.substr(7));
  } else {
    throw FormatError("backend must be synthetic:<seed|scene.json> or worker:<command|tcp://host:port>");
  }
  return b;
}

int cmd_segment(const SegmentArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const PipelineConfig cfg = effective_config(a.config, a.overrides);

  std::unique_ptr<RasterSource> source;
  RgbImage png;
  if (!a.input.empty()) {
    if (has_suffix(a.input, ".png")) {
      png = tools::read_png(a.input);
      source = std::make_unique<MemorySource>(png);
    } else {
      source = std::make_unique<RrgbSource>(a.input);
    }
  }
  Backend backend = make_backend(a, source ? source->width() : 0, source ? source->height() : 0);
  if (!source) {
    if (!backend.scene) throw FormatError("--input is required with a worker backend");
    source = std::make_unique<SceneSource>(backend.scene);
  } else if (backend.scene && (backend.scene->width() != source->width() ||
                               backend.scene->height() != source->height())) {
    throw FormatError("input raster and synthetic scene differ in size");
  }

  const std::string trace_path = a.trace.empty() ? stem_of(a.output) + ".trace.jsonl" : a.trace;
  const std::string merge_path = a.merge_report.empty() ? stem_of(a.output) + ".merge.json" : a.merge_report;

  SegmentResult res = segment_raster(
      *source, *backend.backend, cfg, [](const TileOutcome& t, std::size_t done, std::size_t total) {
        const double cov = t.trace.passes.empty() ? 0.0 : t.trace.passes.back().coverage;
        std::fprintf(stderr, "tile %zu/%zu index=%u passes=%zu coverage=%.4f exit=%s\n", done, total,
                     t.spec.index, t.trace.passes.size(), cov, to_string(t.trace.exit));
      });

  save_rslm(a.output, res.map);
  {
    std::ofstream trace(trace_path, std::ios::trunc);
    if (!trace) throw std::runtime_error("cannot open " + trace_path + " for writing");
    for (const TileOutcome& t : res.tiles) write_trace_jsonl(trace, t.trace, t.spec.index);
  }
  write_text(merge_path, to_json(res.merge).dump(2) + "\n");

  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::ordered_json summary;
  summary["segments"] = res.merge.segments_final;
  summary["coverage"] = coverage(res.map);
  summary["wall_s"] = wall;
  summary["tiles"] = res.plan.tiles.size();
  summary["backend"] = a.backend;
  summary["config"] = to_json(cfg);
  std::cout << summary.dump() << std::endl;
  return kExitOk;
}

// --- merge -------------------------------------------------------------------

struct MergeArgs {
  std::string input;
  std::string output;
  std::string config;
  std::string report;
  Overrides overrides;
};

int cmd_merge(const MergeArgs& a) {
  const PipelineConfig cfg = effective_config(a.config, a.overrides);
  LabelMap map = load_rslm(a.input);
  const TilePlan plan = plan_tiles(map.width(), map.height(), cfg.tile_size, cfg.padding);
  const MergeReport rep = merge_tiles(map, plan, cfg.merge);
  save_rslm(a.output, map);
  const std::string report_path = a.report.empty() ? stem_of(a.output) + ".merge.json" : a.report;
  write_text(report_path, to_json(rep).dump(2) + "\n");
  nlohmann::ordered_json summary;
  summary["segments"] = rep.segments_final;
  summary["merges"] = rep.merges;
  summary["coverage"] = rep.coverage_final;
  summary["config"] = to_json(cfg);
  std::cout << summary.dump() << std::endl;
  return kExitOk;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string classes;
  std::string json;
  std::uint32_t band = 3;
};

int cmd_eval(const EvalArgs& a) {
  const LabelMap pred = load_rslm(a.pred);
  LabelMap inst = load_rslm(a.gt);
  if (pred.width() != inst.width() || pred.height() != inst.height()) {
    throw FormatError("prediction is " + std::to_string(pred.width()) + "x" + std::to_string(pred.height()) +
                      " but ground truth is " + std::to_string(inst.width()) + "x" +
                      std::to_string(inst.height()));
  }
  const GroundTruth gt = GroundTruth::with_sidecar(std::move(inst), read_json_file(a.classes));
  const EvalReport rep = evaluate(pred, gt, a.band);
  if (!a.json.empty()) write_text(a.json, to_json(rep).dump(2) + "\n");
  std::cout << format_table(rep);
  return kExitOk;
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
  SceneParams params;
  std::string quality = "0.62,0.98";
  std::string out_dir;
  bool png = false;
};

int cmd_synth(SynthArgs a) {
  a.params.quality = parse_quality(a.quality);
  const auto model = a.params.build();
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);

  RrgbWriter writer((dir / "image.rrgb").string(), model->width(), model->height());
  constexpr std::uint32_t kBlock = 256;
  for (std::uint32_t y = 0; y < model->height(); y += kBlock) {
    const Rect band{0, y, model->width(), std::min(kBlock, model->height() - y)};
    RgbImage rows;
    model->render(band, &rows, nullptr);
    writer.append_rows(rows);
  }
  writer.close();

  LabelMap gt;
  model->render({0, 0, model->width(), model->height()}, nullptr, &gt);
  save_rslm((dir / "gt.rslm").string(), gt);

  nlohmann::ordered_json classes = nlohmann::ordered_json::object();
  std::map<std::string, std::size_t> per_class;
  for (Label l = 1; l <= model->label_count(); ++l) {
    classes[std::to_string(l)] = class_name(model->class_of(l));
    ++per_class[class_name(model->class_of(l))];
  }
  write_text((dir / "classes.json").string(), nlohmann::ordered_json{{"classes", classes}}.dump(2) + "\n");

  nlohmann::ordered_json scene = to_json(a.params);
  nlohmann::ordered_json stats;
  stats["labels"] = model->label_count();
  stats["stuff_regions"] = model->stuff_count();
  stats["objects"] = model->objects().size();
  stats["per_class"] = per_class;
  stats["gt_coverage"] = coverage(gt);
  scene["stats"] = stats;
  write_text((dir / "scene.json").string(), scene.dump(2) + "\n");

  if (a.png) {
    RgbImage image;
    model->render({0, 0, model->width(), model->height()}, &image, nullptr);
    tools::write_png((dir / "image.png").string(), image);
  }
  std::cout << scene.dump() << std::endl;
  return kExitOk;
}

// --- render ------------------------------------------------------------------

struct RenderArgs {
  std::string input;
  std::string output;
  std::uint64_t seed = kDefaultPaletteSeed;
};

int cmd_render(const RenderArgs& a) {
  tools::write_png(a.output, render_labels(load_rslm(a.input), a.seed));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiled multi-pass segmentation of large rasters"};
  app.require_subcommand(1);

  SegmentArgs seg;
  CLI::App* segment = app.add_subcommand("segment", "segment a raster");
  segment->add_option("--input,-i", seg.input, "RRGB or PNG raster (optional with a synthetic scene)");
  segment->add_option("--out,-o", seg.output, "output RSLM label map")->required();
  segment->add_option("--backend,-b", seg.backend, "synthetic:<seed|scene.json> or worker:<command|tcp://host:port>")
      ->required();
  segment->add_option("--config,-c", seg.config, "key = value config file");
  segment->add_option("--trace", seg.trace, "pass trace JSONL (default <out>.trace.jsonl)");
  segment->add_option("--merge-report", seg.merge_report, "merge report JSON (default <out>.merge.json)");
  segment->add_option("--synth-objects", seg.synth_objects, "objects for synthetic:<seed>");
  segment->add_option("--synth-quality", seg.synth_quality, "quality range LO,HI for synthetic:<seed>");
  seg.overrides.add_to(*segment, config_keys());
  segment->add_option_function<std::string>(
      "--merge", [&seg](const std::string& v) { seg.overrides.values["strategy"] = v; },
      "merge strategy (alias of --strategy)");

  MergeArgs mrg;
  CLI::App* merge = app.add_subcommand("merge", "merge tile labels of an unmerged map");
  merge->add_option("--input,-i", mrg.input, "RSLM with per-tile labels")->required();
  merge->add_option("--out,-o", mrg.output, "output RSLM")->required();
  merge->add_option("--config,-c", mrg.config, "key = value config file");
  merge->add_option("--report", mrg.report, "merge report JSON (default <out>.merge.json)");
  mrg.overrides.add_to(*merge, {"tile_size", "padding", "strategy", "min_mask_area", "merge_enclosed_max"});

  EvalArgs ev;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a label map against ground truth");
  eval->add_option("--pred,-p", ev.pred, "predicted RSLM")->required();
  eval->add_option("--gt,-g", ev.gt, "ground-truth instance RSLM")->required();
  eval->add_option("--classes", ev.classes, "class sidecar JSON")->required();
  eval->add_option("--json", ev.json, "write the full report as JSON");
  eval->add_option("--band", ev.band, "boundary band width in pixels")->check(CLI::PositiveNumber);

  SynthArgs syn;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene");
  synth->add_option("--seed", syn.params.seed, "RNG seed");
  synth->add_option("--width", syn.params.width, "width in pixels")->check(CLI::PositiveNumber);
  synth->add_option("--height", syn.params.height, "height in pixels")->check(CLI::PositiveNumber);
  synth->add_option("--objects", syn.params.n_objects, "number of discrete objects")->check(CLI::PositiveNumber);
  synth->add_option("--quality", syn.quality, "quality range LO,HI");
  synth->add_option("--scale", syn.params.scale, "linear scale of shapes and regions")->check(CLI::PositiveNumber);
  synth->add_option("--out-dir,-o", syn.out_dir, "output directory")->required();
  synth->add_flag("--png", syn.png, "also write image.png");

  RenderArgs ren;
  CLI::App* render = app.add_subcommand("render", "render a label map with random colors");
  render->add_option("--input,-i", ren.input, "RSLM label map")->required();
  render->add_option("--out,-o", ren.output, "output PNG")->required();
  render->add_option("--seed", ren.seed, "palette seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*segment) return cmd_segment(seg);
    if (*merge) return cmd_merge(mrg);
    if (*eval) return cmd_eval(ev);
    if (*synth) return cmd_synth(syn);
    if (*render) return cmd_render(ren);
  } catch (const BackendError& e) {
    std::cerr << "rsseg: backend error: " << e.what() << std::endl;
    return kExitBackend;
  } catch (const std::exception& e) {
    std::cerr << "rsseg: " << e.what() << std::endl;
    return kExitInput;
  }
  return kExitInput;
}
