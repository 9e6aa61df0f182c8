#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "uniap/bench.hpp"
#include "uniap/error.hpp"
#include "uniap/evaluate.hpp"
#include "uniap/io.hpp"
#include "uniap/maskops.hpp"
#include "uniap/parallel.hpp"
#include "uniap/pooling.hpp"
#include "uniap/querysd.hpp"
#include "uniap/synth.hpp"

namespace uniap::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::size_t default_workers() {
  return std::max(1U, std::thread::hardware_concurrency());
}

io::Config config_or_default(const std::string& path) {
  if (path.empty()) return io::Config{};
  return io::load_config(path);
}

FeatureMap load_features(const std::string& path) {
  FeatureMap fm = io::read_fmap(path);
  return fm.normalized() ? fm : l2_normalize_rows(fm);
}

std::vector<TokenMask> masks_of(const std::vector<PseudoMask>& list) {
  std::vector<TokenMask> out;
  out.reserve(list.size());
  for (const auto& m : list) out.push_back(m.mask);
  return out;
}

struct SegmentArgs {
  std::string features;
  std::string config;
  std::string out;
  std::string render;
  std::size_t workers = 0;
  bool no_features = false;
};

int segment(const SegmentArgs& a, std::ostream& out) {
  const io::Config cfg = config_or_default(a.config);
  const FeatureMap fm = load_features(a.features);
  WorkerPool pool(a.workers == 0 ? default_workers() : a.workers);
  RunTrace trace;
  const MaskPyramid p = run_uniap(fm, cfg.uniap, &pool, &trace);
  io::write_mask_json(p, a.out, {.include_features = !a.no_features});

  if (!a.render.empty()) {
    fs::create_directories(a.render);
    for (std::size_t t = 0; t < p.levels.size(); ++t) {
      const std::string stem = "level" + std::to_string(t);
      io::render_labelmap_pgm(p.height, p.width, masks_of(p.levels[t].instance),
                              fs::path(a.render) / (stem + "_instance.pgm"));
      io::render_labelmap_pgm(p.height, p.width, masks_of(p.levels[t].semantic),
                              fs::path(a.render) / (stem + "_semantic.pgm"));
    }
  }
  for (std::size_t t = 0; t < p.levels.size(); ++t) {
    out << "level " << t << " tau=" << p.levels[t].tau
        << " nodes=" << trace.layers[t].partition.size()
        << " instance=" << p.levels[t].instance.size()
        << " semantic=" << p.levels[t].semantic.size() << "\n";
  }
  return 0;
}

int synth(const SynthParams& params, const std::string& fmap_out,
          const std::string& truth_out, std::ostream& out) {
  const SynthResult r = synth_generate(params);
  io::write_fmap(r.features, fmap_out);
  if (!truth_out.empty()) {
    io::write_mask_list_json(params.height, params.width, r.regions, truth_out);
  }
  out << "wrote " << params.height << "x" << params.width << "x" << params.dim
      << " features with " << r.regions.size() << " regions\n";
  return 0;
}

int eval(const std::string& pred, const std::string& truth, std::ostream& out) {
  const MaskPyramid p = io::read_mask_json(pred);
  const std::vector<TokenMask> t = io::read_mask_list_json(truth);
  const EvalReport report = eval_iou(p, t);
  json regions = json::array();
  for (std::size_t i = 0; i < report.per_truth.size(); ++i) {
    const auto& m = report.per_truth[i];
    regions.push_back({{"index", i},
                       {"best_iou", m.best_iou},
                       {"level", m.level},
                       {"kind", m.kind == MaskKind::kInstance ? "instance"
                                                              : "semantic"}});
  }
  out << json{{"regions", regions}, {"mean_best_iou", report.mean_best_iou}}
             .dump(2)
      << "\n";
  return 0;
}

int bench(const std::string& features, const std::string& config,
          std::size_t repeats, std::size_t workers, std::ostream& out) {
  const io::Config cfg = config_or_default(config);
  const FeatureMap fm = load_features(features);
  const BenchReport r = bench_run(fm, cfg.uniap, repeats, workers);
  out << std::fixed << std::setprecision(4);
  out << "grid " << fm.height() << "x" << fm.width() << " dim " << fm.dim()
      << ", " << r.repeats << " repeats\n";
  out << "workers=1  median " << r.single_median_seconds << " s  min "
      << r.single_min_seconds << " s\n";
  out << "workers=" << r.workers << "  median " << r.median_seconds
      << " s  min " << r.min_seconds << " s  speedup " << std::setprecision(2)
      << r.speedup << "x\n"
      << std::setprecision(4);
  for (std::size_t t = 0; t < r.layer_median_seconds.size(); ++t) {
    out << "  layer " << t << " median " << r.layer_median_seconds[t] << " s\n";
  }
  out << "outputs identical across runs and worker counts: "
      << (r.outputs_identical ? "yes" : "NO") << "\n";
  out << "reference: " << kReferenceSecondsPerImage
      << " s per 512x512 image (64x64 ViT-base/8 tokens) on GPU\n";
  return r.outputs_identical ? 0 : 1;
}

CropBox parse_box(const std::string& text) {
  std::vector<std::size_t> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long long x = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      v.push_back(static_cast<std::size_t>(x));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidParams, "box entry '" + item + "'");
    }
  }
  if (v.size() != 4) {
    throw Error(ErrorCode::kInvalidParams, "box must be r0,c0,rows,cols");
  }
  return {v[0], v[1], v[2], v[3]};
}

std::vector<QueryRow> rows_from_json(const json& j) {
  std::vector<QueryRow> out;
  for (const json& r : j) out.push_back({r.get<std::vector<double>>()});
  return out;
}

json match_kind(const std::vector<PseudoMask>& teacher_masks,
                const std::vector<TokenMask>& student_masks,
                const std::vector<QueryRow>& teacher_rows,
                const std::vector<QueryRow>& student_rows, const CropBox& box,
                const QuerySDConfig& cfg, double& loss_out) {
  if (teacher_rows.size() != teacher_masks.size() ||
      student_rows.size() != student_masks.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "logit rows must match mask counts (teacher " +
                    std::to_string(teacher_rows.size()) + " vs " +
                    std::to_string(teacher_masks.size()) + ", student " +
                    std::to_string(student_rows.size()) + " vs " +
                    std::to_string(student_masks.size()) + ")");
  }
  const auto kept = crop_and_filter_teacher(teacher_masks, box);
  std::vector<TokenMask> kept_masks;
  std::vector<QueryRow> kept_rows;
  for (const auto& k : kept) {
    kept_masks.push_back(k.mask);
    kept_rows.push_back(teacher_rows[k.original_index]);
  }
  for (const auto& s : student_masks) {
    if (s.height() != box.rows || s.width() != box.cols) {
      throw Error(ErrorCode::kGridMismatch,
                  "student masks must live on the box grid");
    }
  }
  const MatchResult m = hungarian_max(dice_cost_matrix(student_masks, kept_masks));
  const double loss = querysd_loss(kept_rows, student_rows, m.pairs, cfg);
  loss_out += loss;

  json pairs = json::array();
  for (const MatchPair& p : m.pairs) {
    pairs.push_back({p.student, kept[p.teacher].original_index});
  }
  std::vector<std::size_t> unmatched_teachers;
  for (std::size_t t : m.unmatched_teachers) {
    unmatched_teachers.push_back(kept[t].original_index);
  }
  std::vector<std::size_t> dropped;
  std::size_t next = 0;
  for (std::size_t i = 0; i < teacher_masks.size(); ++i) {
    if (next < kept.size() && kept[next].original_index == i) {
      ++next;
    } else {
      dropped.push_back(i);
    }
  }
  return {{"pairs", pairs},
          {"unmatched_students", m.unmatched_students},
          {"unmatched_teachers", unmatched_teachers},
          {"dropped_teachers", dropped},
          {"total_dice", m.total_dice},
          {"loss", loss}};
}

int match(const std::string& student_path, const std::string& teacher_path,
          const std::string& box_text, const std::string& logits_path,
          const std::string& config, const std::string& out_path,
          std::ostream& out) {
  const io::Config cfg = config_or_default(config);
  const MaskPyramid teacher = io::read_mask_json(teacher_path);
  const CropBox box = parse_box(box_text);
  validate_box(box, teacher.height, teacher.width);

  json result;
  double total_loss = 0.0;
  try {
    const json student = json::parse(io::read_text(student_path));
    const json logits = json::parse(io::read_text(logits_path));
    const auto sh = student.at("height").get<std::size_t>();
    const auto sw = student.at("width").get<std::size_t>();
    for (const char* kind : {"instance", "semantic"}) {
      std::vector<PseudoMask> teacher_masks;
      for (const auto& level : teacher.levels) {
        const auto& list =
            std::string(kind) == "instance" ? level.instance : level.semantic;
        teacher_masks.insert(teacher_masks.end(), list.begin(), list.end());
      }
      std::vector<TokenMask> student_masks;
      if (student.contains(kind)) {
        for (const json& mj : student.at(kind)) {
          student_masks.push_back(rle_decode(
              {sh, sw, mj.at("rle").at("counts").get<std::vector<std::uint64_t>>()}));
        }
      }
      const json& tl = logits.at("teacher");
      const json& sl = logits.at("student");
      const auto teacher_rows =
          tl.contains(kind) ? rows_from_json(tl.at(kind)) : std::vector<QueryRow>{};
      const auto student_rows =
          sl.contains(kind) ? rows_from_json(sl.at(kind)) : std::vector<QueryRow>{};
      result[kind] = match_kind(teacher_masks, student_masks, teacher_rows,
                                student_rows, box, cfg.querysd, total_loss);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedJson, e.what());
  }
  result["loss"] = total_loss;
  const std::string text = result.dump(2) + "\n";
  if (out_path.empty()) {
    out << text;
  } else {
    io::write_text(out_path, text);
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fast agglomerative pooling: multi-granular pseudo-masks from "
               "dense token features"};
  app.require_subcommand(1);

  SegmentArgs seg;
  auto* segment_cmd = app.add_subcommand("segment", "Build a mask pyramid");
  segment_cmd->add_option("--features", seg.features, ".fmap input")->required();
  segment_cmd->add_option("--config", seg.config, "JSON config (defaults if omitted)");
  segment_cmd->add_option("--out", seg.out, "mask JSON output")->required();
  segment_cmd->add_option("--render", seg.render, "directory for PGM label maps");
  segment_cmd->add_option("--workers", seg.workers, "worker threads (0 = all cores)");
  segment_cmd->add_flag("--no-features", seg.no_features,
                        "omit supernode features from the JSON");

  SynthParams sp;
  std::string synth_out;
  std::string synth_truth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a planted-region feature map");
  // --h is the grid height here, so help is long-form only.
  synth_cmd->set_help_flag("--help", "Print this help message and exit");
  synth_cmd->add_option("--h,--height", sp.height, "grid rows");
  synth_cmd->add_option("--w,--width", sp.width, "grid cols");
  synth_cmd->add_option("--d,--dim", sp.dim, "feature dim");
  synth_cmd->add_option("--regions", sp.regions, "number of regions");
  synth_cmd->add_option("--noise", sp.noise_std, "gaussian noise std");
  synth_cmd->add_option("--seed", sp.seed, "generator seed");
  synth_cmd->add_option("--boundary-noise", sp.boundary_noise,
                        "scale of the noise shared across region boundaries");
  synth_cmd->add_option("--out", synth_out, ".fmap output")->required();
  synth_cmd->add_option("--truth", synth_truth, "ground-truth mask JSON output");

  std::string eval_pred;
  std::string eval_truth;
  auto* eval_cmd = app.add_subcommand("eval", "Best-IoU of ground truth against a pyramid");
  eval_cmd->add_option("--pred", eval_pred, "mask JSON")->required();
  eval_cmd->add_option("--truth", eval_truth, "ground-truth mask JSON")->required();

  std::string bench_features;
  std::string bench_config;
  std::size_t bench_repeats = 5;
  std::size_t bench_workers = default_workers();
  auto* bench_cmd = app.add_subcommand("bench", "Time the pooling pipeline");
  bench_cmd->add_option("--features", bench_features, ".fmap input")->required();
  bench_cmd->add_option("--config", bench_config, "JSON config");
  bench_cmd->add_option("--repeats", bench_repeats, "runs per worker count (>= 3)");
  bench_cmd->add_option("--workers", bench_workers, "worker threads");

  std::string m_student, m_teacher, m_box, m_logits, m_config, m_out;
  auto* match_cmd = app.add_subcommand(
      "match", "Cropped Dice matching and query self-distillation loss");
  match_cmd->add_option("--student", m_student, "student masks JSON (box grid)")->required();
  match_cmd->add_option("--teacher", m_teacher, "teacher mask pyramid JSON")->required();
  match_cmd->add_option("--box", m_box, "r0,c0,rows,cols")->required();
  match_cmd->add_option("--logits", m_logits, "teacher/student logits JSON")->required();
  match_cmd->add_option("--config", m_config, "JSON config for temperatures");
  match_cmd->add_option("--out", m_out, "result JSON (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*segment_cmd) return segment(seg, out);
    if (*synth_cmd) return synth(sp, synth_out, synth_truth, out);
    if (*eval_cmd) return eval(eval_pred, eval_truth, out);
    if (*bench_cmd) {
      return bench(bench_features, bench_config, bench_repeats, bench_workers, out);
    }
    if (*match_cmd) {
      return match(m_student, m_teacher, m_box, m_logits, m_config, m_out, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: IoFailure: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace uniap::cli
