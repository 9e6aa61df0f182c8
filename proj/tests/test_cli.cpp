#include "doctest.h"

#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "support.hpp"
#include "uniap/bench.hpp"
#include "uniap/error.hpp"
#include "uniap/evaluate.hpp"
#include "uniap/io.hpp"
#include "uniap/maskops.hpp"
#include "uniap/synth.hpp"

using namespace uniap;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "uniap");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("synthetic generator") {
  SynthParams one;
  one.regions = 1;
  one.noise_std = 0;
  one.height = 5;
  one.width = 7;
  one.dim = 4;
  const SynthResult r = synth_generate(one);
  REQUIRE(r.regions.size() == 1);
  CHECK(r.regions[0] == TokenMask::full(5, 7));
  for (std::size_t p = 1; p < 35; ++p) {
    CHECK(std::equal(r.features.row(p).begin(), r.features.row(p).end(),
                     r.features.row(0).begin()));
  }

  const SynthParams def;
  const SynthResult a = synth_generate(def);
  const SynthResult b = synth_generate(def);
  CHECK(io::encode_fmap(a.features) == io::encode_fmap(b.features));
  CHECK(a.regions == b.regions);
  SynthParams other = def;
  other.seed = 43;
  CHECK(io::encode_fmap(synth_generate(other).features) != io::encode_fmap(a.features));

  CHECK(testing::is_partition(a.regions, 32, 32));
  for (const auto& m : a.regions) CHECK(testing::four_connected(m));
  std::vector<std::size_t> axes = a.prototype_axes;
  std::sort(axes.begin(), axes.end());
  CHECK(std::adjacent_find(axes.begin(), axes.end()) == axes.end());

  // Mean within-region cosine against the value expected for unit
  // prototypes plus isotropic noise: about 1 / (1 + d σ²).
  double total = 0;
  std::size_t pairs = 0;
  for (const auto& m : a.regions) {
    const auto idx = m.indices();
    for (std::size_t i = 0; i + 1 < idx.size(); i += 3) {
      double c = 0;
      for (std::size_t k = 0; k < 64; ++k) {
        c += double(a.features.row(idx[i])[k]) * a.features.row(idx[i + 1])[k];
      }
      total += c;
      ++pairs;
    }
  }
  const double mean = total / double(pairs);
  CHECK(mean == doctest::Approx(1.0 / (1.0 + 64 * 0.05 * 0.05)).epsilon(0.02));

  SynthParams bad = def;
  bad.regions = 0;
  CHECK_THROWS_AS(synth_generate(bad), Error);
  bad = def;
  bad.dim = 3;
  CHECK_THROWS_AS(synth_generate(bad), Error);
}

TEST_CASE("evaluation") {
  const SynthResult s = synth_generate({});
  MaskPyramid exact{32, 32, {PyramidLevel{0.8, {}, {}}}};
  for (const auto& m : s.regions) {
    exact.levels[0].instance.push_back({m, {}, 0, MaskKind::kInstance});
  }
  const EvalReport r = eval_iou(exact, s.regions);
  CHECK(r.mean_best_iou == 1.0);
  for (const auto& t : r.per_truth) {
    CHECK(t.best_iou == 1.0);
    CHECK(t.level == 0);
  }

  const EvalReport e = eval_iou(MaskPyramid{32, 32, {}}, s.regions);
  CHECK(e.mean_best_iou == 0.0);
  CHECK(e.per_truth[0].level == -1);

  CHECK_THROWS_AS(eval_iou(MaskPyramid{16, 16, {}}, s.regions), Error);
}

TEST_CASE("planted regions are recovered") {
  const SynthResult s = synth_generate({});
  const MaskPyramid p = run_uniap(s.features, {});
  const EvalReport r = eval_iou(p, s.regions);
  CHECK(r.mean_best_iou >= 0.95);
  for (const auto& t : r.per_truth) CHECK(t.best_iou >= 0.9);
}

TEST_CASE("bench harness") {
  SynthParams sp;
  sp.height = 12;
  sp.width = 12;
  sp.dim = 16;
  const SynthResult s = synth_generate(sp);
  const BenchReport r = bench_run(s.features, {}, 3, 2);
  CHECK(r.outputs_identical);
  CHECK(r.repeats == 3);
  CHECK(r.layer_median_seconds.size() == 5);
  CHECK(r.median_seconds > 0.0);
  CHECK_THROWS_AS(bench_run(s.features, {}, 2, 1), Error);
  CHECK_THROWS_AS(bench_run(s.features, {}, 3, 0), Error);
}

TEST_CASE("command line pipeline") {
  testing::TempDir dir("cli");
  const Run synth = run_cli({"synth", "--h", "16", "--w", "16", "--d", "32", "--regions",
                         "4", "--seed", "3", "--out", dir / "f.fmap", "--truth",
                         dir / "t.json"});
  REQUIRE(synth.code == 0);

  const Run seg = run_cli({"segment", "--features", dir / "f.fmap", "--out", dir / "p.json",
                       "--render", dir / "render"});
  REQUIRE(seg.code == 0);
  for (int t = 0; t < 5; ++t) {
    CHECK(std::filesystem::exists(dir.path / "render" /
                                  ("level" + std::to_string(t) + "_instance.pgm")));
    CHECK(std::filesystem::exists(dir.path / "render" /
                                  ("level" + std::to_string(t) + "_semantic.pgm")));
  }

  const Run ev = run_cli({"eval", "--pred", dir / "p.json", "--truth", dir / "t.json"});
  REQUIRE(ev.code == 0);
  const json report = json::parse(ev.out);
  CHECK(report["mean_best_iou"].get<double>() >= 0.95);

  const Run seg4 = run_cli({"segment", "--features", dir / "f.fmap", "--out",
                        dir / "p4.json", "--workers", "4"});
  REQUIRE(seg4.code == 0);
  CHECK(io::read_text(dir / "p.json") == io::read_text(dir / "p4.json"));

  io::write_text(dir / "c.json", R"({"phi": 0})");
  const Run badcfg = run_cli({"segment", "--features", dir / "f.fmap", "--config",
                          dir / "c.json", "--out", dir / "x.json"});
  CHECK(badcfg.code == 1);
  CHECK(badcfg.err.find("error: InvalidConfig") == 0);

  const Run missing = run_cli({"segment", "--features", dir / "none.fmap", "--out", dir / "x.json"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("error: IoFailure") == 0);

  CHECK(run_cli({"segment"}).code != 0);
  CHECK(run_cli({"frobnicate"}).code != 0);
}

TEST_CASE("match subcommand") {
  testing::TempDir dir("match");
  // Teacher: two instance masks on a 4×4 grid, one of them outside the box.
  const std::vector<std::size_t> left{0, 1, 4, 5};
  const std::vector<std::size_t> right{3, 7};
  MaskPyramid teacher{4, 4, {PyramidLevel{0.8, {}, {}}}};
  teacher.levels[0].instance.push_back(
      {TokenMask::from_indices(4, 4, left), {}, 0, MaskKind::kInstance});
  teacher.levels[0].instance.push_back(
      {TokenMask::from_indices(4, 4, right), {}, 0, MaskKind::kInstance});
  io::write_mask_json(teacher, dir / "teacher.json");

  // Student view: the left half (4×2 grid).
  const std::vector<std::size_t> s0{0, 1, 2, 3};
  json mask;
  mask["rle"]["counts"] = rle_encode(TokenMask::from_indices(4, 2, s0)).counts;
  const json student{{"height", 4}, {"width", 2}, {"instance", json::array({mask})}};
  io::write_text(dir / "student.json", student.dump());
  const json logits{{"teacher", {{"instance", {{0.0, 0.0}, {1.0, 0.0}}}}},
                    {"student", {{"instance", {{0.0, 0.0}}}}}};
  io::write_text(dir / "logits.json", logits.dump());

  const Run r = run_cli({"match", "--student", dir / "student.json", "--teacher",
                     dir / "teacher.json", "--box", "0,0,4,2", "--logits",
                     dir / "logits.json"});
  REQUIRE(r.code == 0);
  const json out = json::parse(r.out);
  CHECK(out["instance"]["pairs"] == json::array({json::array({0, 0})}));
  CHECK(out["instance"]["dropped_teachers"] == json::array({1}));
  CHECK(out["instance"]["total_dice"].get<double>() == doctest::Approx(1.0));
  CHECK(out["loss"].get<double>() == doctest::Approx(std::log(2.0)));

  const Run bad = run_cli({"match", "--student", dir / "student.json", "--teacher",
                       dir / "teacher.json", "--box", "0,3,4,2", "--logits",
                       dir / "logits.json"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("error: BoxOutOfRange") == 0);
}
