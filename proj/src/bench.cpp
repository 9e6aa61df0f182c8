#include "uniap/bench.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "uniap/error.hpp"
#include "uniap/io.hpp"
#include "uniap/parallel.hpp"

namespace uniap {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Series {
  std::vector<double> totals;
  std::vector<std::vector<double>> layers;  // [layer][run]
  std::string first_output;
  bool identical = true;
};

Series time_runs(const FeatureMap& fm, const UniapConfig& cfg,
                 std::size_t repeats, std::size_t workers,
                 const std::string* expected) {
  WorkerPool pool(workers);
  Series s;
  s.layers.resize(cfg.thresholds.size());
  for (std::size_t r = 0; r < repeats; ++r) {
    RunTrace trace;
    const auto start = std::chrono::steady_clock::now();
    const MaskPyramid p = run_uniap(fm, cfg, &pool, &trace);
    s.totals.push_back(std::chrono::duration<double>(
                           std::chrono::steady_clock::now() - start)
                           .count());
    for (std::size_t t = 0; t < trace.layers.size(); ++t) {
      s.layers[t].push_back(trace.layers[t].seconds);
    }
    const std::string out = io::mask_json_string(p);
    if (r == 0) s.first_output = out;
    if (out != s.first_output || (expected != nullptr && out != *expected)) {
      s.identical = false;
    }
  }
  return s;
}

}  // namespace

BenchReport bench_run(const FeatureMap& fm, const UniapConfig& cfg,
                      std::size_t repeats, std::size_t workers) {
  if (repeats < 3) {
    throw Error(ErrorCode::kInvalidParams,
                "repeats must be at least 3, got " + std::to_string(repeats));
  }
  if (workers == 0) throw Error(ErrorCode::kInvalidParams, "workers must be positive");
  cfg.validate();

  const Series single = time_runs(fm, cfg, repeats, 1, nullptr);
  const Series multi = workers == 1
                           ? single
                           : time_runs(fm, cfg, repeats, workers,
                                       &single.first_output);

  BenchReport report;
  report.repeats = repeats;
  report.workers = workers;
  report.single_median_seconds = median(single.totals);
  report.single_min_seconds =
      *std::min_element(single.totals.begin(), single.totals.end());
  report.median_seconds = median(multi.totals);
  report.min_seconds = *std::min_element(multi.totals.begin(), multi.totals.end());
  report.speedup = report.median_seconds > 0.0
                       ? report.single_median_seconds / report.median_seconds
                       : 1.0;
  for (const auto& layer : multi.layers) {
    report.layer_median_seconds.push_back(median(layer));
  }
  report.outputs_identical = single.identical && multi.identical;
  return report;
}

}  // namespace uniap
