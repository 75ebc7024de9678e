#include <benchmark/benchmark.h>

#include <map>
#include <string>

#include "ddopf/experiment.hpp"
#include "ddopf/log.hpp"

namespace {

using namespace ddopf;

const Scenario& scenario(const std::string& name) {
  static std::map<std::string, Scenario> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    log::set_level(log::Level::kError);
    ExperimentConfig cfg;
    cfg.case_path = std::string(DDOPF_BENCH_DATA_DIR) + "/" + name;
    cfg.steps = 1;
    it = cache.emplace(name, prepare_scenario(load_case_json(cfg.case_path), cfg)).first;
  }
  return it->second;
}

// One receding-horizon solve from the first closed-loop state.
void plan_once(benchmark::State& state, const std::string& name, const std::string& kind) {
  const Scenario& sc = scenario(name);
  ExperimentConfig cfg;
  auto ctrl = make_controller(kind, sc, cfg);
  ctrl->set_warm_start(false);
  const TrajectoryLog& off = sc.offline;
  const Measurement m{off.u.bottomRows(1), off.w.bottomRows(1), off.y.bottomRows(1), sc.e_start};
  const Matrix forecast = sc.demand.values.middleRows(cfg.data_length, cfg.horizon);
  for (auto _ : state) {
    Plan p = ctrl->plan(m, forecast);
    benchmark::DoNotOptimize(p.u.data());
  }
}

BENCHMARK_CAPTURE(plan_once, exact_6ww, std::string("case6ww.json"), std::string("exact"))
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(plan_once, ddopf_6ww, std::string("case6ww.json"), std::string("ddopf"))
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(plan_once, exact_118, std::string("case118.json"), std::string("exact"))
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(plan_once, ddopf_118, std::string("case118.json"), std::string("ddopf"))
    ->Unit(benchmark::kMillisecond)
    ->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
