#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ddopf/case_io.hpp"
#include "ddopf/controllers.hpp"
#include "ddopf/hankel.hpp"
#include "ddopf/plant.hpp"

namespace ddopf {

// Demand multiplier 1 + amplitude * sin(2 pi t / period + phase) + AR(1) noise,
// applied to the nominal demand of each bus.
struct DemandProfile {
  double amplitude = 0.15;
  double period_hours = 24.0;
  double phase = 0.0;              // radians
  double fluctuation_std = 0.03;   // stationary std of the AR(1) term
  double fluctuation_corr = 0.9;   // AR(1) coefficient per step
  double floor = 0.05;             // multiplier never drops below this
};

DemandSeries generate_demand_series(const GridCase& grid, int length, std::uint64_t seed,
                                    const DemandProfile& profile = {});

struct ExcitationOptions {
  double amplitude = 0.1;  // fraction of each device's range
  std::uint64_t seed = 1;
  int replan_horizon = 12;  // exact MPC block length for the base dispatch
  PePolicy policy = PePolicy::kTruncated;
  int pe_order = 0;  // 0 skips the persistency check
};

// Exact-MPC base dispatch re-planned every replan_horizon steps, plus
// uniform offsets, clipped to the input bounds and to the storage charge
// limits. demand must have at least length rows; forecasts beyond it repeat
// the last row.
TrajectoryLog generate_excitation(const QuasiWeierstrass& plant, const ReducedModel& model,
                                  const StageCost& cost, const Bounds& bounds,
                                  const Matrix& demand, const Vector& e0, int length,
                                  const ExcitationOptions& options);

// Charge after the last sample of the log.
Vector final_charge(const QuasiWeierstrass& plant, const TrajectoryLog& log);

// Gaussian noise on the flow block only; per channel std = ratio * RMS.
TrajectoryLog add_measurement_noise(const TrajectoryLog& log, const OutputLayout& layout,
                                    double ratio, std::uint64_t seed);

enum class InfeasibilityPolicy { kAbort, kHoldPrevious };

struct LoopOptions {
  int steps = 96;
  int control_horizon = 1;
  InfeasibilityPolicy on_infeasible = InfeasibilityPolicy::kAbort;
  double online_noise = 0.0;  // flow noise ratio on closed-loop measurements
  std::uint64_t noise_seed = 2;
  // Bound excess below this (absolute, MW or MWh) is not logged.
  double violation_tolerance = 1e-6;
};

struct Violation {
  int step = 0;
  std::string kind;  // flow | charge | slack | input | infeasible
  int index = 0;     // branch, storage or input index
  double value = 0.0;
  double limit = 0.0;
  double margin = 0.0;  // amount by which the limit is exceeded
};

struct RunMetrics {
  std::string controller;
  double j_cl = 0.0;
  std::vector<double> stage_costs;
  std::vector<double> max_abs_flow;
  std::vector<double> solve_seconds;  // one per solve
  std::vector<int> solve_steps;       // step index of each solve
  std::vector<int> solve_iterations;
  std::vector<Violation> violations;
  int infeasible_solves = 0;

  double median_solve_seconds() const;
  int count(const std::string& kind) const;
};

struct LoopResult {
  RunMetrics metrics;
  TrajectoryLog log;  // applied u, true w, plant y
  Matrix charge;      // steps x q, charge after each step
};

// demand rows start at the first closed-loop step and must cover
// steps + horizon - 1 rows. history holds the samples preceding the loop.
LoopResult closed_loop(const QuasiWeierstrass& plant, Controller& controller,
                       const StageCost& cost, const Bounds& bounds, const Matrix& demand,
                       const TrajectoryLog& history, const Vector& e_start,
                       const LoopOptions& options);

std::vector<ResultRow> result_rows(const LoopResult& result);

}  // namespace ddopf
