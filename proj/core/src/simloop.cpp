#include "ddopf/simloop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>

#include "ddopf/errors.hpp"
#include "ddopf/log.hpp"

namespace ddopf {

namespace {

Matrix forecast_window(const Matrix& demand, Eigen::Index start, int horizon) {
  Matrix w(horizon, demand.cols());
  for (int k = 0; k < horizon; ++k) {
    const Eigen::Index row = std::min<Eigen::Index>(start + k, demand.rows() - 1);
    w.row(k) = demand.row(row);
  }
  return w;
}

// Column of u holding each storage's power.
std::vector<int> storage_columns(const Matrix& selector) {
  std::vector<int> cols;
  for (Eigen::Index s = 0; s < selector.rows(); ++s) {
    Eigen::Index col = 0;
    selector.row(s).maxCoeff(&col);
    cols.push_back(static_cast<int>(col));
  }
  return cols;
}

Matrix tail_rows(const Matrix& m, Eigen::Index rows) {
  return m.bottomRows(std::min(rows, m.rows()));
}

void append_row(Matrix& buffer, const Vector& v) {
  if (buffer.rows() == 0) return;
  const Eigen::Index n = buffer.rows();
  if (n > 1) buffer.topRows(n - 1) = buffer.bottomRows(n - 1).eval();
  buffer.row(n - 1) = v.transpose();
}

}  // namespace

TrajectoryLog generate_excitation(const QuasiWeierstrass& plant, const ReducedModel& model,
                                  const StageCost& cost, const Bounds& bounds,
                                  const Matrix& demand, const Vector& e0, int length,
                                  const ExcitationOptions& options) {
  if (length < 1) throw InvalidParameter("excitation length must be positive");
  if (demand.rows() < length) {
    throw InsufficientData("demand series has " + std::to_string(demand.rows()) +
                           " rows, excitation needs " + std::to_string(length));
  }
  if (options.amplitude < 0.0) throw InvalidParameter("excitation amplitude must be nonnegative");
  const int nu = plant.num_inputs();
  const int q = plant.q();
  const double dt = plant.delta_hours;
  const std::vector<int> scol = storage_columns(model.storage_selector);
  const Vector range = (bounds.u_max - bounds.u_min).unaryExpr(
      [](double r) { return std::isfinite(r) ? r : 0.0; });

  ExactMpc mpc(model, cost, bounds, options.replan_horizon);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);

  TrajectoryLog log;
  log.u.resize(length, nu);
  log.w = demand.topRows(length);
  log.y.resize(length, plant.num_outputs());
  PlantState state{e0};
  Plan plan;
  for (int k = 0; k < length; ++k) {
    const int offset = k % options.replan_horizon;
    if (offset == 0) {
      Measurement m;
      m.e_now = state.e;
      plan = mpc.plan(m, forecast_window(demand, k, options.replan_horizon));
    }
    Vector u = plan.u.row(offset).transpose();
    for (int i = 0; i < nu; ++i) u(i) += options.amplitude * range(i) * uniform(rng);
    u = u.cwiseMax(bounds.u_min).cwiseMin(bounds.u_max);
    for (int s = 0; s < q; ++s) {
      const double lo = (state.e(s) - bounds.y_max(s)) / dt;
      const double hi = (state.e(s) - bounds.y_min(s)) / dt;
      u(scol[s]) = std::clamp(u(scol[s]), std::max(lo, bounds.u_min(scol[s])),
                              std::min(hi, bounds.u_max(scol[s])));
    }
    auto res = step(plant, state, u, log.w.row(k).transpose());
    log.u.row(k) = u.transpose();
    log.y.row(k) = res.y.transpose();
    state = std::move(res.next);
  }

  if (options.pe_order > 0) {
    Matrix joint(length, nu + log.w.cols());
    joint << log.u, log.w;
    if (length < options.pe_order) {
      if (options.policy == PePolicy::kStrict) {
        throw PersistencyError("excitation shorter than the PE order " +
                               std::to_string(options.pe_order));
      }
    } else {
      const Excitation ex = is_persistently_exciting(joint, options.pe_order);
      if (!ex.exciting) {
        const std::string msg = "excitation not persistently exciting of order " +
                                std::to_string(options.pe_order) + " (rank " +
                                std::to_string(ex.rank) + " of " + std::to_string(ex.required) +
                                ")";
        if (options.policy == PePolicy::kStrict) throw PersistencyError(msg);
        log::info(msg);
      }
    }
  }
  return log;
}

Vector final_charge(const QuasiWeierstrass& plant, const TrajectoryLog& log) {
  if (log.length() == 0) throw InsufficientData("final_charge: empty log");
  const Eigen::Index last = log.length() - 1;
  const Vector e = log.y.row(last).head(plant.q()).transpose();
  return plant.a1 * e + plant.b1 * log.u.row(last).transpose() +
         plant.f1 * log.w.row(last).transpose();
}

TrajectoryLog add_measurement_noise(const TrajectoryLog& log, const OutputLayout& layout,
                                    double ratio, std::uint64_t seed) {
  if (ratio < 0.0) throw InvalidParameter("noise ratio must be nonnegative");
  if (log.y.cols() != layout.size()) throw DimensionMismatch("noise: output layout mismatch");
  TrajectoryLog out = log;
  if (ratio == 0.0 || log.length() == 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int b = 0; b < layout.branches; ++b) {
    const Eigen::Index col = layout.flow_offset() + b;
    const double rms = std::sqrt(log.y.col(col).squaredNorm() / static_cast<double>(log.length()));
    const double sd = ratio * rms;
    for (Eigen::Index k = 0; k < log.length(); ++k) out.y(k, col) += sd * normal(rng);
  }
  return out;
}

double RunMetrics::median_solve_seconds() const {
  if (solve_seconds.empty()) return 0.0;
  std::vector<double> v = solve_seconds;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

int RunMetrics::count(const std::string& kind) const {
  return static_cast<int>(std::count_if(violations.begin(), violations.end(),
                                        [&](const Violation& v) { return v.kind == kind; }));
}

LoopResult closed_loop(const QuasiWeierstrass& plant, Controller& controller,
                       const StageCost& cost, const Bounds& bounds, const Matrix& demand,
                       const TrajectoryLog& history, const Vector& e_start,
                       const LoopOptions& options) {
  const int horizon = controller.horizon();
  if (options.steps < 1) throw InvalidParameter("closed loop needs at least one step");
  if (options.control_horizon < 1 || options.control_horizon > horizon) {
    throw InvalidParameter("control horizon must lie in [1, horizon]");
  }
  if (demand.rows() < options.steps + horizon - 1) {
    throw InsufficientData("demand series must cover steps + horizon - 1 rows");
  }
  const Eigen::Index need = std::max(controller.history(), 1);
  if (history.length() < controller.history()) {
    throw InsufficientData("closed loop needs " + std::to_string(controller.history()) +
                           " past samples");
  }
  const OutputLayout& layout = plant.layout;
  const int q = plant.q();

  Matrix bu = tail_rows(history.u, need);
  Matrix bw = tail_rows(history.w, need);
  Matrix by = tail_rows(history.y, need);

  std::mt19937_64 rng(options.noise_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector noise_sd = Vector::Zero(layout.branches);
  if (options.online_noise > 0.0 && history.length() > 0) {
    for (int b = 0; b < layout.branches; ++b) {
      const auto col = history.y.col(layout.flow_offset() + b);
      noise_sd(b) = options.online_noise *
                    std::sqrt(col.squaredNorm() / static_cast<double>(history.length()));
    }
  }

  LoopResult result;
  RunMetrics& met = result.metrics;
  met.controller = controller.name();
  result.log.u.resize(options.steps, plant.num_inputs());
  result.log.w.resize(options.steps, plant.num_disturbances());
  result.log.y.resize(options.steps, plant.num_outputs());
  result.charge.resize(options.steps, q);

  auto record = [&](int t, const std::string& kind, int index, double value, double lo,
                    double hi) {
    if (value > hi + options.violation_tolerance) {
      met.violations.push_back({t, kind, index, value, hi, value - hi});
    } else if (value < lo - options.violation_tolerance) {
      met.violations.push_back({t, kind, index, value, lo, lo - value});
    }
  };

  PlantState state{e_start};
  Plan plan;
  bool have_plan = false;
  int plan_start = 0;
  Vector u_prev;
  for (int t = 0; t < options.steps; ++t) {
    if (t % options.control_horizon == 0) {
      Measurement m{bu, bw, by, state.e};
      const auto t0 = std::chrono::steady_clock::now();
      try {
        plan = controller.plan(m, demand.middleRows(t, horizon));
        have_plan = true;
        met.solve_iterations.push_back(plan.iterations);
      } catch (const InfeasibleSchedule& ex) {
        if (options.on_infeasible == InfeasibilityPolicy::kAbort || u_prev.size() == 0) {
          throw InfeasibleSchedule(controller.name() + ": infeasible plan at step " +
                                       std::to_string(t) + ": " + ex.what(),
                                   ex.violated_rows(), t);
        }
        log::warn(controller.name() + ": infeasible plan at step " + std::to_string(t) +
                  ", holding the previous input");
        have_plan = false;
        ++met.infeasible_solves;
        met.violations.push_back({t, "infeasible", -1, 0.0, 0.0, 0.0});
        met.solve_iterations.push_back(0);
      }
      met.solve_seconds.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      met.solve_steps.push_back(t);
      plan_start = t;
    }
    const Vector u = have_plan ? Vector(plan.u.row(t - plan_start).transpose()) : u_prev;
    const Vector w = demand.row(t).transpose();
    auto res = step(plant, state, u, w);

    const double stage = cost(u, res.y);
    met.stage_costs.push_back(stage);
    met.j_cl += stage;
    const Vector flows = res.y.tail(layout.branches);
    met.max_abs_flow.push_back(flows.size() ? flows.cwiseAbs().maxCoeff() : 0.0);
    for (int i = 0; i < u.size(); ++i) record(t, "input", i, u(i), bounds.u_min(i), bounds.u_max(i));
    for (int s = 0; s < q; ++s) record(t, "charge", s, res.y(s), bounds.y_min(s), bounds.y_max(s));
    record(t, "slack", 0, res.y(q), bounds.y_min(q), bounds.y_max(q));
    for (int b = 0; b < layout.branches; ++b) {
      const int row = layout.flow_offset() + b;
      record(t, "flow", b, res.y(row), bounds.y_min(row), bounds.y_max(row));
    }

    result.log.u.row(t) = u.transpose();
    result.log.w.row(t) = w.transpose();
    result.log.y.row(t) = res.y.transpose();
    result.charge.row(t) = res.next.e.transpose();

    Vector measured = res.y;
    for (int b = 0; b < layout.branches; ++b) {
      if (noise_sd(b) > 0.0) measured(layout.flow_offset() + b) += noise_sd(b) * normal(rng);
    }
    append_row(bu, u);
    append_row(bw, w);
    append_row(by, measured);
    u_prev = u;
    state = std::move(res.next);
  }
  return result;
}

std::vector<ResultRow> result_rows(const LoopResult& result) {
  const RunMetrics& met = result.metrics;
  std::vector<ResultRow> rows;
  std::size_t solve = 0;
  for (std::size_t t = 0; t < met.stage_costs.size(); ++t) {
    ResultRow r;
    r.step = static_cast<int>(t);
    r.controller = met.controller;
    r.stage_cost = met.stage_costs[t];
    r.max_abs_flow = met.max_abs_flow[t];
    if (solve < met.solve_steps.size() && met.solve_steps[solve] == static_cast<int>(t)) {
      r.solve_seconds = met.solve_seconds[solve++];
    }
    r.storage = result.charge.row(static_cast<Eigen::Index>(t)).transpose();
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace ddopf
