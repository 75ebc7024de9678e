#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ddopf/hankel.hpp"
#include "ddopf/linalg.hpp"
#include "ddopf/netmodel.hpp"
#include "ddopf/plant.hpp"
#include "ddopf/qp.hpp"

namespace ddopf {

// l(u, y) = u'Ru + r'u + y'Qy + q'y, in $ per step.
struct StageCost {
  Matrix r_quad;
  Vector r_lin;
  Matrix q_quad;
  Vector q_lin;

  // Throws InvalidParameter unless R is positive definite and Q positive
  // semidefinite (eigenvalues >= -1e-10).
  void validate() const;
  double operator()(const Vector& u, const Vector& y) const;
};

struct CostOptions {
  double flow_weight = 1e-5;  // $/MW^2h on every branch flow
  bool price_slack = false;   // charge the slack generator's own cost on p1
};

// Device prices per hour scaled by the step length delta_hours.
StageCost make_stage_cost(const GridCase& grid, const ReducedModel& model,
                          const CostOptions& options = {});

// y bounds are laid out as [e; p1; f].
struct Bounds {
  Vector u_min, u_max;
  Vector y_min, y_max;

  void validate() const;
};

Bounds make_bounds(const GridCase& grid, const ReducedModel& model);

// Recent closed-loop history, oldest sample first, one sample per row.
struct Measurement {
  Matrix u, w, y;
  Vector e_now;  // charge at the step being planned
};

struct Plan {
  Matrix u;  // horizon x n_u
  Matrix y;  // horizon x n_y, predicted
  Vector decision;  // QP variables (u stack or beta stack)
  double objective = 0.0;
  QpStatus status = QpStatus::kOptimal;
  int iterations = 0;
  double solve_seconds = 0.0;
  bool polished = false;
  std::vector<int> violated_rows;
};

class Controller {
 public:
  virtual ~Controller() = default;

  virtual std::string name() const = 0;
  virtual int horizon() const = 0;
  // Number of past samples the controller reads from the measurement.
  virtual int history() const { return 0; }
  // w_forecast: horizon x n_w. Throws InfeasibleSchedule if the QP is
  // infeasible.
  virtual Plan plan(const Measurement& m, const Matrix& w_forecast) = 0;

  void set_warm_start(bool on) { warm_start_ = on; }

 protected:
  bool warm_start_ = true;
};

// Affine map of the QP variables x onto one stage:
//   u = gu * x.segment(col, width) + offset_u,  y = gy * (same) + offset_y.
struct StageMap {
  Eigen::Index col = 0;
  Matrix gu;
  Matrix gy;
  int free_rows = 0;  // leading y rows left unbounded (charge already fixed)
};

// Rows sum_i a_i * x.segment(col_i, a_i.cols()) = rhs, rhs supplied per solve.
struct EqualityBlock {
  std::vector<std::pair<Eigen::Index, Matrix>> terms;
  Eigen::Index rows() const { return terms.empty() ? 0 : terms.front().second.rows(); }
};

// Fixed-structure receding-horizon QP: stage cost on affine stage maps,
// box constraints on u and y, equality blocks, and lambda * ||x||^2.
// P and A are assembled once; each solve only changes c and the bounds.
class PlanBuilder {
 public:
  PlanBuilder(Eigen::Index num_vars, StageCost cost, Bounds bounds, double regularization,
              QpSettings settings);

  // Rows are laid out in the order of these calls.
  void add_equality(EqualityBlock block);
  void add_stage(StageMap map);
  // Hand the QP solver P in factored form J'J + lambda I, which keeps the KKT
  // system sparse when stage maps are dense and wide (Hankel columns). Used
  // only when the stage Hessian rank is at most half the stage width.
  // Call before finalize.
  void set_factored_cost(bool on);
  void finalize();

  struct Offsets {
    Vector u;
    Vector y;
  };
  // offsets: one per stage; rhs: one per equality block.
  Plan solve(const std::vector<Offsets>& offsets, const std::vector<Vector>& rhs,
             const WarmStart* warm);

  Eigen::Index num_vars() const { return num_vars_; }
  Eigen::Index num_rows() const { return num_rows_; }
  int num_stages() const { return static_cast<int>(stages_.size()); }
  const Vector& last_duals() const { return last_duals_; }

 private:
  struct Group {
    bool stage = false;
    std::size_t index = 0;
    Eigen::Index row = 0;
  };

  Eigen::Index num_vars_;
  StageCost cost_;
  Bounds bounds_;
  double regularization_;
  QpSettings settings_;
  std::vector<StageMap> stages_;
  std::vector<EqualityBlock> equalities_;
  std::vector<Group> groups_;
  Eigen::Index num_rows_ = 0;
  bool factored_cost_ = false;
  std::unique_ptr<QpSolver> solver_;
  Vector last_duals_;
};

// Moves blocks one position towards the front (after prefix entries) and
// repeats the last block.
Vector shift_blocks(const Vector& v, Eigen::Index prefix, Eigen::Index block);

// Multi-stage DC OPF with the network eliminated through the PTDF.
class ExactMpc : public Controller {
 public:
  ExactMpc(ReducedModel model, StageCost cost, Bounds bounds, int horizon,
           QpSettings settings = {});

  std::string name() const override { return name_; }
  int horizon() const override { return horizon_; }
  Plan plan(const Measurement& m, const Matrix& w_forecast) override;

  const ReducedModel& model() const { return model_; }
  void set_name(std::string name) { name_ = std::move(name); }

 private:
  ReducedModel model_;
  int horizon_;
  std::string name_ = "exact";
  std::optional<PlanBuilder> builder_;
  std::optional<WarmStart> last_;
};

Plan exact_mpc_plan(const ReducedModel& model, const StageCost& cost, const Bounds& bounds,
                    const Vector& e_now, const Matrix& w_forecast, const QpSettings& settings = {});

struct PtdfEstimate {
  Matrix ptdf;
  int rank = 0;
  int required_rank = 0;              // |N| - 1
  std::vector<int> zero_injection_buses;  // bus ids without any recorded injection
};

// Least squares fit of the flows on the net injections C~g u - C~d w using
// the pseudoinverse. Warns when the injections are rank deficient.
PtdfEstimate seqid_estimate_ptdf(const TrajectoryLog& data, const Matrix& gen_incidence,
                                 const Matrix& demand_incidence, const OutputLayout& layout);
PtdfEstimate seqid_estimate_ptdf(const TrajectoryLog& data, const ReducedModel& model);

struct EquivalenceReport {
  Matrix m_uf;  // flows regressed on u
  Matrix m_wf;  // flows regressed on w
  Matrix ptdf;  // seq-ID estimate
  double deviation_u = 0.0;  // max |M_UF - M C~g|
  double deviation_w = 0.0;  // max |M_WF + M C~d|
  double max_deviation = 0.0;
  // Same comparison restricted to the span of the recorded (u, w).
  double projected_deviation = 0.0;
  int injection_rank = 0;
};

// One-step regression of the flows on (u, w) compared against the PTDF fit.
// The demand block carries a minus sign because demand withdraws power.
EquivalenceReport regression_equivalence_check(const TrajectoryLog& data, const ReducedModel& model);

// Exact MPC on a copy of the model whose PTDF is replaced by the estimate.
std::unique_ptr<ExactMpc> make_seqid_controller(const ReducedModel& model,
                                                const PtdfEstimate& estimate, StageCost cost,
                                                Bounds bounds, int horizon,
                                                QpSettings settings = {});

struct DdOpfOptions {
  int t_ini = 1;
  int horizon = 12;
  double lambda = 0.0;
  // Chain horizon one-step stacks instead of a single depth t_ini + horizon stack.
  bool segmented = true;
  // Constrain the complete past (u, w, y) instead of only (s, e).
  bool full_past = false;
  PePolicy policy = PePolicy::kTruncated;
  // 0 selects (t_ini + stack horizon) * (n_u + n_w) + q.
  int truncation_rank = 0;
};

class DdOpf : public Controller {
 public:
  DdOpf(const TrajectoryLog& data, const ReducedModel& model, StageCost cost, Bounds bounds,
        DdOpfOptions options, QpSettings settings = {});

  std::string name() const override { return "ddopf"; }
  int horizon() const override { return options_.horizon; }
  int history() const override { return options_.t_ini; }
  Plan plan(const Measurement& m, const Matrix& w_forecast) override;

  const HankelStack& stack() const { return stack_; }
  const NullspaceSubstitution& substitution() const { return subst_; }
  const DdOpfOptions& options() const { return options_; }

 private:
  void build_segmented();
  void build_single();
  Plan solve_segmented(const Measurement& m, const Matrix& w_forecast);
  Plan solve_single(const Measurement& m, const Matrix& w_forecast);

  DdOpfOptions options_;
  Matrix storage_selector_;
  int nu_, nw_, ny_, q_;
  HankelStack stack_;
  NullspaceSubstitution subst_;
  Matrix basis_;  // null-space basis N
  // Products with the null-space basis, reused every step.
  Matrix uf_n_, yf_n_, sp_n_, ep_n_, up_n_, wp_n_, yp_n_;
  Matrix su_n_, se_n_;  // storage power and charge rows of the future block
  std::optional<PlanBuilder> builder_;
  std::optional<WarmStart> last_;
};

}  // namespace ddopf
