#pragma once

#include <Eigen/Cholesky>
#include <unordered_map>
#include <vector>

#include "ddopf/linalg.hpp"

namespace ddopf {

struct Bus {
  int id = 0;
  double demand_mw = 0.0;  // nominal demand PD

  bool operator==(const Bus&) const = default;
};

// Line or transformer. Flow is positive in the from -> to direction.
struct Branch {
  int from = 0;
  int to = 0;
  double x = 0.0;    // reactance, p.u.
  double tap = 1.0;  // transformer tap ratio
  double f_max = 0.0;

  bool operator==(const Branch&) const = default;
};

struct Generator {
  int bus = 0;
  double p_min = 0.0;
  double p_max = 0.0;
  double cost_quadratic = 0.0;  // $/MW^2h
  double cost_linear = 0.0;     // $/MWh

  bool operator==(const Generator&) const = default;
};

struct Storage {
  int bus = 0;
  double e_min = 0.0;  // MWh
  double e_max = 0.0;
  double s_min = 0.0;  // MW, discharge positive
  double s_max = 0.0;
  double e0 = 0.0;
  double cost_power_quadratic = 0.0;
  double cost_energy_quadratic = 0.0;

  bool operator==(const Storage&) const = default;
};

struct Demand {
  int bus = 0;
  int column = 0;  // position of this demand in the disturbance vector w

  bool operator==(const Demand&) const = default;
};

// Static network description. The slack generator is the first generator
// located at slack_bus; it is excluded from the control input.
struct GridCase {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<Storage> storages;
  std::vector<Demand> demands;
  int slack_bus = 0;
  double delta_hours = 0.25;

  bool operator==(const GridCase&) const = default;

  // Throws InvalidParameter / ReferenceError when an invariant is broken.
  void validate() const;

  int bus_index(int bus_id) const;  // throws ReferenceError
  int slack_generator() const;      // index into generators
  int num_inputs() const;           // |G| - 1 + |S|
};

// Slack-reduced DC model. Reduced coordinates are the buses in case order
// with the slack bus removed.
struct ReducedModel {
  Matrix bus_susceptance;      // B, |N| x |N|
  Matrix reduced_susceptance;  // B~, (|N|-1) x (|N|-1)
  Matrix branch_susceptance;   // B~f, |E| x (|N|-1)
  Matrix ptdf;                 // M = B~f B~^-1
  Matrix gen_incidence;        // C~g, (|N|-1) x n_u
  Matrix demand_incidence;     // C~d, (|N|-1) x n_w
  Matrix storage_selector;     // C~s, |S| x n_u, s = C~s u
  Eigen::LLT<Matrix> factor;   // of B~

  std::vector<int> reduced_bus_ids;  // reduced coordinate -> bus id
  std::vector<int> input_generators;  // u index -> generator index (gens only)
  int slack_index = 0;                // bus index of the slack bus
  int slack_generator = 0;
  double delta_hours = 0.25;

  int num_inputs() const { return static_cast<int>(gen_incidence.cols()); }
  int num_demands() const { return static_cast<int>(demand_incidence.cols()); }
  int num_storages() const { return static_cast<int>(storage_selector.rows()); }
  int num_branches() const { return static_cast<int>(branch_susceptance.rows()); }
  int num_outputs() const { return num_storages() + 1 + num_branches(); }
};

Matrix build_bus_susceptance(const GridCase& grid);

// Bus ids grouped by connected component of the branch graph, each group in
// case order. Components are ordered by their first bus.
std::vector<std::vector<int>> connected_component_list(const GridCase& grid);
int connected_components(const GridCase& grid);

// Throws ConnectivityError when the branch graph is disconnected.
ReducedModel reduce(const GridCase& grid);

struct DcFlow {
  Vector angles;  // reduced angles, slack angle fixed at zero
  Vector flows;   // one entry per branch
  double slack_power = 0.0;
};

// u: powers of the controllable devices (non-slack generators then storages,
// discharge positive); w: demands in column order.
DcFlow solve_dc_flow(const ReducedModel& model, const Vector& u, const Vector& w);

}  // namespace ddopf
