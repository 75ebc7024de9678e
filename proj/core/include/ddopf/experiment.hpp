#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ddopf/controllers.hpp"
#include "ddopf/simloop.hpp"

namespace ddopf {

struct ExperimentConfig {
  std::string case_path;
  std::string demand_csv;  // optional recorded demand, replaces the generator
  std::vector<std::string> controllers{"exact", "seqid", "ddopf"};
  int horizon = 12;
  int control_horizon = 1;
  int steps = 96;
  int data_length = 417;
  double lambda = 200.0;
  double noise = 0.01;
  bool online_noise = false;
  std::uint64_t excitation_seed = 1;
  std::uint64_t noise_seed = 2;
  std::uint64_t demand_seed = 3;
  PePolicy pe = PePolicy::kTruncated;
  int t_ini = 1;
  bool segmented = true;
  bool full_past = false;
  int truncation_rank = 0;
  double excitation_amplitude = 0.1;
  DemandProfile demand;
  CostOptions cost;
  InfeasibilityPolicy on_infeasible = InfeasibilityPolicy::kAbort;
  QpSettings qp;

  // Throws ValidationError naming the offending field.
  void validate() const;
  // Sets the excitation, noise and demand seeds from one base value.
  void set_seed(std::uint64_t base);
};

ExperimentConfig config_from_json(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

std::string_view to_string(PePolicy policy);
PePolicy parse_pe_policy(std::string_view text);

// Everything shared by the controllers of one comparison.
struct Scenario {
  GridCase grid;
  ReducedModel model;
  QuasiWeierstrass plant;
  StageCost cost;
  Bounds bounds;
  DemandSeries demand;         // data_length + steps + horizon rows
  TrajectoryLog offline_clean;
  TrajectoryLog offline;       // with measurement noise
  Vector e_start;              // charge at the first closed-loop step
};

Scenario prepare_scenario(const GridCase& grid, const ExperimentConfig& config);

std::unique_ptr<Controller> make_controller(std::string_view kind, const Scenario& scenario,
                                            const ExperimentConfig& config);

LoopResult run_controller(std::string_view kind, const Scenario& scenario,
                          const ExperimentConfig& config);

std::vector<LoopResult> compare_controllers(const Scenario& scenario,
                                            const ExperimentConfig& config);

// {controller: {J_CL, median_solve_s, violations, ...}}
std::string metrics_json(const std::vector<LoopResult>& results);

void write_outputs(const std::filesystem::path& dir, const std::vector<LoopResult>& results);

}  // namespace ddopf
