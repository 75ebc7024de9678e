// Command-line front end: convert, check, simulate, identify.
//
// Exit codes: 0 success, 1 invalid input or I/O failure, 2 disconnected grid,
// 3 infeasible schedule (abort policy), 4 insufficient or non-exciting data.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ddopf/case_io.hpp"
#include "ddopf/controllers.hpp"
#include "ddopf/errors.hpp"
#include "ddopf/experiment.hpp"
#include "ddopf/hankel.hpp"
#include "ddopf/log.hpp"
#include "ddopf/netmodel.hpp"
#include "ddopf/plant.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace ddopf;

namespace {

constexpr int kExitInput = 1;
constexpr int kExitConnectivity = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitData = 4;

struct ConvertArgs {
  std::string matpower;
  std::string storage;
  std::string out;
  std::optional<int> slack;
  double flow_limit = 300.0;
  double delta = 0.25;
};

struct CheckArgs {
  std::string case_path;
  int horizon = 12;
  int t_ini = 1;
};

struct SimulateArgs {
  std::string config;
  std::string case_path;
  std::string controller;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string pe;
  std::optional<int> t_ini;
  std::optional<double> lambda;
  std::optional<double> noise;
  std::optional<int> horizon;
  std::optional<int> control_horizon;
  std::optional<int> steps;
  std::optional<int> data_length;
  std::string save_data;
};

struct IdentifyArgs {
  std::string case_path;
  std::string data;
  std::string out = "out";
};

int run_convert(const ConvertArgs& a) {
  const RawMatpowerCase raw = load_matpower(a.matpower);
  StorageAugmentation aug;
  if (!a.storage.empty()) aug = load_augmentation_json(a.storage);
  ConversionOptions opt;
  opt.slack_bus = a.slack;
  opt.default_flow_limit = a.flow_limit;
  opt.delta_hours = a.delta;
  const GridCase grid = to_grid_case(raw, aug, opt);
  save_case_json(grid, a.out);
  std::printf("wrote %s: %zu buses, %zu branches, %zu generators (+%zu storages), %zu demands\n",
              a.out.c_str(), grid.buses.size(), grid.branches.size(), grid.generators.size(),
              grid.storages.size(), grid.demands.size());
  return 0;
}

int run_check(const CheckArgs& a) {
  const GridCase grid = load_case_json(a.case_path);
  const auto components = connected_component_list(grid);
  std::printf("buses %zu, branches %zu, generators %zu, storages %zu, demands %zu\n",
              grid.buses.size(), grid.branches.size(), grid.generators.size(),
              grid.storages.size(), grid.demands.size());
  std::printf("connected components: %zu\n", components.size());
  if (components.size() > 1) {
    for (std::size_t c = 0; c < components.size(); ++c) {
      std::printf("  component %zu: buses", c + 1);
      for (int b : components[c]) std::printf(" %d", b);
      std::printf("\n");
    }
    std::fprintf(stderr, "error: grid is disconnected\n");
    return kExitConnectivity;
  }
  const ReducedModel model = reduce(grid);
  const QuasiWeierstrass sys = assemble_descriptor(model, grid.delta_hours);
  const int nu = model.num_inputs();
  const int nw = model.num_demands();
  const int ny = model.num_outputs();
  const int q = model.num_storages();
  const int s = sys.nilpotency_index;
  std::printf("R-controllable: %s\n", r_controllable(sys) ? "yes" : "no");
  std::printf("R-observable: %s\n", r_observable(sys) ? "yes" : "no");
  std::printf("n_u %d, n_w %d, n_y %d, q %d, s %d\n", nu, nw, ny, q, s);
  if (q == 0) {
    std::printf("no storage: q = 0, T_ini = 0 (outputs are static in u and w)\n");
  } else {
    std::printf("minimum T_ini: 1 (charges are measured directly)\n");
  }
  const int t_ini = q == 0 ? 0 : a.t_ini;
  std::printf("horizon L = %d\n", a.horizon);
  std::printf("minimum T (strict PE): %d\n", min_data_length(nu, nw, a.horizon, q, s));
  const int behavior = behavior_dimension(std::max(t_ini, 1), nu, nw, q);
  std::printf("behavior dimension (T_ini = %d): %d\n", std::max(t_ini, 1), behavior);
  std::printf("minimum T (truncated, segmented): %d\n", behavior + std::max(t_ini, 1));
  std::printf("segmented stack rows: %d\n", 2 * q * std::max(t_ini, 1) + nu + nw + ny);
  return 0;
}

void write_ptdf(const Matrix& ptdf, const ReducedModel& model, const fs::path& path) {
  std::vector<std::string> header;
  for (int b : model.reduced_bus_ids) header.push_back("bus_" + std::to_string(b));
  write_matrix_csv(ptdf, header, path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

int run_simulate(const SimulateArgs& a) {
  ExperimentConfig cfg;
  if (!a.config.empty()) cfg = load_config(a.config);
  if (!a.case_path.empty()) cfg.case_path = a.case_path;
  if (!a.controller.empty()) {
    if (a.controller == "all") cfg.controllers = {"exact", "seqid", "ddopf"};
    else cfg.controllers = {a.controller};
  }
  if (a.seed) cfg.set_seed(*a.seed);
  if (!a.pe.empty()) cfg.pe = parse_pe_policy(a.pe);
  if (a.t_ini) cfg.t_ini = *a.t_ini;
  if (a.lambda) cfg.lambda = *a.lambda;
  if (a.noise) cfg.noise = *a.noise;
  if (a.horizon) cfg.horizon = *a.horizon;
  if (a.control_horizon) cfg.control_horizon = *a.control_horizon;
  if (a.steps) cfg.steps = *a.steps;
  if (a.data_length) cfg.data_length = *a.data_length;
  if (cfg.case_path.empty()) throw ValidationError("no case given (--case or config 'case')", "case");
  cfg.validate();

  const fs::path out(a.out);
  fs::create_directories(out);
  write_text(out / "config.resolved.json", config_to_json(cfg));

  const GridCase grid = load_case_json(cfg.case_path);
  const Scenario sc = prepare_scenario(grid, cfg);
  if (!a.save_data.empty()) save_trajectory_csv(sc.offline, a.save_data);
  for (const auto& c : cfg.controllers) {
    if (c != "seqid") continue;
    const PtdfEstimate est = seqid_estimate_ptdf(sc.offline, sc.model);
    write_ptdf(est.ptdf, sc.model, out / "ptdf.csv");
  }

  const auto results = compare_controllers(sc, cfg);
  write_outputs(out, results);
  std::printf("%-8s %16s %14s %8s %10s\n", "ctrl", "J_CL", "median_solve_s", "solves",
              "violations");
  for (const auto& r : results) {
    const RunMetrics& m = r.metrics;
    std::printf("%-8s %16.6f %14.6f %8zu %10zu\n", m.controller.c_str(), m.j_cl,
                m.median_solve_seconds(), m.solve_seconds.size(), m.violations.size());
  }
  return 0;
}

int run_identify(const IdentifyArgs& a) {
  const GridCase grid = load_case_json(a.case_path);
  const ReducedModel model = reduce(grid);
  const TrajectoryLog data = load_trajectory_csv(a.data);
  if (data.u.cols() != model.num_inputs() || data.w.cols() != model.num_demands() ||
      data.y.cols() != model.num_outputs()) {
    throw AlignmentError("trajectory columns do not match the case dimensions");
  }
  const PtdfEstimate est = seqid_estimate_ptdf(data, model);
  const EquivalenceReport rep = regression_equivalence_check(data, model);
  const double ptdf_error = (est.ptdf - model.ptdf).cwiseAbs().maxCoeff();

  const fs::path out(a.out);
  fs::create_directories(out);
  write_ptdf(est.ptdf, model, out / "ptdf.csv");
  nlohmann::json report = {{"injection_rank", est.rank},
                           {"required_rank", est.required_rank},
                           {"zero_injection_buses", est.zero_injection_buses},
                           {"ptdf_max_error", ptdf_error},
                           {"equivalence_deviation_u", rep.deviation_u},
                           {"equivalence_deviation_w", rep.deviation_w},
                           {"equivalence_max_deviation", rep.max_deviation},
                           {"equivalence_projected_deviation", rep.projected_deviation}};
  write_text(out / "identify.json", report.dump(2) + "\n");

  std::printf("injection rank: %d of %d\n", est.rank, est.required_rank);
  if (!est.zero_injection_buses.empty()) {
    std::printf("warning: no recorded injection at bus");
    for (int b : est.zero_injection_buses) std::printf(" %d", b);
    std::printf("\n");
  }
  std::printf("max |M_hat - M|: %.3e\n", ptdf_error);
  std::printf("regression equivalence deviation: %.3e (projected %.3e)\n", rep.max_deviation,
              rep.projected_deviation);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  log::configure_from_env();
  CLI::App app{"Multi-stage DC OPF lab: exact MPC, PTDF identification and data-driven control"};
  app.require_subcommand(1);

  ConvertArgs conv;
  auto* c = app.add_subcommand("convert", "Convert a MATPOWER case to case JSON");
  c->add_option("matpower", conv.matpower, "MATPOWER .m file")->required()->check(CLI::ExistingFile);
  c->add_option("--storage", conv.storage, "Storage augmentation JSON")->check(CLI::ExistingFile);
  c->add_option("--out,-o", conv.out, "Output case JSON")->required();
  c->add_option("--slack", conv.slack, "Slack bus id (default: bus of the first generator)");
  c->add_option("--flow-limit", conv.flow_limit, "Limit used where RATE_A is 0 (MW)");
  c->add_option("--delta", conv.delta, "Step length in hours");

  CheckArgs chk;
  auto* k = app.add_subcommand("check", "Print connectivity and dimension diagnostics");
  k->add_option("--case", chk.case_path, "Case JSON")->required()->check(CLI::ExistingFile);
  k->add_option("--horizon", chk.horizon, "Prediction horizon L")->check(CLI::PositiveNumber);
  k->add_option("--tini", chk.t_ini, "Initialization length T_ini")->check(CLI::PositiveNumber);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run the closed-loop comparison");
  s->add_option("--config", sim.config, "Experiment config JSON")->check(CLI::ExistingFile);
  s->add_option("--case", sim.case_path, "Case JSON (overrides the config)");
  s->add_option("--controller", sim.controller, "Controller")
      ->check(CLI::IsMember({"exact", "seqid", "ddopf", "all"}));
  s->add_option("--seed", sim.seed, "Base seed for excitation, noise and demand");
  s->add_option("--out", sim.out, "Output directory");
  s->add_option("--pe", sim.pe, "Persistency policy")->check(CLI::IsMember({"strict", "truncated"}));
  s->add_option("--tini", sim.t_ini, "Initialization length T_ini");
  s->add_option("--lambda", sim.lambda, "Regularization weight");
  s->add_option("--noise", sim.noise, "Flow noise-to-signal ratio");
  s->add_option("--horizon", sim.horizon, "Prediction horizon L");
  s->add_option("--control-horizon", sim.control_horizon, "Control horizon L_c");
  s->add_option("--steps", sim.steps, "Closed-loop steps");
  s->add_option("--data-length", sim.data_length, "Offline data length T");
  s->add_option("--save-data", sim.save_data, "Write the offline trajectory CSV");

  IdentifyArgs idf;
  auto* i = app.add_subcommand("identify", "Estimate the PTDF from recorded data");
  i->add_option("--case", idf.case_path, "Case JSON")->required()->check(CLI::ExistingFile);
  i->add_option("--data", idf.data, "Trajectory CSV (k,u_*,w_*,y_*)")
      ->required()
      ->check(CLI::ExistingFile);
  i->add_option("--out", idf.out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (c->parsed()) return run_convert(conv);
    if (k->parsed()) return run_check(chk);
    if (s->parsed()) return run_simulate(sim);
    if (i->parsed()) return run_identify(idf);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  } catch (const ConnectivityError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConnectivity;
  } catch (const InfeasibleSchedule& e) {
    std::fprintf(stderr, "error: %s (step %d)\n", e.what(), e.step());
    return kExitInfeasible;
  } catch (const PersistencyError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const InsufficientData& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
  return 0;
}
