#include "ddopf/experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "ddopf/errors.hpp"
#include "ddopf/log.hpp"
#include "json.hpp"

namespace ddopf {

namespace {

using nlohmann::json;

template <typename T>
void read(const json& obj, const char* key, T& target, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception&) {
    const std::string field = where.empty() ? key : where + "." + key;
    throw ValidationError("config field '" + field + "' has the wrong type", field);
  }
}

void warn_unknown(const json& obj, const std::string& where,
                  std::initializer_list<const char*> known) {
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      log::warn("ignoring unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

const json& object(const json& obj, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_object()) throw ValidationError(std::string("config field '") + key + "' must be an object", key);
  return v;
}

std::string_view to_string(InfeasibilityPolicy p) {
  return p == InfeasibilityPolicy::kAbort ? "abort" : "hold";
}

}  // namespace

std::string_view to_string(PePolicy policy) {
  return policy == PePolicy::kStrict ? "strict" : "truncated";
}

PePolicy parse_pe_policy(std::string_view text) {
  if (text == "strict") return PePolicy::kStrict;
  if (text == "truncated") return PePolicy::kTruncated;
  throw ValidationError("PE policy must be 'strict' or 'truncated', got '" + std::string(text) + "'",
                        "pe");
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ValidationError("config field '" + field + "' " + why, field);
  };
  if (horizon < 1) fail("horizon", "must be at least 1");
  if (control_horizon < 1 || control_horizon > horizon) {
    fail("control_horizon", "must lie in [1, horizon]");
  }
  if (steps < 1) fail("steps", "must be at least 1");
  if (data_length < 2) fail("data_length", "must be at least 2");
  if (lambda < 0.0) fail("lambda", "must be nonnegative");
  if (noise < 0.0) fail("noise", "must be nonnegative");
  if (t_ini < 1) fail("t_ini", "must be at least 1");
  if (excitation_amplitude < 0.0) fail("excitation_amplitude", "must be nonnegative");
  if (truncation_rank < 0) fail("truncation_rank", "must be nonnegative");
  if (segmented && full_past) fail("full_past", "requires segmented = false");
  for (const auto& c : controllers) {
    if (c != "exact" && c != "seqid" && c != "ddopf") {
      fail("controllers", "has unknown controller '" + c + "'");
    }
  }
}

void ExperimentConfig::set_seed(std::uint64_t base) {
  excitation_seed = base;
  noise_seed = base + 1;
  demand_seed = base + 2;
}

ExperimentConfig config_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what(), "");
  }
  if (!doc.is_object()) throw ValidationError("config must be a JSON object", "");
  warn_unknown(doc, "",
               {"case", "demand_csv", "controllers", "horizon", "control_horizon", "steps",
                "data_length", "lambda", "noise", "online_noise", "seeds", "pe", "t_ini",
                "segmented", "full_past", "truncation_rank", "excitation_amplitude",
                "demand_profile", "cost", "on_infeasible", "qp"});
  ExperimentConfig c;
  read(doc, "case", c.case_path, "");
  read(doc, "demand_csv", c.demand_csv, "");
  read(doc, "controllers", c.controllers, "");
  read(doc, "horizon", c.horizon, "");
  read(doc, "control_horizon", c.control_horizon, "");
  read(doc, "steps", c.steps, "");
  read(doc, "data_length", c.data_length, "");
  read(doc, "lambda", c.lambda, "");
  read(doc, "noise", c.noise, "");
  read(doc, "online_noise", c.online_noise, "");
  read(doc, "t_ini", c.t_ini, "");
  read(doc, "segmented", c.segmented, "");
  read(doc, "full_past", c.full_past, "");
  read(doc, "truncation_rank", c.truncation_rank, "");
  read(doc, "excitation_amplitude", c.excitation_amplitude, "");
  if (doc.contains("pe")) {
    std::string pe;
    read(doc, "pe", pe, "");
    c.pe = parse_pe_policy(pe);
  }
  if (doc.contains("on_infeasible")) {
    std::string p;
    read(doc, "on_infeasible", p, "");
    if (p == "abort") c.on_infeasible = InfeasibilityPolicy::kAbort;
    else if (p == "hold") c.on_infeasible = InfeasibilityPolicy::kHoldPrevious;
    else throw ValidationError("on_infeasible must be 'abort' or 'hold'", "on_infeasible");
  }
  if (doc.contains("seeds")) {
    const json& s = object(doc, "seeds");
    warn_unknown(s, "seeds", {"excitation", "noise", "demand"});
    read(s, "excitation", c.excitation_seed, "seeds");
    read(s, "noise", c.noise_seed, "seeds");
    read(s, "demand", c.demand_seed, "seeds");
  }
  if (doc.contains("demand_profile")) {
    const json& d = object(doc, "demand_profile");
    warn_unknown(d, "demand_profile",
                 {"amplitude", "period_hours", "phase", "fluctuation_std", "fluctuation_corr",
                  "floor"});
    read(d, "amplitude", c.demand.amplitude, "demand_profile");
    read(d, "period_hours", c.demand.period_hours, "demand_profile");
    read(d, "phase", c.demand.phase, "demand_profile");
    read(d, "fluctuation_std", c.demand.fluctuation_std, "demand_profile");
    read(d, "fluctuation_corr", c.demand.fluctuation_corr, "demand_profile");
    read(d, "floor", c.demand.floor, "demand_profile");
  }
  if (doc.contains("cost")) {
    const json& d = object(doc, "cost");
    warn_unknown(d, "cost", {"flow_weight", "price_slack"});
    read(d, "flow_weight", c.cost.flow_weight, "cost");
    read(d, "price_slack", c.cost.price_slack, "cost");
  }
  if (doc.contains("qp")) {
    const json& d = object(doc, "qp");
    warn_unknown(d, "qp", {"eps_abs", "eps_rel", "max_iter", "rho", "polish"});
    read(d, "eps_abs", c.qp.eps_abs, "qp");
    read(d, "eps_rel", c.qp.eps_rel, "qp");
    read(d, "max_iter", c.qp.max_iter, "qp");
    read(d, "rho", c.qp.rho, "qp");
    read(d, "polish", c.qp.polish, "qp");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  ExperimentConfig c = config_from_json(buf.str());
  // Relative paths inside a config file are relative to that file.
  const auto base = path.parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(c.case_path);
  resolve(c.demand_csv);
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json doc;
  doc["case"] = c.case_path;
  doc["demand_csv"] = c.demand_csv;
  doc["controllers"] = c.controllers;
  doc["horizon"] = c.horizon;
  doc["control_horizon"] = c.control_horizon;
  doc["steps"] = c.steps;
  doc["data_length"] = c.data_length;
  doc["lambda"] = c.lambda;
  doc["noise"] = c.noise;
  doc["online_noise"] = c.online_noise;
  doc["seeds"] = {{"excitation", c.excitation_seed}, {"noise", c.noise_seed},
                  {"demand", c.demand_seed}};
  doc["pe"] = std::string(to_string(c.pe));
  doc["t_ini"] = c.t_ini;
  doc["segmented"] = c.segmented;
  doc["full_past"] = c.full_past;
  doc["truncation_rank"] = c.truncation_rank;
  doc["excitation_amplitude"] = c.excitation_amplitude;
  doc["demand_profile"] = {{"amplitude", c.demand.amplitude},
                           {"period_hours", c.demand.period_hours},
                           {"phase", c.demand.phase},
                           {"fluctuation_std", c.demand.fluctuation_std},
                           {"fluctuation_corr", c.demand.fluctuation_corr},
                           {"floor", c.demand.floor}};
  doc["cost"] = {{"flow_weight", c.cost.flow_weight}, {"price_slack", c.cost.price_slack}};
  doc["on_infeasible"] = std::string(to_string(c.on_infeasible));
  doc["qp"] = {{"eps_abs", c.qp.eps_abs},
               {"eps_rel", c.qp.eps_rel},
               {"max_iter", c.qp.max_iter},
               {"rho", c.qp.rho},
               {"polish", c.qp.polish}};
  return doc.dump(2) + "\n";
}

Scenario prepare_scenario(const GridCase& grid, const ExperimentConfig& config) {
  config.validate();
  Scenario sc;
  sc.grid = grid;
  sc.grid.validate();
  sc.model = reduce(sc.grid);
  sc.plant = assemble_descriptor(sc.model, sc.grid.delta_hours);
  sc.cost = make_stage_cost(sc.grid, sc.model, config.cost);
  sc.bounds = make_bounds(sc.grid, sc.model);

  const int total = config.data_length + config.steps + config.horizon;
  if (!config.demand_csv.empty()) {
    sc.demand = load_demand_csv(config.demand_csv, sc.grid);
    if (sc.demand.steps() < total) {
      throw InsufficientData("demand CSV has " + std::to_string(sc.demand.steps()) +
                             " rows, the experiment needs " + std::to_string(total));
    }
  } else {
    sc.demand = generate_demand_series(sc.grid, total, config.demand_seed, config.demand);
  }

  Vector e0(sc.grid.storages.size());
  for (std::size_t s = 0; s < sc.grid.storages.size(); ++s) e0(s) = sc.grid.storages[s].e0;

  ExcitationOptions ex;
  ex.amplitude = config.excitation_amplitude;
  ex.seed = config.excitation_seed;
  ex.replan_horizon = config.horizon;
  ex.policy = config.pe;
  ex.pe_order = config.t_ini + (config.segmented ? 1 : config.horizon) + sc.model.num_storages();
  sc.offline_clean = generate_excitation(sc.plant, sc.model, sc.cost, sc.bounds,
                                         sc.demand.values, e0, config.data_length, ex);
  sc.offline = add_measurement_noise(sc.offline_clean, sc.plant.layout, config.noise,
                                     config.noise_seed);
  sc.e_start = final_charge(sc.plant, sc.offline_clean);
  return sc;
}

std::unique_ptr<Controller> make_controller(std::string_view kind, const Scenario& sc,
                                            const ExperimentConfig& config) {
  if (kind == "exact") {
    return std::make_unique<ExactMpc>(sc.model, sc.cost, sc.bounds, config.horizon, config.qp);
  }
  if (kind == "seqid") {
    const PtdfEstimate est = seqid_estimate_ptdf(sc.offline, sc.model);
    return make_seqid_controller(sc.model, est, sc.cost, sc.bounds, config.horizon, config.qp);
  }
  if (kind == "ddopf") {
    DdOpfOptions opt;
    opt.t_ini = config.t_ini;
    opt.horizon = config.horizon;
    opt.lambda = config.lambda;
    opt.segmented = config.segmented;
    opt.full_past = config.full_past;
    opt.policy = config.pe;
    opt.truncation_rank = config.truncation_rank;
    return std::make_unique<DdOpf>(sc.offline, sc.model, sc.cost, sc.bounds, opt, config.qp);
  }
  throw InvalidParameter("unknown controller '" + std::string(kind) + "'");
}

LoopResult run_controller(std::string_view kind, const Scenario& sc,
                          const ExperimentConfig& config) {
  auto controller = make_controller(kind, sc, config);
  LoopOptions lo;
  lo.steps = config.steps;
  lo.control_horizon = config.control_horizon;
  lo.on_infeasible = config.on_infeasible;
  lo.online_noise = config.online_noise ? config.noise : 0.0;
  lo.noise_seed = config.noise_seed ^ 0x9e3779b97f4a7c15ULL;
  const Matrix demand = sc.demand.values.bottomRows(sc.demand.steps() - config.data_length);
  return closed_loop(sc.plant, *controller, sc.cost, sc.bounds, demand, sc.offline, sc.e_start,
                     lo);
}

std::vector<LoopResult> compare_controllers(const Scenario& sc, const ExperimentConfig& config) {
  std::vector<LoopResult> out;
  for (const auto& kind : config.controllers) {
    log::info("running controller " + kind);
    out.push_back(run_controller(kind, sc, config));
  }
  return out;
}

std::string metrics_json(const std::vector<LoopResult>& results) {
  json doc = json::object();
  for (const auto& r : results) {
    const RunMetrics& m = r.metrics;
    json flows = json::array();
    for (const auto& v : m.violations) {
      if (v.kind != "flow") continue;
      flows.push_back({{"step", v.step}, {"branch", v.index}, {"value", v.value},
                       {"limit", v.limit}, {"margin", v.margin}});
    }
    doc[m.controller] = {{"J_CL", m.j_cl},
                         {"median_solve_s", m.median_solve_seconds()},
                         {"solves", m.solve_seconds.size()},
                         {"violations", m.violations.size()},
                         {"flow_violations", flows},
                         {"infeasible_solves", m.infeasible_solves}};
  }
  return doc.dump(2) + "\n";
}

void write_outputs(const std::filesystem::path& dir, const std::vector<LoopResult>& results) {
  std::filesystem::create_directories(dir);
  std::vector<ResultRow> rows;
  for (const auto& r : results) {
    auto part = result_rows(r);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  save_results_csv(rows, dir / "results.csv");
  std::ofstream out(dir / "metrics.json");
  if (!out) throw Error("cannot write " + (dir / "metrics.json").string());
  out << metrics_json(results);
}

}  // namespace ddopf
