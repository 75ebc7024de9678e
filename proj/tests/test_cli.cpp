#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "ddopf/case_io.hpp"
#include "ddopf/netmodel.hpp"
#include "support/fixtures.hpp"

namespace ddopf {
namespace {

namespace fs = std::filesystem;
using testing::data_path;

struct CliRun {
  int code = -1;
  std::string output;  // stdout and stderr
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(DDOPF_CLI_PATH) + " " + args + " 2>&1";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ddopf_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

TEST(Cli, ConvertStock118IsIdempotent) {
  const fs::path dir = scratch("convert");
  const std::string base = "convert " + quoted(data_path("case118.m")) + " --storage " +
                           quoted(data_path("case118_storage.json"));
  const CliRun a = run(base + " --out " + quoted(dir / "a.json"));
  ASSERT_EQ(a.code, 0) << a.output;
  const CliRun b = run(base + " --out " + quoted(dir / "b.json"));
  ASSERT_EQ(b.code, 0) << b.output;
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  const GridCase g = load_case_json(dir / "a.json");
  EXPECT_EQ(g.generators.size() + g.storages.size(), 58u);
  EXPECT_EQ(g.storages.size(), 4u);
  EXPECT_EQ(g.branches.size(), 186u);
  EXPECT_EQ(g.demands.size(), 99u);
}

TEST(Cli, ConvertMalformedRowReportsLine) {
  const fs::path dir = scratch("convert_bad");
  std::ofstream(dir / "bad.m") << "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0;\n2 1;\n];\n";
  const CliRun r = run("convert " + quoted(dir / "bad.m") + " --out " + quoted(dir / "x.json"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find(":4"), std::string::npos) << r.output;
}

TEST(Cli, Check118Dimensions) {
  const CliRun r = run("check --case " + quoted(data_path("case118.json")));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("n_u 57, n_w 99, n_y 191, q 4, s 1"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("behavior dimension (T_ini = 1): 316"), std::string::npos);
  EXPECT_NE(r.output.find("segmented stack rows: 355"), std::string::npos);
  EXPECT_NE(r.output.find("minimum T (strict PE): 3139"), std::string::npos);
  EXPECT_NE(r.output.find("R-controllable: yes"), std::string::npos);
}

TEST(Cli, CheckDisconnectedNamesComponents) {
  const fs::path dir = scratch("check_disc");
  GridCase g = load_case_json(data_path("case3_triangle.json"));
  g.buses.push_back({4, 0.0});
  g.buses.push_back({5, 0.0});
  g.branches.push_back({4, 5, 0.1, 1.0, 100.0});
  std::ofstream(dir / "disc.json") << case_to_json_string(g);
  const CliRun r = run("check --case " + quoted(dir / "disc.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("component 2: buses 4 5"), std::string::npos) << r.output;
}

TEST(Cli, CheckStorageFreeCase) {
  const fs::path dir = scratch("check_nostorage");
  GridCase g = load_case_json(data_path("case3_triangle.json"));
  g.storages.clear();
  std::ofstream(dir / "c.json") << case_to_json_string(g);
  const CliRun r = run("check --case " + quoted(dir / "c.json"));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("q = 0, T_ini = 0"), std::string::npos) << r.output;
}

TEST(Cli, SimulateWritesOutputsAndIsReproducible) {
  const std::string args = "simulate --case " + quoted(data_path("case6ww.json")) +
                           " --controller all --steps 96 --horizon 6 --data-length 150 --seed 4";
  const fs::path a = scratch("sim_a");
  const fs::path b = scratch("sim_b");
  const CliRun ra = run(args + " --out " + quoted(a));
  ASSERT_EQ(ra.code, 0) << ra.output;
  const CliRun rb = run(args + " --out " + quoted(b));
  ASSERT_EQ(rb.code, 0) << rb.output;
  for (const char* f : {"config.resolved.json", "results.csv", "metrics.json", "ptdf.csv"}) {
    EXPECT_TRUE(fs::exists(a / f)) << f;
  }
  EXPECT_NE(ra.output.find("exact"), std::string::npos);
  EXPECT_NE(ra.output.find("seqid"), std::string::npos);
  EXPECT_NE(ra.output.find("ddopf"), std::string::npos);
  EXPECT_EQ(slurp(a / "config.resolved.json"), slurp(b / "config.resolved.json"));
  EXPECT_EQ(slurp(a / "ptdf.csv"), slurp(b / "ptdf.csv"));

  // Everything except wall-clock timings is byte-identical.
  auto strip = [](const fs::path& p) {
    std::ifstream in(p);
    std::string line, out;
    std::getline(in, line);
    out += line + "\n";
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::stringstream ss(line);
      for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
      cells[4] = "";
      for (const auto& c : cells) out += c + ",";
      out += "\n";
    }
    return out;
  };
  EXPECT_EQ(strip(a / "results.csv"), strip(b / "results.csv"));
  auto ma = nlohmann::json::parse(slurp(a / "metrics.json"));
  auto mb = nlohmann::json::parse(slurp(b / "metrics.json"));
  for (auto* m : {&ma, &mb}) {
    for (auto& [k, v] : m->items()) v.erase("median_solve_s");
  }
  EXPECT_EQ(ma, mb);

  // 96 rows per controller plus the header.
  const std::string csv = slurp(a / "results.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3 * 96 + 1);
}

TEST(Cli, SimulateFromConfigFileWithOverride) {
  const fs::path dir = scratch("sim_cfg");
  nlohmann::json cfg = {{"case", data_path("case3_triangle.json").string()},
                        {"controllers", {"exact"}},
                        {"horizon", 4},
                        {"steps", 10},
                        {"data_length", 60},
                        {"seeds", {{"excitation", 5}, {"noise", 6}, {"demand", 7}}}};
  std::ofstream(dir / "cfg.json") << cfg.dump();
  const CliRun r = run("simulate --config " + quoted(dir / "cfg.json") + " --steps 8 --out " +
                    quoted(dir / "out"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto resolved = nlohmann::json::parse(slurp(dir / "out" / "config.resolved.json"));
  EXPECT_EQ(resolved["steps"], 8);
  EXPECT_EQ(resolved["horizon"], 4);
  EXPECT_EQ(resolved["seeds"]["demand"], 7);
  EXPECT_FALSE(fs::exists(dir / "out" / "ptdf.csv"));
}

TEST(Cli, SimulateErrorClassesMapToExitCodes) {
  const fs::path dir = scratch("sim_err");
  // Missing case file.
  EXPECT_EQ(run("simulate --case " + quoted(dir / "nope.json") + " --out " + quoted(dir)).code, 1);
  // Strict persistency with far too little data.
  const CliRun pe = run("simulate --case " + quoted(data_path("case6ww.json")) +
                     " --pe strict --data-length 20 --steps 4 --horizon 4 --out " + quoted(dir));
  EXPECT_EQ(pe.code, 4) << pe.output;
  // Demand no dispatch can serve.
  GridCase g = load_case_json(data_path("case3_triangle.json"));
  g.buses[2].demand_mw = 500.0;
  std::ofstream(dir / "heavy.json") << case_to_json_string(g);
  const CliRun inf = run("simulate --case " + quoted(dir / "heavy.json") +
                      " --controller exact --steps 4 --horizon 4 --data-length 40 --out " + quoted(dir));
  EXPECT_EQ(inf.code, 3) << inf.output;
  // Flag validation.
  EXPECT_NE(run("simulate --controller nonsense").code, 0);
  EXPECT_EQ(run("simulate --case " + quoted(data_path("case3_triangle.json")) +
                " --horizon 4 --control-horizon 5 --out " + quoted(dir))
                .code,
            1);
}

TEST(Cli, IdentifyRecoversPtdfOnCleanData) {
  const fs::path dir = scratch("identify");
  const CliRun sim = run("simulate --case " + quoted(data_path("case14.json")) +
                      " --controller exact --noise 0 --steps 2 --horizon 4 --data-length 120 --save-data " +
                      quoted(dir / "data.csv") + " --out " + quoted(dir / "sim"));
  ASSERT_EQ(sim.code, 0) << sim.output;
  const CliRun r = run("identify --case " + quoted(data_path("case14.json")) + " --data " +
                    quoted(dir / "data.csv") + " --out " + quoted(dir / "id"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("no recorded injection at bus 7"), std::string::npos) << r.output;
  const auto rep = nlohmann::json::parse(slurp(dir / "id" / "identify.json"));
  EXPECT_LT(rep["equivalence_projected_deviation"].get<double>(), 1e-8);
  EXPECT_EQ(rep["zero_injection_buses"], nlohmann::json::array({7}));
  EXPECT_TRUE(fs::exists(dir / "id" / "ptdf.csv"));

  const fs::path dir6 = scratch("identify6");
  ASSERT_EQ(run("simulate --case " + quoted(data_path("case6ww.json")) +
                " --controller exact --noise 0 --steps 2 --horizon 4 --data-length 120 --save-data " +
                quoted(dir6 / "data.csv") + " --out " + quoted(dir6 / "sim"))
                .code,
            0);
  const CliRun r6 = run("identify --case " + quoted(data_path("case6ww.json")) + " --data " +
                     quoted(dir6 / "data.csv") + " --out " + quoted(dir6 / "id"));
  ASSERT_EQ(r6.code, 0) << r6.output;
  const auto rep6 = nlohmann::json::parse(slurp(dir6 / "id" / "identify.json"));
  EXPECT_LT(rep6["ptdf_max_error"].get<double>(), 1e-8);
  EXPECT_LT(rep6["equivalence_max_deviation"].get<double>(), 1e-8);
}

TEST(Cli, NoSubcommandFails) { EXPECT_NE(run("").code, 0); }

}  // namespace
}  // namespace ddopf
