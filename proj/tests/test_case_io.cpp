#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ddopf/case_io.hpp"
#include "ddopf/errors.hpp"
#include "support/fixtures.hpp"

namespace ddopf {
namespace {

namespace fs = std::filesystem;
using testing::data_path;
using testing::load_fixture;

constexpr const char* kSmallCase = R"(function mpc = small
mpc.version = '2';
mpc.baseMVA = 100;
%% bus data
mpc.bus = [
	1	3	0	0	0	0	1	1	0	135	1	1.05	0.94;
	2	1	40	10	0	0	1	1	0	135	1	1.05	0.94;
	3	1	25.5e0	5	0	0	1	1	0	135	1	1.05	0.94;
];
mpc.gen = [
	1	0	0	100	-100	1	100	1	250	10;
	2	0	0	100	-100	1	100	0	80	0;
	3	0	0	100	-100	1	100	1	90	0;
];
mpc.branch = [
	1	2	0.01	0.05	0	0	0	0	0	0	1	-360	360;
	2	3	0.01	0.1	0	120	0	0	0.98	0	1	-360	360;
	1	3	0.01	0.2	0	0	0	0	0	0	0	-360	360;
	1	3	0.01	0.25	0	80	0	0	0	0	1	-360	360;
];
mpc.gencost = [
	2	0	0	3	0.01	20	0;
	2	0	0	3	0.02	25	0;
	2	0	0	2	30	0	0;
];
mpc.bus_name = { 'a'; 'b'; 'c' };
)";

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ddopf_case_io_test";
  fs::create_directories(dir);
  return dir / name;
}

TEST(Matpower, ParsesMatricesAndBaseMva) {
  const RawMatpowerCase raw = parse_matpower(kSmallCase);
  EXPECT_EQ(raw.base_mva, 100.0);
  EXPECT_EQ(raw.bus.rows(), 3);
  EXPECT_EQ(raw.branch.rows(), 4);
  EXPECT_EQ(raw.branch.cols(), 13);
  EXPECT_EQ(raw.branch(0, 3), 0.05);
  EXPECT_EQ(raw.bus(2, 2), 25.5);
  EXPECT_EQ(raw.gencost.rows(), 3);
}

TEST(Matpower, CommentsDoNotChangeTheResult) {
  std::string commented;
  std::istringstream in(kSmallCase);
  for (std::string line; std::getline(in, line);) {
    commented += "% interleaved comment ; 1 2 3\n" + line + "  % trailing [ ]\n";
  }
  const RawMatpowerCase a = parse_matpower(kSmallCase);
  const RawMatpowerCase b = parse_matpower(commented);
  EXPECT_EQ(a.bus, b.bus);
  EXPECT_EQ(a.branch, b.branch);
  EXPECT_EQ(a.gen, b.gen);
  EXPECT_EQ(a.gencost, b.gencost);
}

TEST(Matpower, RaggedRowReportsLine) {
  const std::string text = "mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0;\n2 1;\n];\n";
  try {
    parse_matpower(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4);
  }
}

TEST(Matpower, MissingFieldsAreReported) {
  EXPECT_THROW(parse_matpower("mpc.baseMVA = 100;\nmpc.bus = [1 3 0];\n"), MissingField);
  EXPECT_THROW(parse_matpower("mpc.bus = [1 3 0];\nmpc.gen=[1];\nmpc.branch=[1];\n"), MissingField);
}

TEST(Matpower, ConversionMapsColumnsAndDropsOutOfService) {
  const GridCase g = to_grid_case(parse_matpower(kSmallCase), {});
  ASSERT_EQ(g.generators.size(), 2u);  // status-0 generator dropped
  EXPECT_EQ(g.generators[1].bus, 3);
  EXPECT_EQ(g.generators[0].p_max, 250.0);
  EXPECT_EQ(g.generators[0].p_min, 10.0);
  EXPECT_EQ(g.generators[0].cost_quadratic, 0.01);
  EXPECT_EQ(g.generators[0].cost_linear, 20.0);
  // Third gencost row is linear only; the second gencost row belongs to the
  // dropped generator.
  EXPECT_EQ(g.generators[1].cost_quadratic, 0.0);
  EXPECT_EQ(g.generators[1].cost_linear, 30.0);

  ASSERT_EQ(g.branches.size(), 3u);  // status-0 branch dropped
  EXPECT_EQ(g.branches[0].tap, 1.0);
  EXPECT_EQ(g.branches[0].f_max, 300.0);  // RATE_A = 0
  EXPECT_EQ(g.branches[1].tap, 0.98);
  EXPECT_EQ(g.branches[1].f_max, 120.0);
  EXPECT_EQ(g.branches[2].x, 0.25);

  ASSERT_EQ(g.demands.size(), 2u);
  EXPECT_EQ(g.demands[0].bus, 2);
  EXPECT_EQ(g.demands[1].column, 1);
  EXPECT_EQ(g.slack_bus, 1);
}

TEST(Matpower, SlackOverrideAndFlowLimit) {
  ConversionOptions opt;
  opt.slack_bus = 3;
  opt.default_flow_limit = 500.0;
  const GridCase g = to_grid_case(parse_matpower(kSmallCase), {}, opt);
  EXPECT_EQ(g.slack_bus, 3);
  EXPECT_EQ(g.branches[0].f_max, 500.0);
}

TEST(Matpower, UnsupportedCostsRejected) {
  std::string cubic = kSmallCase;
  cubic.replace(cubic.find("2\t0\t0\t3\t0.01"), 13, "2\t0\t0\t4\t1");
  EXPECT_THROW(to_grid_case(parse_matpower(cubic), {}), Error);
  std::string pwl = kSmallCase;
  pwl.replace(pwl.find("2\t0\t0\t3\t0.01"), 1, "1");
  EXPECT_THROW(to_grid_case(parse_matpower(pwl), {}), UnsupportedCost);
}

TEST(Matpower, UnknownGeneratorBusRejected) {
  std::string text = kSmallCase;
  text.replace(text.find("\t3\t0\t0\t100\t-100\t1\t100\t1\t90"), 2, "\t9");
  EXPECT_THROW(to_grid_case(parse_matpower(text), {}), ReferenceError);
}

TEST(Matpower, StockCase118WithAugmentation) {
  const RawMatpowerCase raw = load_matpower(data_path("case118.m"));
  const StorageAugmentation aug = load_augmentation_json(data_path("case118_storage.json"));
  const GridCase g = to_grid_case(raw, aug);
  ASSERT_EQ(g.storages.size(), 4u);
  const std::vector<int> buses{21, 59, 89, 116};
  for (std::size_t s = 0; s < 4; ++s) {
    EXPECT_EQ(g.storages[s].bus, buses[s]);
    EXPECT_EQ(g.storages[s].e_max, 200.0);
    EXPECT_EQ(g.storages[s].s_max, 50.0);
  }
  EXPECT_EQ(g.buses.size(), 118u);
  EXPECT_EQ(g.demands.size(), 99u);
  // The shipped JSON is the output of this conversion.
  EXPECT_EQ(g, load_fixture("case118.json"));
}

TEST(CaseJson, RoundTripIsIdentity) {
  for (const char* name : {"case3_triangle.json", "case6ww.json", "case14.json", "case118.json"}) {
    const GridCase g = load_fixture(name);
    const fs::path p = temp_file(std::string("rt_") + name);
    save_case_json(g, p);
    EXPECT_EQ(load_case_json(p), g) << name;
    EXPECT_EQ(case_from_json_string(case_to_json_string(g)), g) << name;
  }
}

TEST(CaseJson, MissingBranchesIsValidationError) {
  auto j = nlohmann::json::parse(case_to_json_string(load_fixture("case3_triangle.json")));
  j.erase("branches");
  try {
    case_from_json_string(j.dump());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "branches");
  }
}

TEST(CaseJson, WrongTypeNamesTheField) {
  auto j = nlohmann::json::parse(case_to_json_string(load_fixture("case3_triangle.json")));
  j["generators"][1]["p_max"] = "lots";
  try {
    case_from_json_string(j.dump());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(e.field().find("p_max"), std::string::npos);
  }
}

TEST(CaseJson, UnknownKeysAcceptedWithWarning) {
  auto j = nlohmann::json::parse(case_to_json_string(load_fixture("case3_triangle.json")));
  j["comment"] = "forward compatible";
  std::vector<std::string> warnings;
  const GridCase g = case_from_json_string(j.dump(), &warnings);
  EXPECT_EQ(g, load_fixture("case3_triangle.json"));
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("comment"), std::string::npos);
}

TEST(DemandCsv, AlignsColumnsByBusId) {
  const GridCase g = load_fixture("case6ww.json");
  ASSERT_EQ(g.demands.size(), 3u);
  const fs::path p = temp_file("demand.csv");
  {
    std::ofstream out(p);
    // Columns deliberately out of case order.
    out << "bus_" << g.demands[2].bus << ",bus_" << g.demands[0].bus << ",bus_" << g.demands[1].bus
        << "\n";
    for (int k = 0; k < 96; ++k) out << 30 + k << "," << 10 + k << "," << 20 + k << "\n";
  }
  const DemandSeries d = load_demand_csv(p, g);
  ASSERT_EQ(d.values.rows(), 96);
  ASSERT_EQ(d.values.cols(), 3);
  EXPECT_EQ(d.values(5, 0), 15.0);
  EXPECT_EQ(d.values(5, 1), 25.0);
  EXPECT_EQ(d.values(5, 2), 35.0);

  const fs::path q = temp_file("demand_rt.csv");
  save_demand_csv(d, g, q);
  EXPECT_EQ(load_demand_csv(q, g).values, d.values);
}

TEST(DemandCsv, UnknownBusIsAlignmentError) {
  const GridCase g = load_fixture("case3_triangle.json");
  const fs::path p = temp_file("demand_bad.csv");
  {
    std::ofstream out(p);
    out << "bus_7\n1\n2\n";
  }
  EXPECT_THROW(load_demand_csv(p, g), AlignmentError);
}

TEST(ResultsCsv, HeaderAndRows) {
  std::vector<ResultRow> rows;
  for (const char* ctrl : {"exact", "ddopf"}) {
    for (int k = 0; k < 3; ++k) {
      ResultRow r;
      r.step = k;
      r.controller = ctrl;
      r.stage_cost = 1.5 * k;
      r.max_abs_flow = 10.0;
      r.solve_seconds = 0.01;
      r.storage = Vector::Constant(2, 4.0 + k);
      rows.push_back(r);
    }
  }
  const fs::path p = temp_file("results.csv");
  save_results_csv(rows, p);
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[0], "step,controller,stage_cost,max_abs_flow,solve_seconds,e_1,e_2");
  EXPECT_EQ(lines[4].substr(0, 8), "0,ddopf,");
}

}  // namespace
}  // namespace ddopf
