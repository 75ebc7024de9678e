#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddopf/linalg.hpp"
#include "ddopf/netmodel.hpp"

namespace ddopf {

// Numeric matrices of a MATPOWER case file, columns as in the file.
struct RawMatpowerCase {
  double base_mva = 100.0;
  Matrix bus;
  Matrix branch;
  Matrix gen;
  Matrix gencost;
};

// Grammar: `mpc.<name> = [ rows ];` with rows separated by `;` or newlines
// and entries by whitespace or commas; `%` starts a comment. Unknown fields
// (including cell arrays and strings) are skipped. source is used in error
// messages only.
RawMatpowerCase parse_matpower(std::string_view text, std::string_view source = "<input>");
RawMatpowerCase load_matpower(const std::filesystem::path& path);

struct StorageAugmentation {
  std::vector<Storage> storages;
};

StorageAugmentation load_augmentation_json(const std::filesystem::path& path);

struct ConversionOptions {
  std::optional<int> slack_bus;   // default: bus of first in-service generator
  double default_flow_limit = 300.0;  // replaces RATE_A = 0
  double delta_hours = 0.25;
};

GridCase to_grid_case(const RawMatpowerCase& raw, const StorageAugmentation& aug,
                      const ConversionOptions& options = {});

// Unknown keys are accepted and reported through the log and, when given,
// appended to warnings.
GridCase load_case_json(const std::filesystem::path& path,
                        std::vector<std::string>* warnings = nullptr);
GridCase case_from_json_string(std::string_view text,
                               std::vector<std::string>* warnings = nullptr);
void save_case_json(const GridCase& grid, const std::filesystem::path& path);
std::string case_to_json_string(const GridCase& grid);

// Time steps x |D| in case column order (column k feeds demand with column k).
struct DemandSeries {
  Matrix values;
  double delta_hours = 0.25;

  Eigen::Index steps() const { return values.rows(); }
};

DemandSeries load_demand_csv(const std::filesystem::path& path, const GridCase& grid);
void save_demand_csv(const DemandSeries& series, const GridCase& grid,
                     const std::filesystem::path& path);

struct ResultRow {
  int step = 0;
  std::string controller;
  double stage_cost = 0.0;
  double max_abs_flow = 0.0;
  double solve_seconds = 0.0;  // zero on steps without a fresh solve
  Vector storage;              // charge after the step, MWh
};

void save_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path);

// Small CSV helpers shared by the trajectory and PTDF writers.
void write_matrix_csv(const Matrix& m, const std::vector<std::string>& header,
                      const std::filesystem::path& path);

struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace ddopf
