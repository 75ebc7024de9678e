#include "ddopf/case_io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "ddopf/errors.hpp"
#include "ddopf/log.hpp"
#include "json.hpp"

namespace ddopf {
namespace {

using nlohmann::json;

class Reader {
 public:
  explicit Reader(std::vector<std::string>* warnings) : warnings_(warnings) {}

  // Checks that obj is an object, reports keys outside `known`.
  void expect_object(const json& obj, const std::string& where,
                     std::initializer_list<const char*> known) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object", where);
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, _] : obj.items()) {
      if (!allowed.count(key)) {
        const std::string msg = "ignoring unknown key '" + where + "." + key + "'";
        log::warn(msg);
        if (warnings_) warnings_->push_back(msg);
      }
    }
  }

  double number(const json& obj, const std::string& where, const char* key,
                std::optional<double> fallback = std::nullopt) {
    const std::string field = where + "." + key;
    if (!obj.contains(key)) {
      if (fallback) return *fallback;
      throw ValidationError("missing field '" + field + "'", field);
    }
    const auto& v = obj.at(key);
    if (!v.is_number()) throw ValidationError("field '" + field + "' must be a number", field);
    return v.get<double>();
  }

  int integer(const json& obj, const std::string& where, const char* key) {
    const std::string field = where + "." + key;
    if (!obj.contains(key)) throw ValidationError("missing field '" + field + "'", field);
    const auto& v = obj.at(key);
    if (!v.is_number_integer()) {
      throw ValidationError("field '" + field + "' must be an integer", field);
    }
    return v.get<int>();
  }

  const json& array(const json& obj, const char* key) {
    if (!obj.contains(key)) {
      throw ValidationError(std::string("missing field '") + key + "'", key);
    }
    const auto& v = obj.at(key);
    if (!v.is_array()) throw ValidationError(std::string("field '") + key + "' must be an array", key);
    return v;
  }

 private:
  std::vector<std::string>* warnings_;
};

Storage read_storage(Reader& r, const json& o, const std::string& where) {
  r.expect_object(o, where,
                  {"bus", "e_min", "e_max", "s_min", "s_max", "e0", "cost_power_quadratic",
                   "cost_energy_quadratic"});
  Storage s;
  s.bus = r.integer(o, where, "bus");
  s.e_min = r.number(o, where, "e_min");
  s.e_max = r.number(o, where, "e_max");
  s.s_min = r.number(o, where, "s_min");
  s.s_max = r.number(o, where, "s_max");
  s.e0 = r.number(o, where, "e0");
  s.cost_power_quadratic = r.number(o, where, "cost_power_quadratic", 0.0);
  s.cost_energy_quadratic = r.number(o, where, "cost_energy_quadratic", 0.0);
  return s;
}

json storage_json(const Storage& s) {
  return {{"bus", s.bus},
          {"e_min", s.e_min},
          {"e_max", s.e_max},
          {"s_min", s.s_min},
          {"s_max", s.s_max},
          {"e0", s.e0},
          {"cost_power_quadratic", s.cost_power_quadratic},
          {"cost_energy_quadratic", s.cost_energy_quadratic}};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what(), "");
  }
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return out.str();
}

}  // namespace

GridCase case_from_json_string(std::string_view text, std::vector<std::string>* warnings) {
  const json doc = parse_json(text);
  Reader r(warnings);
  r.expect_object(doc, "case",
                  {"buses", "branches", "generators", "storages", "demands", "slack_bus",
                   "delta_hours"});
  GridCase grid;

  const auto& buses = r.array(doc, "buses");
  for (std::size_t i = 0; i < buses.size(); ++i) {
    const std::string where = "buses[" + std::to_string(i) + "]";
    r.expect_object(buses[i], where, {"id", "demand_mw"});
    grid.buses.push_back({r.integer(buses[i], where, "id"),
                          r.number(buses[i], where, "demand_mw", 0.0)});
  }
  const auto& branches = r.array(doc, "branches");
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const std::string where = "branches[" + std::to_string(i) + "]";
    const auto& o = branches[i];
    r.expect_object(o, where, {"from", "to", "x", "tap", "f_max"});
    grid.branches.push_back({r.integer(o, where, "from"), r.integer(o, where, "to"),
                             r.number(o, where, "x"), r.number(o, where, "tap", 1.0),
                             r.number(o, where, "f_max")});
  }
  const auto& gens = r.array(doc, "generators");
  for (std::size_t i = 0; i < gens.size(); ++i) {
    const std::string where = "generators[" + std::to_string(i) + "]";
    const auto& o = gens[i];
    r.expect_object(o, where, {"bus", "p_min", "p_max", "cost_quadratic", "cost_linear"});
    grid.generators.push_back({r.integer(o, where, "bus"), r.number(o, where, "p_min"),
                               r.number(o, where, "p_max"),
                               r.number(o, where, "cost_quadratic", 0.0),
                               r.number(o, where, "cost_linear", 0.0)});
  }
  if (doc.contains("storages")) {
    const auto& st = r.array(doc, "storages");
    for (std::size_t i = 0; i < st.size(); ++i) {
      grid.storages.push_back(read_storage(r, st[i], "storages[" + std::to_string(i) + "]"));
    }
  }
  const auto& demands = r.array(doc, "demands");
  for (std::size_t i = 0; i < demands.size(); ++i) {
    const std::string where = "demands[" + std::to_string(i) + "]";
    r.expect_object(demands[i], where, {"bus", "column"});
    grid.demands.push_back({r.integer(demands[i], where, "bus"),
                            r.integer(demands[i], where, "column")});
  }
  grid.slack_bus = r.integer(doc, "case", "slack_bus");
  grid.delta_hours = r.number(doc, "case", "delta_hours", 0.25);

  try {
    grid.validate();
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw ValidationError(std::string("invalid case: ") + e.what(), "case");
  }
  return grid;
}

GridCase load_case_json(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  try {
    return case_from_json_string(read_file(path), warnings);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what(), e.field());
  }
}

std::string case_to_json_string(const GridCase& grid) {
  json doc;
  doc["buses"] = json::array();
  for (const auto& b : grid.buses) doc["buses"].push_back({{"id", b.id}, {"demand_mw", b.demand_mw}});
  doc["branches"] = json::array();
  for (const auto& br : grid.branches) {
    doc["branches"].push_back(
        {{"from", br.from}, {"to", br.to}, {"x", br.x}, {"tap", br.tap}, {"f_max", br.f_max}});
  }
  doc["generators"] = json::array();
  for (const auto& g : grid.generators) {
    doc["generators"].push_back({{"bus", g.bus},
                                 {"p_min", g.p_min},
                                 {"p_max", g.p_max},
                                 {"cost_quadratic", g.cost_quadratic},
                                 {"cost_linear", g.cost_linear}});
  }
  doc["storages"] = json::array();
  for (const auto& s : grid.storages) doc["storages"].push_back(storage_json(s));
  doc["demands"] = json::array();
  for (const auto& d : grid.demands) doc["demands"].push_back({{"bus", d.bus}, {"column", d.column}});
  doc["slack_bus"] = grid.slack_bus;
  doc["delta_hours"] = grid.delta_hours;
  return doc.dump(2) + "\n";
}

void save_case_json(const GridCase& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << case_to_json_string(grid);
}

StorageAugmentation load_augmentation_json(const std::filesystem::path& path) {
  const json doc = parse_json(read_file(path));
  Reader r(nullptr);
  r.expect_object(doc, "augmentation", {"storages"});
  StorageAugmentation aug;
  const auto& st = r.array(doc, "storages");
  for (std::size_t i = 0; i < st.size(); ++i) {
    aug.storages.push_back(read_storage(r, st[i], "storages[" + std::to_string(i) + "]"));
  }
  return aug;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  CsvTable table;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      out.push_back(cell);
    }
    return out;
  };
  if (!std::getline(in, line)) throw AlignmentError(path.string() + ": empty CSV file");
  table.header = split(line);
  std::vector<std::vector<double>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(table.header.size()) + " columns",
                       line_no);
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(c, &used));
        if (used != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": invalid number '" +
                             c + "'",
                         line_no);
      }
    }
    rows.push_back(std::move(row));
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return table;
}

void write_matrix_csv(const Matrix& m, const std::vector<std::string>& header,
                      const std::filesystem::path& path) {
  if (static_cast<Eigen::Index>(header.size()) != m.cols()) {
    throw DimensionMismatch("CSV header width does not match matrix");
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m(r, c));
    out << "\n";
  }
}

DemandSeries load_demand_csv(const std::filesystem::path& path, const GridCase& grid) {
  const CsvTable table = read_csv(path);
  // bus id -> demand columns at that bus, in case order
  std::map<int, std::vector<int>> by_bus;
  for (const auto& d : grid.demands) by_bus[d.bus].push_back(d.column);

  DemandSeries series;
  series.delta_hours = grid.delta_hours;
  series.values = Matrix::Zero(table.values.rows(), static_cast<Eigen::Index>(grid.demands.size()));
  std::map<int, std::size_t> used;
  std::vector<bool> filled(grid.demands.size(), false);
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const std::string& name = table.header[c];
    if (name.rfind("bus_", 0) != 0) {
      throw AlignmentError(path.string() + ": column '" + name + "' is not of the form bus_<id>");
    }
    int bus = 0;
    try {
      bus = std::stoi(name.substr(4));
    } catch (const std::exception&) {
      throw AlignmentError(path.string() + ": column '" + name + "' is not of the form bus_<id>");
    }
    auto it = by_bus.find(bus);
    if (it == by_bus.end() || used[bus] >= it->second.size()) {
      throw AlignmentError(path.string() + ": column '" + name + "' has no matching demand in the case");
    }
    const int col = it->second[used[bus]++];
    series.values.col(col) = table.values.col(static_cast<Eigen::Index>(c));
    filled[col] = true;
  }
  for (const auto& d : grid.demands) {
    if (!filled[d.column]) {
      throw AlignmentError(path.string() + ": no column for demand at bus " + std::to_string(d.bus));
    }
  }
  return series;
}

void save_demand_csv(const DemandSeries& series, const GridCase& grid,
                     const std::filesystem::path& path) {
  std::vector<std::string> header(grid.demands.size());
  Matrix ordered(series.values.rows(), static_cast<Eigen::Index>(grid.demands.size()));
  for (std::size_t k = 0; k < grid.demands.size(); ++k) {
    header[k] = "bus_" + std::to_string(grid.demands[k].bus);
    ordered.col(static_cast<Eigen::Index>(k)) = series.values.col(grid.demands[k].column);
  }
  write_matrix_csv(ordered, header, path);
}

void save_results_csv(const std::vector<ResultRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  Eigen::Index ns = rows.empty() ? 0 : rows.front().storage.size();
  out << "step,controller,stage_cost,max_abs_flow,solve_seconds";
  for (Eigen::Index k = 0; k < ns; ++k) out << ",e_" << (k + 1);
  out << "\n";
  for (const auto& r : rows) {
    out << r.step << "," << r.controller << "," << format_double(r.stage_cost) << ","
        << format_double(r.max_abs_flow) << "," << format_double(r.solve_seconds);
    for (Eigen::Index k = 0; k < r.storage.size(); ++k) out << "," << format_double(r.storage(k));
    out << "\n";
  }
}

}  // namespace ddopf
