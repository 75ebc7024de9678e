#include "ddopf/netmodel.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <string>

#include "ddopf/errors.hpp"

namespace ddopf {

int GridCase::bus_index(int bus_id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == bus_id) return static_cast<int>(i);
  }
  throw ReferenceError("unknown bus id " + std::to_string(bus_id));
}

int GridCase::slack_generator() const {
  for (std::size_t g = 0; g < generators.size(); ++g) {
    if (generators[g].bus == slack_bus) return static_cast<int>(g);
  }
  throw InvalidParameter("slack bus " + std::to_string(slack_bus) +
                         " hosts no generator");
}

int GridCase::num_inputs() const {
  return static_cast<int>(generators.size() + storages.size()) - 1;
}

void GridCase::validate() const {
  if (buses.empty()) throw InvalidParameter("case has no buses");
  {
    std::vector<int> ids;
    for (const auto& b : buses) ids.push_back(b.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
      throw InvalidParameter("duplicate bus id");
    }
  }
  for (std::size_t k = 0; k < branches.size(); ++k) {
    const auto& br = branches[k];
    bus_index(br.from);
    bus_index(br.to);
    if (!(br.x > 0.0) || !(br.tap > 0.0)) {
      throw InvalidParameter("branch " + std::to_string(k + 1) +
                             ": reactance and tap ratio must be positive");
    }
    if (br.from == br.to) {
      throw InvalidParameter("branch " + std::to_string(k + 1) + " is a self-loop");
    }
  }
  for (const auto& g : generators) {
    bus_index(g.bus);
    if (g.p_min > g.p_max) throw InvalidParameter("generator with p_min > p_max");
  }
  for (std::size_t k = 0; k < storages.size(); ++k) {
    const auto& s = storages[k];
    bus_index(s.bus);
    const std::string tag = "storage " + std::to_string(k + 1);
    if (!(s.e_min <= s.e0 && s.e0 <= s.e_max)) {
      throw InvalidParameter(tag + ": initial charge outside [e_min, e_max]");
    }
    if (!(s.s_min < 0.0 && 0.0 < s.s_max)) {
      throw InvalidParameter(tag + ": requires s_min < 0 < s_max");
    }
  }
  std::vector<int> cols;
  for (const auto& d : demands) {
    bus_index(d.bus);
    cols.push_back(d.column);
  }
  std::sort(cols.begin(), cols.end());
  for (std::size_t k = 0; k < cols.size(); ++k) {
    if (cols[k] != static_cast<int>(k)) {
      throw InvalidParameter("demand columns must be a permutation of 0..|D|-1");
    }
  }
  bus_index(slack_bus);
  slack_generator();
  if (!(delta_hours > 0.0)) throw InvalidParameter("delta_hours must be positive");
}

Matrix build_bus_susceptance(const GridCase& grid) {
  const auto n = static_cast<Eigen::Index>(grid.buses.size());
  Matrix b = Matrix::Zero(n, n);
  for (const auto& br : grid.branches) {
    if (!(br.x > 0.0) || !(br.tap > 0.0)) {
      throw InvalidParameter("non-positive reactance or tap ratio");
    }
    const int i = grid.bus_index(br.from);
    const int j = grid.bus_index(br.to);
    const double w = 1.0 / (br.x * br.tap);
    b(i, j) -= w;
    b(j, i) -= w;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) off += b(i, j);
    }
    b(i, i) = -off;
  }
  return b;
}

std::vector<std::vector<int>> connected_component_list(const GridCase& grid) {
  const std::size_t n = grid.buses.size();
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  for (const auto& br : grid.branches) {
    const int a = find(grid.bus_index(br.from));
    const int c = find(grid.bus_index(br.to));
    if (a != c) parent[std::max(a, c)] = std::min(a, c);
  }
  std::vector<std::vector<int>> groups;
  std::vector<int> slot(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const int root = find(static_cast<int>(i));
    if (slot[root] < 0) {
      slot[root] = static_cast<int>(groups.size());
      groups.emplace_back();
    }
    groups[slot[root]].push_back(grid.buses[i].id);
  }
  return groups;
}

int connected_components(const GridCase& grid) {
  return static_cast<int>(connected_component_list(grid).size());
}

ReducedModel reduce(const GridCase& grid) {
  grid.validate();
  const auto components = connected_component_list(grid);
  if (components.size() > 1) {
    std::ostringstream msg;
    msg << "grid is disconnected into " << components.size() << " components:";
    for (const auto& c : components) {
      msg << " {";
      for (std::size_t k = 0; k < c.size(); ++k) msg << (k ? "," : "") << c[k];
      msg << "}";
    }
    throw ConnectivityError(msg.str(), components);
  }

  ReducedModel m;
  const int n = static_cast<int>(grid.buses.size());
  const int nr = n - 1;
  m.delta_hours = grid.delta_hours;
  m.slack_index = grid.bus_index(grid.slack_bus);
  m.slack_generator = grid.slack_generator();
  m.bus_susceptance = build_bus_susceptance(grid);

  std::vector<int> to_reduced(n, -1);
  for (int i = 0, k = 0; i < n; ++i) {
    if (i == m.slack_index) continue;
    to_reduced[i] = k++;
    m.reduced_bus_ids.push_back(grid.buses[i].id);
  }

  m.reduced_susceptance.resize(nr, nr);
  for (int i = 0; i < n; ++i) {
    if (to_reduced[i] < 0) continue;
    for (int j = 0; j < n; ++j) {
      if (to_reduced[j] < 0) continue;
      m.reduced_susceptance(to_reduced[i], to_reduced[j]) = m.bus_susceptance(i, j);
    }
  }

  const int ne = static_cast<int>(grid.branches.size());
  m.branch_susceptance = Matrix::Zero(ne, nr);
  for (int k = 0; k < ne; ++k) {
    const auto& br = grid.branches[k];
    const double w = 1.0 / (br.x * br.tap);
    const int i = to_reduced[grid.bus_index(br.from)];
    const int j = to_reduced[grid.bus_index(br.to)];
    if (i >= 0) m.branch_susceptance(k, i) += w;
    if (j >= 0) m.branch_susceptance(k, j) -= w;
  }

  const int ng = static_cast<int>(grid.generators.size());
  const int ns = static_cast<int>(grid.storages.size());
  const int nu = ng - 1 + ns;
  m.gen_incidence = Matrix::Zero(nr, nu);
  m.storage_selector = Matrix::Zero(ns, nu);
  int col = 0;
  for (int g = 0; g < ng; ++g) {
    if (g == m.slack_generator) continue;
    m.input_generators.push_back(g);
    const int r = to_reduced[grid.bus_index(grid.generators[g].bus)];
    if (r >= 0) m.gen_incidence(r, col) = 1.0;
    ++col;
  }
  for (int s = 0; s < ns; ++s, ++col) {
    const int r = to_reduced[grid.bus_index(grid.storages[s].bus)];
    if (r >= 0) m.gen_incidence(r, col) = 1.0;
    m.storage_selector(s, col) = 1.0;
  }

  const int nd = static_cast<int>(grid.demands.size());
  m.demand_incidence = Matrix::Zero(nr, nd);
  for (const auto& d : grid.demands) {
    const int r = to_reduced[grid.bus_index(d.bus)];
    if (r >= 0) m.demand_incidence(r, d.column) = 1.0;
  }

  if (nr > 0) {
    m.factor.compute(m.reduced_susceptance);
    if (m.factor.info() != Eigen::Success) {
      throw NumericalError("reduced susceptance matrix is not positive definite");
    }
    // M = B~f B~^-1; B~ is symmetric so M^T = B~^-1 B~f^T.
    m.ptdf = m.factor.solve(m.branch_susceptance.transpose()).transpose();
  } else {
    m.ptdf = Matrix::Zero(ne, 0);
  }
  return m;
}

DcFlow solve_dc_flow(const ReducedModel& model, const Vector& u, const Vector& w) {
  if (u.size() != model.num_inputs() || w.size() != model.num_demands()) {
    throw DimensionMismatch("solve_dc_flow: input or demand vector has wrong size");
  }
  DcFlow out;
  const Vector injection = model.gen_incidence * u - model.demand_incidence * w;
  if (injection.size() > 0) {
    out.angles = model.factor.solve(injection);
    if (!out.angles.allFinite()) throw NumericalError("DC flow solve failed");
  } else {
    out.angles = Vector::Zero(0);
  }
  out.flows = model.branch_susceptance * out.angles;
  out.slack_power = w.sum() - u.sum();
  return out;
}

}  // namespace ddopf
