#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ddopf/linalg.hpp"
#include "ddopf/netmodel.hpp"

namespace ddopf {

// Position of the signal blocks inside y = [e; p1; f].
struct OutputLayout {
  int storages = 0;
  int branches = 0;

  int energy_offset() const { return 0; }
  int slack_offset() const { return storages; }
  int flow_offset() const { return storages + 1; }
  int size() const { return storages + 1 + branches; }
};

// Descriptor system in quasi-Weierstrass form:
//   x1+ = A1 x1 + B1 u + F1 w
//   N x2+ = x2 + B2 u + F2 w
//   y = C1 x1 + C2 x2 + D u + G w
struct QuasiWeierstrass {
  Matrix a1, b1, f1;
  Matrix n, b2, f2;
  Matrix c1, c2, d, g;
  int nilpotency_index = 1;
  double delta_hours = 0.25;
  OutputLayout layout;

  int q() const { return static_cast<int>(a1.rows()); }
  int r() const { return static_cast<int>(n.rows()); }
  int num_inputs() const { return static_cast<int>(b1.cols()); }
  int num_disturbances() const { return static_cast<int>(f1.cols()); }
  int num_outputs() const { return static_cast<int>(c1.rows()); }
};

// Smallest s >= 1 with n^s = 0; throws InvalidParameter if n is not nilpotent.
int nilpotency_index(const Matrix& n);

QuasiWeierstrass assemble_descriptor(const ReducedModel& model, double delta_hours);

struct PlantState {
  Vector e;  // state of charge, MWh
};

struct StepResult {
  PlantState next;
  Vector y;
};

// y is measured with the current charge; the charge then advances by one
// period. The plant does not clip the charge at its bounds.
StepResult step(const QuasiWeierstrass& sys, const PlantState& state, const Vector& u,
                const Vector& w);

// One row per time step.
struct TrajectoryLog {
  Matrix u;
  Matrix w;
  Matrix y;

  Eigen::Index length() const { return u.rows(); }
};

TrajectoryLog simulate(const QuasiWeierstrass& sys, const Vector& e0, const Matrix& u_seq,
                       const Matrix& w_seq);

// PBH tests evaluated at the eigenvalues of A1.
bool r_controllable(const QuasiWeierstrass& sys, double rel_tol = 1e-10);
bool r_observable(const QuasiWeierstrass& sys, double rel_tol = 1e-10);

// CSV with header k,u_1..,w_1..,y_1..
void save_trajectory_csv(const TrajectoryLog& log, const std::filesystem::path& path);
TrajectoryLog load_trajectory_csv(const std::filesystem::path& path);

}  // namespace ddopf
