#include <benchmark/benchmark.h>

#include <random>

#include "ddopf/qp.hpp"

namespace {

using namespace ddopf;

// Box-constrained problem with a banded Hessian and a block of coupling rows.
QpProblem banded_problem(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix p = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    p(i, i) = 4.0 + std::abs(g(rng));
    if (i + 1 < n) p(i, i + 1) = p(i + 1, i) = -1.0;
  }
  const Vector c = Vector::NullaryExpr(n, [&] { return 5.0 * g(rng); });
  const int m = n + n / 4;
  Matrix a = Matrix::Zero(m, n);
  a.topRows(n).setIdentity();
  for (int r = n; r < m; ++r) {
    for (int k = 0; k < 8; ++k) a(r, (r * 7 + k * 13) % n) = g(rng);
  }
  Vector lo = Vector::Constant(m, -1.0), hi = Vector::Constant(m, 1.0);
  return QpProblem::dense(p, c, a, lo, hi);
}

void BM_QpColdSolve(benchmark::State& state) {
  const QpProblem p = banded_problem(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    QpSolution s = solve(p);
    benchmark::DoNotOptimize(s.x.data());
  }
}
BENCHMARK(BM_QpColdSolve)->Arg(50)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

void BM_QpWarmResolve(benchmark::State& state) {
  const QpProblem p = banded_problem(static_cast<int>(state.range(0)), 2);
  QpSolver solver(p);
  const QpSolution first = solver.solve();
  const WarmStart warm{first.x, first.y};
  Vector c = p.c;
  for (auto _ : state) {
    c.array() += 1e-3;
    solver.update_linear_cost(c);
    QpSolution s = solver.solve(&warm);
    benchmark::DoNotOptimize(s.x.data());
  }
}
BENCHMARK(BM_QpWarmResolve)->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
