#include <benchmark/benchmark.h>

#include <random>

#include "ddopf/hankel.hpp"

namespace {

using namespace ddopf;

TrajectoryLog random_log(int length, int nu, int nw, int ny, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  TrajectoryLog log;
  log.u = Matrix::NullaryExpr(length, nu, [&] { return g(rng); });
  log.w = Matrix::NullaryExpr(length, nw, [&] { return g(rng); });
  log.y = Matrix::NullaryExpr(length, ny, [&] { return g(rng); });
  return log;
}

// 118-bus sized signals.
constexpr int kNu = 57, kNw = 99, kNy = 191, kQ = 4;

void BM_HankelMatrix(benchmark::State& state) {
  const TrajectoryLog log = random_log(417, kNu, kNw, kNy, 1);
  Matrix joint(417, kNu + kNw);
  joint << log.u, log.w;
  for (auto _ : state) {
    Matrix h = hankel_matrix(joint, static_cast<int>(state.range(0)));
    benchmark::DoNotOptimize(h.data());
  }
}
BENCHMARK(BM_HankelMatrix)->Arg(2)->Arg(13)->Unit(benchmark::kMicrosecond);

void BM_SegmentedStackAndTruncation(benchmark::State& state) {
  const TrajectoryLog log = random_log(417, kNu, kNw, kNy, 2);
  Matrix selector = Matrix::Zero(kQ, kNu);
  selector.rightCols(kQ).setIdentity();
  StackOptions opt;
  for (auto _ : state) {
    HankelStack s = build_simplified_stack(log, selector, opt);
    s = truncate_rank(s, behavior_dimension(1, kNu, kNw, kQ));
    benchmark::DoNotOptimize(s.u_future.data());
  }
}
BENCHMARK(BM_SegmentedStackAndTruncation)->Unit(benchmark::kMillisecond);

void BM_NullspaceSubstitution(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  const Matrix wf = Matrix::NullaryExpr(kNw, 316, [&] { return g(rng); });
  for (auto _ : state) {
    NullspaceSubstitution sub(wf);
    benchmark::DoNotOptimize(sub.basis().data());
  }
}
BENCHMARK(BM_NullspaceSubstitution)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
