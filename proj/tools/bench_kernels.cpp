// Timing harness comparing the serial reference kernels against the OpenMP
// entry points: dense products (the network forward/backward substrate), the
// knapsack lattice update, and batch policy evaluation.

#include <chrono>
#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dem/budget.hpp"
#include "dem/matrix.hpp"
#include "dem/policy.hpp"
#include "dem/rng.hpp"
#include "dem/simdata.hpp"

using namespace dem;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

void report(const char* name, double serial_ms, double omp_ms) {
  std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, serial_ms, omp_ms,
              serial_ms / omp_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP disabled at build time\n");
#endif
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  Rng rng(7);

  {
    Mat a(512, 256), b(128, 256), c;
    for (double& v : a.data) v = rng.uniform(-1, 1);
    for (double& v : b.data) v = rng.uniform(-1, 1);
    report("matmul_bt 512x256x128",
           time_ms([&] { kernels::serial::matmul_bt(a, b, c); }, 20),
           time_ms([&] { kernels::matmul_bt(a, b, c); }, 20));
  }
  {
    Mat a(512, 128), b(512, 256), c;
    for (double& v : a.data) v = rng.uniform(-1, 1);
    for (double& v : b.data) v = rng.uniform(-1, 1);
    report("matmul_ta 512x128x256",
           time_ms([&] { kernels::serial::matmul_ta(a, b, c); }, 20),
           time_ms([&] { kernels::matmul_ta(a, b, c); }, 20));
  }
  {
    const long states = 200000;
    const int na = 24;
    Vec prev(states), next(states);
    std::vector<std::int16_t> back(states);
    std::vector<long> cost_units(na);
    Vec gains(na);
    for (double& v : prev) v = rng.uniform(0, 1);
    for (int j = 0; j < na; ++j) {
      cost_units[j] = rng.uniform_int(400);
      gains[j] = rng.uniform(-1, 1);
    }
    report("mckp_row_update 200k states",
           time_ms([&] {
             kernels::serial::mckp_row_update(prev, next, back, cost_units, gains);
           }, 10),
           time_ms([&] {
             kernels::mckp_row_update(prev, next, back, cost_units, gains);
           }, 10));
  }
  {
    const SimSetting setting = make_setting(2);
    const Policy oracle = make_oracle_policy(setting);
    const Mat draws = gen_covariates(20000, setting.p, rng);
    // Serial baseline: row loop without the parallel evaluator.
    auto serial_eval = [&] {
      double acc = 0.0;
      for (int i = 0; i < draws.rows; ++i) {
        acc += oracle.decide_index(draws.row_span(i));
      }
      volatile double sink = acc;
      (void)sink;
    };
    report("policy eval 20k draws",
           time_ms(serial_eval, 5),
           time_ms([&] { true_value_on(oracle, setting, draws); }, 5));
  }
  return 0;
}
