#include "dem/budget.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dem/errors.hpp"

namespace dem {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Lattice geometry shared by the solver and the brute-force oracle so both
// search exactly the same feasible set.
struct Lattice {
  std::vector<long> cost_units;  // per combination
  long budget_units = 0;
};

Lattice build_lattice(const KnapsackInstance& instance) {
  const int n = instance.delta.rows;
  const int na = instance.delta.cols;
  if (n < 1) throw DataError("knapsack instance has no subjects");
  if (na < 1 || static_cast<int>(instance.costs.size()) != na) {
    throw ShapeError("knapsack instance: cost vector must match delta columns");
  }
  if (instance.budget < 0.0) throw ConfigError("budget must be non-negative");
  for (double c : instance.costs) {
    if (c < 0.0) throw ConfigError("combination costs must be non-negative");
  }

  double step = instance.grid_step;
  if (step <= 0.0) step = 1.0 / n;  // integer cumulative-cost lattice
  const double unit = step * n;

  Lattice lat;
  lat.cost_units.resize(na);
  for (int j = 0; j < na; ++j) {
    lat.cost_units[j] = std::llround(instance.costs[j] / unit);
  }
  lat.budget_units =
      static_cast<long>(std::floor(instance.budget * n / unit + 1e-9));
  if (lat.budget_units < 0) lat.budget_units = 0;
  return lat;
}

}  // namespace

Vec combo_costs(const CostVector& c, const TreatmentSpace& space) {
  Vec out(space.size());
  for (int j = 0; j < space.size(); ++j) out[j] = c.combo_cost(space.mask(j));
  return out;
}

namespace kernels {

namespace serial {
void mckp_row_update(std::span<const double> prev, std::span<double> next,
                     std::span<std::int16_t> back,
                     std::span<const long> cost_units,
                     std::span<const double> gains) {
  const long states = static_cast<long>(prev.size());
  const int na = static_cast<int>(cost_units.size());
  for (long b = 0; b < states; ++b) {
    double best = kNegInf;
    long best_cost = std::numeric_limits<long>::max();
    int best_j = -1;
    for (int j = 0; j < na; ++j) {
      const long cu = cost_units[j];
      if (cu > b) continue;
      const double base = prev[b - cu];
      if (base == kNegInf) continue;
      const double cand = base + gains[j];
      if (cand > best || (cand == best && cu < best_cost)) {
        best = cand;
        best_cost = cu;
        best_j = j;
      }
    }
    next[b] = best;
    back[b] = static_cast<std::int16_t>(best_j);
  }
}
}  // namespace serial

void mckp_row_update(std::span<const double> prev, std::span<double> next,
                     std::span<std::int16_t> back,
                     std::span<const long> cost_units,
                     std::span<const double> gains) {
  const long states = static_cast<long>(prev.size());
  const int na = static_cast<int>(cost_units.size());
#pragma omp parallel for schedule(static) if (states >= 512)
  for (long b = 0; b < states; ++b) {
    double best = kNegInf;
    long best_cost = std::numeric_limits<long>::max();
    int best_j = -1;
    for (int j = 0; j < na; ++j) {
      const long cu = cost_units[j];
      if (cu > b) continue;
      const double base = prev[b - cu];
      if (base == kNegInf) continue;
      const double cand = base + gains[j];
      if (cand > best || (cand == best && cu < best_cost)) {
        best = cand;
        best_cost = cu;
        best_j = j;
      }
    }
    next[b] = best;
    back[b] = static_cast<std::int16_t>(best_j);
  }
}

}  // namespace kernels

AssignmentMatrix solve_mckp(const KnapsackInstance& instance) {
  const int n = instance.delta.rows;
  const int na = instance.delta.cols;
  const Lattice lat = build_lattice(instance);
  const long states = lat.budget_units + 1;

  if (na > 32767) throw SizeError("too many combinations for the solver");
  if (states > 50'000'000L ||
      static_cast<double>(states) * n > 2.5e8) {
    throw SizeError("budget lattice too large; increase grid_step");
  }

  std::vector<double> prev(states, 0.0), next(states, 0.0);
  std::vector<std::int16_t> back(static_cast<std::size_t>(states) * n);
  Vec gains(na);

  for (int l = 0; l < n; ++l) {
    for (int j = 0; j < na; ++j) gains[j] = instance.delta(l, j) / n;
    kernels::mckp_row_update(
        prev, next,
        {back.data() + static_cast<std::size_t>(l) * states,
         static_cast<std::size_t>(states)},
        lat.cost_units, gains);
    if (next[states - 1] == kNegInf) {
      throw InfeasibleError("no affordable combination for subject " +
                            std::to_string(l + 1) + " within the budget");
    }
    std::swap(prev, next);
  }

  AssignmentMatrix out;
  out.choice.assign(n, -1);
  long b = lat.budget_units;
  for (int l = n - 1; l >= 0; --l) {
    const int j = back[static_cast<std::size_t>(l) * states + b];
    out.choice[l] = j;
    b -= lat.cost_units[j];
  }

  double total_cost = 0.0;
  double objective = 0.0;
  for (int l = 0; l < n; ++l) {
    objective += instance.delta(l, out.choice[l]) / n;
    total_cost += instance.costs[out.choice[l]];
  }
  out.objective = objective;
  out.average_cost = total_cost / n;
  return out;
}

AssignmentMatrix brute_force_mckp(const KnapsackInstance& instance) {
  const int n = instance.delta.rows;
  const int na = instance.delta.cols;
  if (std::pow(static_cast<double>(na), static_cast<double>(n)) > 1e7) {
    throw SizeError("brute force limited to |A|^n <= 1e7");
  }
  const Lattice lat = build_lattice(instance);
  const long min_cost = *std::min_element(lat.cost_units.begin(),
                                          lat.cost_units.end());

  std::vector<int> choice(n, -1), best_choice;
  double best = kNegInf;

  // Depth-first enumeration; prunes only on budget feasibility so the search
  // stays exhaustive over the feasible set.
  auto recurse = [&](auto&& self, int l, long spent, double value) -> void {
    if (spent + min_cost * (n - l) > lat.budget_units) return;
    if (l == n) {
      if (value > best) {
        best = value;
        best_choice = choice;
      }
      return;
    }
    for (int j = 0; j < na; ++j) {
      const long s = spent + lat.cost_units[j];
      if (s > lat.budget_units) continue;
      choice[l] = j;
      self(self, l + 1, s, value + instance.delta(l, j) / n);
    }
  };
  recurse(recurse, 0, 0, 0.0);

  if (best == kNegInf) {
    throw InfeasibleError("no affordable assignment within the budget");
  }

  AssignmentMatrix out;
  out.choice = best_choice;
  out.objective = best;
  double total_cost = 0.0;
  for (int l = 0; l < n; ++l) total_cost += instance.costs[out.choice[l]];
  out.average_cost = total_cost / n;
  return out;
}

std::vector<int> dominance_prune(std::span<const double> subject_delta,
                                 std::span<const double> costs) {
  const int na = static_cast<int>(subject_delta.size());
  std::vector<int> keep;
  keep.reserve(na);
  for (int l = 0; l < na; ++l) {
    bool dominated = false;
    for (int k = 0; k < na && !dominated; ++k) {
      if (subject_delta[k] > subject_delta[l] && costs[k] < costs[l]) {
        dominated = true;
      }
    }
    if (!dominated) keep.push_back(l);
  }
  return keep;
}

PerturbationCheck perturbation_bound_check(const Mat& delta_true,
                                           const Mat& delta_est, const Vec& costs,
                                           double budget, double grid_step) {
  if (delta_true.rows != delta_est.rows || delta_true.cols != delta_est.cols) {
    throw ShapeError("perturbation check: effect matrices differ in shape");
  }
  KnapsackInstance inst_true{delta_true, costs, budget, grid_step};
  KnapsackInstance inst_est{delta_est, costs, budget, grid_step};
  PerturbationCheck check;
  check.objective_true = solve_mckp(inst_true).objective;
  check.objective_est = solve_mckp(inst_est).objective;

  const int n = delta_true.rows;
  double bound = 0.0;
  for (int i = 0; i < n; ++i) {
    double row_max = 0.0;
    for (int j = 0; j < delta_true.cols; ++j) {
      row_max = std::max(row_max, std::fabs(delta_true(i, j) - delta_est(i, j)));
    }
    bound += row_max / n;
  }
  check.bound = bound;

  const double gap = std::fabs(check.objective_true - check.objective_est);
  const double slack =
      1e-9 * std::max({1.0, std::fabs(check.objective_true),
                       std::fabs(check.objective_est)});
  check.holds = gap <= bound + slack;
  return check;
}

}  // namespace dem
