#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dem/matrix.hpp"
#include "dem/treatment.hpp"

namespace dem {

// Per-treatment costs; the cost of a combination is the sum over its active
// treatments.
struct CostVector {
  Vec costs;  // length K, non-negative

  double combo_cost(std::uint32_t bits) const {
    double total = 0.0;
    for (std::size_t k = 0; k < costs.size(); ++k) {
      if (bits & (1u << k)) total += costs[k];
    }
    return total;
  }
};

Vec combo_costs(const CostVector& c, const TreatmentSpace& space);

// One budget-constrained assignment problem: pick exactly one combination per
// subject, maximizing the average effect subject to an average-cost budget.
// The dynamic program runs on an integer lattice of cumulative cost with
// resolution grid_step (in average-budget units, so one lattice unit equals
// n * grid_step of cumulative cost).
struct KnapsackInstance {
  Mat delta;        // n x |A| treatment effects
  Vec costs;        // |A| combination costs
  double budget = 0.0;     // average budget per subject
  double grid_step = 0.0;  // lattice resolution; <= 0 picks a default
};

struct AssignmentMatrix {
  std::vector<int> choice;  // chosen combination index per subject
  double objective = 0.0;   // (1/n) sum of chosen effects
  double average_cost = 0.0;
};

// Exact dynamic program over subjects and the cumulative-cost lattice.
// Affordability is non-strict (a combination costing exactly the remaining
// budget is admissible) and ties prefer the cheaper combination, then the
// lower index. Throws InfeasibleError naming the first subject for which no
// affordable combination exists.
AssignmentMatrix solve_mckp(const KnapsackInstance& instance);

// Exhaustive search oracle; refuses instances with |A|^n > 10^7.
AssignmentMatrix brute_force_mckp(const KnapsackInstance& instance);

// Indices of combinations not strictly dominated for this subject: j is
// dropped when some k has strictly higher effect and strictly lower cost.
std::vector<int> dominance_prune(std::span<const double> subject_delta,
                                 std::span<const double> costs);

struct PerturbationCheck {
  bool holds = false;
  double objective_true = 0.0;
  double objective_est = 0.0;
  double bound = 0.0;  // (1/n) sum_i max_j |delta_true_ij - delta_est_ij|
};

// Verifies that swapping an estimated effect matrix into the solver moves the
// optimal objective by no more than the average row-wise maximum absolute
// estimation error.
PerturbationCheck perturbation_bound_check(const Mat& delta_true,
                                           const Mat& delta_est, const Vec& costs,
                                           double budget, double grid_step = 0.0);

// Lattice update kernel: given the previous subject's value row, fill the
// next row (and backpointers) for one subject. Exposed in both serial and
// OpenMP forms; every lattice state is independent given the previous row,
// so the parallel version is bit-identical to the serial one.
namespace kernels {
namespace serial {
void mckp_row_update(std::span<const double> prev, std::span<double> next,
                     std::span<std::int16_t> back,
                     std::span<const long> cost_units,
                     std::span<const double> gains);
}
void mckp_row_update(std::span<const double> prev, std::span<double> next,
                     std::span<std::int16_t> back,
                     std::span<const long> cost_units,
                     std::span<const double> gains);
}  // namespace kernels

}  // namespace dem
