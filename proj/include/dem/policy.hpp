#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dem/encoders.hpp"
#include "dem/matrix.hpp"
#include "dem/simdata.hpp"
#include "dem/treatment.hpp"

namespace dem {

// A decision rule over the admissible set: maps covariates to the index of a
// combination in `space`. Backed by a fitted model, an effect table, or the
// simulation truth.
struct Policy {
  TreatmentSpace space;
  std::function<int(std::span<const double>)> decide_index;

  int operator()(std::span<const double> x) const { return decide_index(x); }
};

// argmax over admissible combinations of alpha(x)^T beta(a); ties broken by
// the smallest bitmask value.
TreatmentCombo decide(const DemModel& model, std::span<const double> x);

Policy make_policy(const DemModel& model);
// Oracle rule: argmax of the setting's analytic treatment effects.
Policy make_oracle_policy(const SimSetting& setting);
// One-size-fits-all rule assigning the same combination to everyone.
Policy make_constant_policy(const TreatmentSpace& space, int combo_index);

// Generic argmax with the smallest-bitmask tie rule over scores aligned with
// the space's combination order.
int argmax_combo(const TreatmentSpace& space, std::span<const double> scores);

struct EmpiricalValue {
  double value = 0.0;
  long matched = 0;
  bool defined = false;  // false when no observation matches the rule
};

// Matched-subset average: sum of y over rows where the rule reproduces the
// observed assignment, divided by the match count. An unmatched rule yields
// an explicitly undefined result instead of NaN.
EmpiricalValue empirical_value(const Policy& policy, const Mat& x,
                               std::span<const int> combo_idx,
                               std::span<const double> y);

// Fraction of rows where two rules agree.
double accuracy(const Policy& policy, const Policy& reference, const Mat& x);

struct McValue {
  double value = 0.0;
  double std_error = 0.0;
  int draws = 0;
};

// Monte Carlo estimate of E[m(X) + delta*(X, d(X))] under the setting's
// covariate law.
McValue true_value(const Policy& policy, const SimSetting& setting, int n_mc,
                   std::uint64_t seed);
// Same estimate on caller-supplied draws, so competing policies can be
// compared on shared randomness.
McValue true_value_on(const Policy& policy, const SimSetting& setting,
                      const Mat& x_draws);

}  // namespace dem
