#include "dem/policy.hpp"

#include <cmath>

#include "dem/errors.hpp"

namespace dem {

int argmax_combo(const TreatmentSpace& space, std::span<const double> scores) {
  if (static_cast<int>(scores.size()) != space.size()) {
    throw ShapeError("argmax_combo: one score per admissible combination");
  }
  int best = 0;
  for (int j = 1; j < space.size(); ++j) {
    if (scores[j] > scores[best] ||
        (scores[j] == scores[best] && space.mask(j) < space.mask(best))) {
      best = j;
    }
  }
  return best;
}

TreatmentCombo decide(const DemModel& model, std::span<const double> x) {
  const Vec alpha = encode_covariates(model.alpha, x);
  Vec scores(model.space.size());
  for (int j = 0; j < model.space.size(); ++j) {
    scores[j] = dot(alpha, encode_treatment(model.beta, model.space, j));
  }
  return model.space.combo(argmax_combo(model.space, scores));
}

Policy make_policy(const DemModel& model) {
  Policy p;
  p.space = model.space;
  p.decide_index = [model](std::span<const double> x) {
    return decide(model, x).index;
  };
  return p;
}

Policy make_oracle_policy(const SimSetting& setting) {
  Policy p;
  p.space = setting.space;
  p.decide_index = [setting](std::span<const double> x) {
    Vec scores(setting.space.size());
    for (int j = 0; j < setting.space.size(); ++j) {
      scores[j] = true_delta_by_index(setting, x, j);
    }
    return argmax_combo(setting.space, scores);
  };
  return p;
}

Policy make_constant_policy(const TreatmentSpace& space, int combo_index) {
  if (combo_index < 0 || combo_index >= space.size()) {
    throw DomainError("constant policy: combination index out of range");
  }
  Policy p;
  p.space = space;
  p.decide_index = [combo_index](std::span<const double>) { return combo_index; };
  return p;
}

EmpiricalValue empirical_value(const Policy& policy, const Mat& x,
                               std::span<const int> combo_idx,
                               std::span<const double> y) {
  if (x.rows == 0) throw DataError("empirical_value: empty dataset");
  if (static_cast<int>(combo_idx.size()) != x.rows ||
      static_cast<int>(y.size()) != x.rows) {
    throw ShapeError("empirical_value: column lengths disagree");
  }
  std::vector<int> decisions(x.rows);
#pragma omp parallel for schedule(static) if (x.rows >= 64)
  for (int i = 0; i < x.rows; ++i) {
    decisions[i] = policy.decide_index(x.row_span(i));
  }
  EmpiricalValue out;
  double total = 0.0;
  for (int i = 0; i < x.rows; ++i) {
    if (decisions[i] == combo_idx[i]) {
      total += y[i];
      out.matched += 1;
    }
  }
  if (out.matched > 0) {
    out.defined = true;
    out.value = total / static_cast<double>(out.matched);
  }
  return out;
}

double accuracy(const Policy& policy, const Policy& reference, const Mat& x) {
  if (x.rows == 0) throw DataError("accuracy: empty sample");
  std::vector<int> a(x.rows), b(x.rows);
#pragma omp parallel for schedule(static) if (x.rows >= 64)
  for (int i = 0; i < x.rows; ++i) {
    a[i] = policy.decide_index(x.row_span(i));
    b[i] = reference.decide_index(x.row_span(i));
  }
  long agree = 0;
  for (int i = 0; i < x.rows; ++i) {
    if (a[i] == b[i]) ++agree;
  }
  return static_cast<double>(agree) / x.rows;
}

McValue true_value_on(const Policy& policy, const SimSetting& setting,
                      const Mat& x_draws) {
  const int n = x_draws.rows;
  if (n == 0) throw DataError("true_value: no Monte Carlo draws");
  Vec contrib(n);
#pragma omp parallel for schedule(static) if (n >= 64)
  for (int i = 0; i < n; ++i) {
    const auto xi = x_draws.row_span(i);
    const int j = policy.decide_index(xi);
    contrib[i] = setting.m(xi) + true_delta_by_index(setting, xi, j);
  }
  double mean = 0.0;
  for (double v : contrib) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : contrib) var += (v - mean) * (v - mean);
  var /= (n > 1 ? n - 1 : 1);
  McValue out;
  out.value = mean;
  out.std_error = std::sqrt(var / n);
  out.draws = n;
  return out;
}

McValue true_value(const Policy& policy, const SimSetting& setting, int n_mc,
                   std::uint64_t seed) {
  Rng rng(seed);
  const Mat draws = gen_covariates(n_mc, setting.p, rng);
  return true_value_on(policy, setting, draws);
}

}  // namespace dem
