#include <cmath>

#include "doctest.h"

#include "dem/errors.hpp"
#include "dem/nuisance.hpp"
#include "dem/simdata.hpp"
#include "oracles.hpp"

using namespace dem;

namespace {

PropensityModel zero_model(const TreatmentSpace& space, int p) {
  PropensityModel m;
  m.space = space;
  m.gamma = Mat(p, space.size());
  m.intercept.assign(space.size(), 0.0);
  m.frequencies.assign(space.size(), 1.0 / space.size());
  return m;
}

}  // namespace

TEST_CASE("predict_propensity: zero coefficients give the uniform vector") {
  const TreatmentSpace space(3, {0, 1, 2, 3, 4, 5});
  const PropensityModel m = zero_model(space, 4);
  const Vec probs = predict_propensity(m, Vec{0.3, -0.2, 0.9, 0.0});
  for (double p : probs) CHECK(p == doctest::Approx(1.0 / 6).epsilon(1e-12));
}

TEST_CASE("predict_propensity: two-class logit with log-3 gap") {
  const TreatmentSpace space(1, {0b0u, 0b1u});
  PropensityModel m = zero_model(space, 1);
  m.gamma(0, 0) = std::log(3.0);  // eta_0 - eta_1 = log 3 at x = 1
  const Vec probs = predict_propensity(m, Vec{1.0});
  CHECK(probs[0] == doctest::Approx(0.75).epsilon(1e-9));
  CHECK(probs[1] == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("predict_propensity: simplex invariant on random inputs") {
  Rng rng(31);
  const TreatmentSpace space(2, {0, 1, 2, 3});
  PropensityModel m = zero_model(space, 5);
  for (double& v : m.gamma.data) v = rng.uniform(-2.0, 2.0);
  for (double& v : m.intercept) v = rng.uniform(-1.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    Vec x(5);
    for (double& v : x) v = rng.uniform(-3.0, 3.0);
    const Vec probs = predict_propensity(m, x);
    double total = 0.0;
    for (double p : probs) {
      CHECK(p >= 0.0);
      total += p;
    }
    CHECK(std::fabs(total - 1.0) < 1e-10);
  }
}

TEST_CASE("fit_propensity: no-signal balanced data recovers frequencies "
          "with first-order optimality") {
  // Two combos with exactly zero covariate signal: every covariate row
  // appears once under each label, so the optimum is the frequency model.
  Rng rng(5);
  const TreatmentSpace space(1, {0b0u, 0b1u});
  const int n = 200;
  Mat x(n, 3);
  for (int i = 0; i < n; i += 2) {
    for (int j = 0; j < 3; ++j) {
      x(i, j) = rng.uniform(-1.0, 1.0);
      x(i + 1, j) = x(i, j);
    }
  }
  std::vector<int> combos(n);
  for (int i = 0; i < n; ++i) combos[i] = i % 2;

  PropensityFitOptions opts;
  opts.lambda = 0.0;
  opts.tol = 1e-14;
  const PropensityFit fit = fit_propensity(x, combos, space, opts);

  for (int i = 0; i < 10; ++i) {
    const Vec probs = predict_propensity(fit.model, x.row_span(i));
    CHECK(probs[0] == doctest::Approx(0.5).epsilon(1e-3));
  }
  Mat dg;
  Vec di;
  propensity_nll_grad(x, combos, fit.model.gamma, fit.model.intercept, dg, di);
  double gnorm = norm2(dg.data);
  gnorm = std::sqrt(gnorm * gnorm + sum_sq(di));
  CHECK(gnorm < 1e-6);
}

TEST_CASE("fit_propensity: penalized objective never increases") {
  Rng rng(13);
  const TreatmentSpace space(2, {0, 1, 2, 3});
  const int n = 120;
  Mat x(n, 4);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  std::vector<int> combos(n);
  for (int i = 0; i < n; ++i) combos[i] = rng.uniform_int(4);

  PropensityFitOptions opts;
  opts.lambda = 0.05;
  opts.max_iter = 300;
  const PropensityFit fit = fit_propensity(x, combos, space, opts);
  REQUIRE(fit.objective_path.size() > 1);
  for (std::size_t i = 1; i < fit.objective_path.size(); ++i) {
    CHECK(fit.objective_path[i] <= fit.objective_path[i - 1] + 1e-12);
  }
  // Descent against both starting points: the zero matrix is the start.
  const double at_zero = propensity_objective(x, combos, Mat(4, 4),
                                              Vec(4, 0.0), opts.lambda);
  CHECK(fit.objective_path.back() <= at_zero + 1e-12);
}

TEST_CASE("fit_propensity: a penalty above the shutoff threshold zeroes "
          "every covariate group") {
  Rng rng(29);
  const TreatmentSpace space(1, {0b0u, 0b1u});
  const int n = 150;
  Mat x(n, 3);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  std::vector<int> combos(n);
  for (int i = 0; i < n; ++i) {
    combos[i] = rng.uniform() < (x(i, 0) > 0 ? 0.8 : 0.3) ? 1 : 0;
  }

  // KKT shutoff: with all covariate rows at zero and the intercept at its
  // conditional optimum, every group stays at zero iff its smooth-part
  // gradient row norm is below lambda. Compute that threshold from the data.
  PropensityFitOptions intercept_only;
  intercept_only.lambda = 1e9;  // forces gamma = 0, intercept free
  const PropensityFit base = fit_propensity(x, combos, space, intercept_only);
  Mat dg;
  Vec di;
  propensity_nll_grad(x, combos, base.model.gamma, base.model.intercept, dg, di);
  double threshold = 0.0;
  for (int j = 0; j < dg.rows; ++j) {
    threshold = std::max(threshold, norm2(dg.row_span(j)));
  }

  PropensityFitOptions opts;
  opts.lambda = threshold * 1.05;
  const PropensityFit fit = fit_propensity(x, combos, space, opts);
  for (double v : fit.model.gamma.data) CHECK(v == 0.0);

  PropensityFitOptions below;
  below.lambda = threshold * 0.5;
  const PropensityFit fit2 = fit_propensity(x, combos, space, below);
  double nonzero = 0.0;
  for (double v : fit2.model.gamma.data) nonzero += std::fabs(v);
  CHECK(nonzero > 0.0);
}

TEST_CASE("stabilized_weight: frequency-matched propensity gives weight 1") {
  const TreatmentSpace space(2, {0, 1, 2, 3});
  PropensityModel m = zero_model(space, 2);
  // Model predicts uniform; frequencies equal uniform.
  const Vec x{0.4, -0.1};
  for (int j = 0; j < 4; ++j) {
    CHECK(stabilized_weight(m, x, j) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("stabilized_weight: ratio and clipping") {
  const TreatmentSpace space(1, {0b0u, 0b1u});
  PropensityModel m = zero_model(space, 1);
  m.frequencies = {0.2, 0.8};
  // Uniform prediction = 0.5 per combo.
  CHECK(stabilized_weight(m, Vec{0.0}, 0) == doctest::Approx(0.4));

  // Push the predicted probability to the floor: frequency / p_hat exceeds
  // w_max and must clip.
  m.gamma(0, 0) = -20.0;
  m.frequencies = {0.9, 0.1};
  const double w = stabilized_weight(m, Vec{1.0}, 0);
  CHECK(w == doctest::Approx(m.w_max));
}

TEST_CASE("fit_propensity: uniform assignment looks uniform on average") {
  const SimSetting setting = make_setting(1);
  const SimSample sample = generate_sample(setting, 2000, AssignScheme::Uniform, 99);
  PropensityFitOptions opts;
  opts.lambda = 1e-3;
  const PropensityFit fit =
      fit_propensity(sample.x, sample.combo_idx, setting.space, opts);
  const int na = setting.space.size();
  Vec mean(na, 0.0);
  for (int i = 0; i < sample.x.rows; ++i) {
    const Vec probs = predict_propensity(fit.model, sample.x.row_span(i));
    for (int j = 0; j < na; ++j) mean[j] += probs[j];
  }
  const double p0 = 1.0 / na;
  const double se = std::sqrt(p0 * (1 - p0) / sample.x.rows);
  for (int j = 0; j < na; ++j) {
    mean[j] /= sample.x.rows;
    CHECK(std::fabs(mean[j] - p0) <= 3 * se);
  }
}

TEST_CASE("fit_propensity: unobserved combos floor into the frequencies") {
  const TreatmentSpace space(2, {0, 1, 2, 3});
  Mat x(40, 2);
  Rng rng(3);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  std::vector<int> combos(40);
  for (int i = 0; i < 40; ++i) combos[i] = i % 3;  // combo 3 never observed
  const PropensityFit fit = fit_propensity(x, combos, space);
  CHECK(fit.warnings.size() == 1);
  double total = 0.0;
  for (double f : fit.model.frequencies) {
    CHECK(f > 0.0);
    total += f;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("propensity gradient matches finite differences") {
  Rng rng(61);
  const TreatmentSpace space(2, {0, 1, 2, 3});
  const int n = 30, p = 3;
  Mat x(n, p);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  std::vector<int> combos(n);
  for (int i = 0; i < n; ++i) combos[i] = rng.uniform_int(4);

  Mat gamma(p, 4);
  for (double& v : gamma.data) v = rng.uniform(-0.5, 0.5);
  Vec intercept(4);
  for (double& v : intercept) v = rng.uniform(-0.5, 0.5);

  Mat dg;
  Vec di;
  propensity_nll_grad(x, combos, gamma, intercept, dg, di);
  Vec analytic = dg.data;
  analytic.insert(analytic.end(), di.begin(), di.end());

  Vec flat = gamma.data;
  flat.insert(flat.end(), intercept.begin(), intercept.end());
  const auto f = [&](const Vec& params) {
    Mat g(p, 4);
    std::copy(params.begin(), params.begin() + g.data.size(), g.data.begin());
    Vec ic(params.end() - 4, params.end());
    return propensity_nll(x, combos, g, ic);
  };
  const Vec fd = oracles::finite_difference(f, flat);
  CHECK(oracles::max_rel_error(analytic, fd) < 1e-6);
}

TEST_CASE("fit_treatment_free: constant outcomes fit to near-zero error") {
  Rng rng(8);
  const int n = 200;
  Mat x(n, 4);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  const Vec y(n, 0.7);
  TreatmentFreeFitOptions opts;
  opts.hidden = 16;
  opts.epochs = 300;
  opts.learning_rate = 0.05;
  opts.seed = 4;
  const TreatmentFreeModel m = fit_treatment_free(x, y, opts);
  double mse = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = y[i] - predict_treatment_free(m, x.row_span(i));
    mse += r * r;
  }
  mse /= n;
  CHECK(mse <= 1e-4);
}

TEST_CASE("fit_treatment_free: exactly representable ReLU target") {
  Rng rng(14);
  const int n = 500;
  Mat x(n, 2);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  Vec y(n);
  for (int i = 0; i < n; ++i) y[i] = 2.0 * std::max(x(i, 0), 0.0);
  TreatmentFreeFitOptions opts;
  opts.hidden = 8;
  opts.epochs = 400;
  opts.learning_rate = 0.03;
  opts.seed = 2;
  const TreatmentFreeModel m = fit_treatment_free(x, y, opts);
  double mse = 0.0;
  for (int i = 0; i < n; ++i) {
    const double r = y[i] - predict_treatment_free(m, x.row_span(i));
    mse += r * r;
  }
  mse /= n;
  CHECK(mse <= 1e-3);
}

TEST_CASE("fit_treatment_free: beats the zero predictor on centered data") {
  const SimSetting setting = make_setting(1);
  const SimSample sample = generate_sample(setting, 300, AssignScheme::Uniform, 5);
  TreatmentFreeFitOptions opts;
  opts.epochs = 150;
  const TreatmentFreeModel m = fit_treatment_free(sample.x, sample.y, opts);
  double mean = 0.0;
  for (double v : sample.y) mean += v;
  mean /= sample.y.size();
  double var = 0.0, mse = 0.0;
  for (int i = 0; i < sample.x.rows; ++i) {
    var += (sample.y[i] - mean) * (sample.y[i] - mean);
    const double r = sample.y[i] - predict_treatment_free(m, sample.x.row_span(i));
    mse += r * r;
  }
  CHECK(mse / sample.x.rows <= var / sample.x.rows);
}

TEST_CASE("fit_treatment_free: rejects degenerate inputs") {
  Mat x(1, 2, 0.5);
  CHECK_THROWS_AS(fit_treatment_free(x, Vec{1.0}, {}), DataError);
}
