#include "dem/nuisance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dem/errors.hpp"

namespace dem {

namespace {

// Row-wise linear predictor eta_ij = gamma_j^T x_i + intercept_j.
Mat linear_predictor(const Mat& x, const Mat& gamma, const Vec& intercept) {
  Mat eta;
  kernels::matmul(x, gamma, eta);
  for (int i = 0; i < eta.rows; ++i) {
    double* row = eta.row(i);
    for (int j = 0; j < eta.cols; ++j) row[j] += intercept[j];
  }
  return eta;
}

void softmax_rows(Mat& eta) {
  for (int i = 0; i < eta.rows; ++i) {
    double* row = eta.row(i);
    double mx = row[0];
    for (int j = 1; j < eta.cols; ++j) mx = std::max(mx, row[j]);
    double total = 0.0;
    for (int j = 0; j < eta.cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    for (int j = 0; j < eta.cols; ++j) row[j] /= total;
  }
}

double group_penalty(const Mat& gamma, double lambda) {
  double total = 0.0;
  for (int j = 0; j < gamma.rows; ++j) {
    total += norm2(gamma.row_span(j));
  }
  return lambda * total;
}

}  // namespace

Vec predict_propensity(const PropensityModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.p()) {
    throw ShapeError("propensity model expects covariates of length " +
                     std::to_string(model.p()));
  }
  const int na = model.space.size();
  Vec eta(na, 0.0);
  for (int j = 0; j < na; ++j) {
    double s = model.intercept[j];
    for (int t = 0; t < model.p(); ++t) s += model.gamma(t, j) * x[t];
    eta[j] = s;
  }
  const double mx = *std::max_element(eta.begin(), eta.end());
  double total = 0.0;
  for (double& v : eta) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : eta) v /= total;
  // Floor and renormalize so no probability is negligible.
  total = 0.0;
  for (double& v : eta) {
    v = std::max(v, model.p_min);
    total += v;
  }
  for (double& v : eta) v /= total;
  return eta;
}

double stabilized_weight(const PropensityModel& model, std::span<const double> x,
                         int combo_index) {
  const Vec probs = predict_propensity(model, x);
  const double w = model.frequencies[combo_index] / probs[combo_index];
  return std::clamp(w, 1.0 / model.w_max, model.w_max);
}

double propensity_nll(const Mat& x, std::span<const int> combo_idx,
                      const Mat& gamma, const Vec& intercept) {
  Mat eta = linear_predictor(x, gamma, intercept);
  double total = 0.0;
  for (int i = 0; i < eta.rows; ++i) {
    const double* row = eta.row(i);
    double mx = row[0];
    for (int j = 1; j < eta.cols; ++j) mx = std::max(mx, row[j]);
    double lse = 0.0;
    for (int j = 0; j < eta.cols; ++j) lse += std::exp(row[j] - mx);
    total += mx + std::log(lse) - row[combo_idx[i]];
  }
  return total / eta.rows;
}

void propensity_nll_grad(const Mat& x, std::span<const int> combo_idx,
                         const Mat& gamma, const Vec& intercept, Mat& dgamma,
                         Vec& dintercept) {
  const int n = x.rows;
  Mat probs = linear_predictor(x, gamma, intercept);
  softmax_rows(probs);
  // residual_ij = (p_ij - 1{a_i = j}) / n
  for (int i = 0; i < n; ++i) {
    probs(i, combo_idx[i]) -= 1.0;
  }
  for (double& v : probs.data) v /= n;
  kernels::matmul_ta(x, probs, dgamma);
  dintercept.assign(probs.cols, 0.0);
  for (int i = 0; i < n; ++i) {
    const double* row = probs.row(i);
    for (int j = 0; j < probs.cols; ++j) dintercept[j] += row[j];
  }
}

double propensity_objective(const Mat& x, std::span<const int> combo_idx,
                            const Mat& gamma, const Vec& intercept,
                            double lambda) {
  return propensity_nll(x, combo_idx, gamma, intercept) +
         group_penalty(gamma, lambda);
}

PropensityFit fit_propensity(const Mat& x, std::span<const int> combo_idx,
                             const TreatmentSpace& space,
                             const PropensityFitOptions& opts) {
  const int n = x.rows;
  const int p = x.cols;
  const int na = space.size();
  if (n < 1) throw DataError("fit_propensity: empty data");
  for (int idx : combo_idx) {
    if (idx < 0 || idx >= na) {
      throw DomainError("fit_propensity: combination index out of range");
    }
  }

  PropensityFit fit;
  fit.model.space = space;
  fit.model.p_min = opts.p_min;
  fit.model.w_max = opts.w_max;

  // Empirical frequencies, floored for unobserved combinations.
  Vec counts(na, 0.0);
  for (int idx : combo_idx) counts[idx] += 1.0;
  Vec freq(na);
  bool unobserved = false;
  for (int j = 0; j < na; ++j) {
    freq[j] = counts[j] / n;
    if (counts[j] == 0.0) unobserved = true;
  }
  if (unobserved) {
    fit.warnings.push_back(
        "some admissible combinations were never observed; their frequencies "
        "were floored before weighting");
    double total = 0.0;
    for (double& f : freq) {
      f = std::max(f, opts.p_min);
      total += f;
    }
    for (double& f : freq) f /= total;
  }
  fit.model.frequencies = freq;

  Mat gamma(p, na);
  Vec intercept(na, 0.0);
  Mat dgamma;
  Vec dintercept;

  double step = 1.0;
  double f_cur = propensity_nll(x, combo_idx, gamma, intercept);
  double obj_prev = f_cur + group_penalty(gamma, opts.lambda);

  Mat gamma_next(p, na);
  Vec intercept_next(na, 0.0);
  for (int iter = 0; iter < opts.max_iter; ++iter) {
    propensity_nll_grad(x, combo_idx, gamma, intercept, dgamma, dintercept);

    // Backtracking proximal step: gradient step then block soft-threshold of
    // each covariate row; the intercept takes a plain gradient step.
    double f_next = 0.0;
    while (true) {
      for (std::size_t t = 0; t < gamma.data.size(); ++t) {
        gamma_next.data[t] = gamma.data[t] - step * dgamma.data[t];
      }
      const double thresh = step * opts.lambda;
      for (int j = 0; j < p; ++j) {
        double* row = gamma_next.row(j);
        const double nrm = norm2({row, static_cast<std::size_t>(na)});
        const double scale = nrm > thresh ? (1.0 - thresh / nrm) : 0.0;
        for (int c = 0; c < na; ++c) row[c] *= scale;
      }
      for (int j = 0; j < na; ++j) {
        intercept_next[j] = intercept[j] - step * dintercept[j];
      }

      f_next = propensity_nll(x, combo_idx, gamma_next, intercept_next);
      // Majorization check keeps the penalized objective monotone.
      double lin = 0.0, quad = 0.0;
      for (std::size_t t = 0; t < gamma.data.size(); ++t) {
        const double d = gamma_next.data[t] - gamma.data[t];
        lin += dgamma.data[t] * d;
        quad += d * d;
      }
      for (int j = 0; j < na; ++j) {
        const double d = intercept_next[j] - intercept[j];
        lin += dintercept[j] * d;
        quad += d * d;
      }
      if (f_next <= f_cur + lin + quad / (2.0 * step) + 1e-15) break;
      step /= 2.0;
      if (step < 1e-12) break;
    }

    gamma = gamma_next;
    intercept = intercept_next;
    f_cur = f_next;
    const double obj = f_cur + group_penalty(gamma, opts.lambda);
    if (!std::isfinite(obj)) {
      throw OptimError("propensity objective became non-finite at iteration " +
                       std::to_string(iter));
    }
    fit.objective_path.push_back(obj);
    fit.iterations = iter + 1;
    if (std::fabs(obj_prev - obj) < opts.tol) {
      fit.converged = true;
      break;
    }
    obj_prev = obj;
    step *= 1.2;  // allow the step to grow back after backtracking
  }

  fit.model.gamma = std::move(gamma);
  fit.model.intercept = std::move(intercept);
  return fit;
}

TreatmentFreeModel fit_treatment_free(const Mat& x, std::span<const double> y,
                                      const TreatmentFreeFitOptions& opts) {
  const int n = x.rows;
  if (n < 2) throw DataError("fit_treatment_free: need at least two rows");
  if (static_cast<int>(y.size()) != n) {
    throw ShapeError("fit_treatment_free: outcome length mismatch");
  }

  Rng rng(opts.seed);
  DenseNet net = DenseNet::he_init({x.cols, opts.hidden, 1}, rng);
  AdamState adam(net.n_params());
  Vec params(net.n_params());
  net.get_params(params);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int batch = std::min(opts.batch_size, n);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    // Fisher-Yates shuffle for without-replacement mini-batches.
    for (int i = n - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_int(i + 1)]);
    }
    const double lr = scheduled_lr(opts.learning_rate, epoch, opts.lr_decay);
    for (int start = 0; start < n; start += batch) {
      const int b = std::min(batch, n - start);
      Mat xb(b, x.cols);
      Vec yb(b);
      for (int i = 0; i < b; ++i) {
        const int src = order[start + i];
        std::copy(x.row(src), x.row(src) + x.cols, xb.row(i));
        yb[i] = y[src];
      }
      FwdCache cache;
      Mat out = net.forward(xb, cache);
      Mat upstream(b, 1);
      double loss = 0.0;
      for (int i = 0; i < b; ++i) {
        const double resid = yb[i] - out(i, 0);
        loss += resid * resid;
        upstream(i, 0) = -2.0 * resid / b;
      }
      if (!std::isfinite(loss)) {
        throw OptimError("treatment-free fit diverged at epoch " +
                         std::to_string(epoch));
      }
      BackwardResult grads = net.backward(cache, upstream);
      net.get_params(params);
      adam_step(adam, params, grads.param_grads, lr);
      net.set_params(params);
    }
  }
  return TreatmentFreeModel{std::move(net)};
}

double predict_treatment_free(const TreatmentFreeModel& model,
                              std::span<const double> x) {
  return model.net.forward(x)[0];
}

Vec predict_treatment_free_batch(const TreatmentFreeModel& model, const Mat& x) {
  Mat out = model.net.forward(x);
  return Vec(out.data.begin(), out.data.end());
}

}  // namespace dem
