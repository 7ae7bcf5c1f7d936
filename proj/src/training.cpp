#include "dem/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "dem/errors.hpp"
#include "dem/policy.hpp"

namespace dem {

void HyperParams::validate(int n) const {
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (batch_size > n) throw ConfigError("batch_size exceeds the sample size");
  if (inner_steps < 1) throw ConfigError("inner_steps must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) {
    throw ConfigError("lr_decay must lie in (0, 1]");
  }
  if (lambda_additive < 0.0 || lambda_interactive < 0.0) {
    throw ConfigError("penalty coefficients must be >= 0");
  }
  if (depth_alpha < 1 || width_alpha < 1 || depth_beta < 1 || width_beta < 1) {
    throw ConfigError("encoder depth/width must be >= 1");
  }
  if (cov_kind == CovariateEncoder::Kind::Polynomial && poly_degree < 1) {
    throw ConfigError("polynomial degree must be >= 1");
  }
}

namespace {

// Builds an unfitted model with freshly initialized parameters.
DemModel init_model(const TreatmentSpace& space, int p, const HyperParams& hp,
                    Rng& rng) {
  DemModel model;
  model.space = space;
  model.latent_dim = hp.latent_dim;

  CovariateEncoder& alpha = model.alpha;
  alpha.kind = hp.cov_kind;
  alpha.input_dim = p;
  alpha.degree = hp.poly_degree;
  int expanded = p;
  if (hp.cov_kind == CovariateEncoder::Kind::Polynomial) {
    expanded = p * hp.poly_degree;
  } else if (hp.cov_kind == CovariateEncoder::Kind::BSpline) {
    alpha.basis = BSplineBasis(-1.0, 1.0, hp.spline_interior_knots,
                               hp.spline_degree);
    expanded = p * alpha.basis.n_basis();
  }
  if (hp.cov_kind == CovariateEncoder::Kind::Network) {
    std::vector<int> widths{expanded};
    for (int l = 0; l < hp.depth_alpha; ++l) widths.push_back(hp.width_alpha);
    widths.push_back(hp.latent_dim);
    alpha.net = DenseNet::he_init(widths, rng);
  } else {
    alpha.net = DenseNet::he_init({expanded, hp.latent_dim}, rng);
  }

  TreatmentEncoder& beta = model.beta;
  beta.kind = hp.trt_kind;
  beta.mask = TreatmentEncoder::MaskRule::PairsAndAbove;
  beta.additive = Mat(hp.latent_dim, space.k());
  {
    const double limit = std::sqrt(6.0 / space.k());
    for (double& v : beta.additive.data) v = rng.uniform(-limit, limit);
  }
  beta.dictionary = Mat(hp.latent_dim, space.size());
  std::vector<int> iw{space.k()};
  for (int l = 0; l < hp.depth_beta; ++l) iw.push_back(hp.width_beta);
  iw.push_back(hp.latent_dim);
  if (hp.additive_only) {
    beta.net = DenseNet(iw);  // zero weights: the interactive part stays 0
  } else {
    beta.net = DenseNet::he_init(iw, rng);
  }
  return model;
}

// All quantities needed by the loss and by the gradient of any one group,
// for one mini-batch under the current parameters. Treatment-encoder outputs
// are centered over the batch's distinct combinations.
struct BatchEval {
  Mat alpha_out;  // B x r
  FwdCache alpha_cache;
  std::vector<int> distinct;      // combination indices present, ascending
  std::vector<int> row_pos;       // per row: position of its combo in distinct
  Mat beta_centered;              // |U| x r
  Mat bits_mat;                   // |U| x K
  FwdCache inter_cache;           // Network interactive variant only
  Vec resid2;                     // residual after removing the fitted effect
  double loss = 0.0;
};

BatchEval eval_batch(const DemModel& model, const Mat& xexp,
                     std::span<const int> combos, std::span<const double> resid,
                     std::span<const double> w) {
  const int b = xexp.rows;
  const int r = model.latent_dim;
  const int na = model.space.size();
  BatchEval ev;
  ev.alpha_out = model.alpha.net.forward(xexp, ev.alpha_cache);

  std::vector<char> present(na, 0);
  for (int i = 0; i < b; ++i) present[combos[i]] = 1;
  for (int j = 0; j < na; ++j) {
    if (present[j]) ev.distinct.push_back(j);
  }
  std::vector<int> pos(na, -1);
  for (std::size_t u = 0; u < ev.distinct.size(); ++u) {
    pos[ev.distinct[u]] = static_cast<int>(u);
  }
  ev.row_pos.resize(b);
  for (int i = 0; i < b; ++i) ev.row_pos[i] = pos[combos[i]];

  const int nu = static_cast<int>(ev.distinct.size());
  ev.bits_mat = Mat(nu, model.space.k());
  for (int u = 0; u < nu; ++u) {
    const Vec bits = model.space.bits_vector(ev.distinct[u]);
    std::copy(bits.begin(), bits.end(), ev.bits_mat.row(u));
  }

  Mat beta_raw(nu, r);
  // Additive part.
  kernels::matmul_bt(ev.bits_mat, model.beta.additive, beta_raw);
  // Interactive part, masked per combination.
  if (model.beta.kind == TreatmentEncoder::Kind::Network) {
    const Mat inter = model.beta.net.forward(ev.bits_mat, ev.inter_cache);
    for (int u = 0; u < nu; ++u) {
      if (model.beta.masked(model.space.mask(ev.distinct[u]))) continue;
      double* row = beta_raw.row(u);
      const double* irow = inter.row(u);
      for (int t = 0; t < r; ++t) row[t] += irow[t];
    }
  } else {
    for (int u = 0; u < nu; ++u) {
      if (model.beta.masked(model.space.mask(ev.distinct[u]))) continue;
      double* row = beta_raw.row(u);
      for (int t = 0; t < r; ++t) row[t] += model.beta.dictionary(t, ev.distinct[u]);
    }
  }

  // Center over distinct combinations.
  Vec mu(r, 0.0);
  for (int u = 0; u < nu; ++u) {
    const double* row = beta_raw.row(u);
    for (int t = 0; t < r; ++t) mu[t] += row[t];
  }
  for (double& v : mu) v /= nu;
  ev.beta_centered = std::move(beta_raw);
  for (int u = 0; u < nu; ++u) {
    double* row = ev.beta_centered.row(u);
    for (int t = 0; t < r; ++t) row[t] -= mu[t];
  }

  ev.resid2.resize(b);
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double pred =
        dot(ev.alpha_out.row_span(i), ev.beta_centered.row_span(ev.row_pos[i]));
    ev.resid2[i] = resid[i] - pred;
    loss += w[i] * ev.resid2[i] * ev.resid2[i];
  }
  ev.loss = loss / b;
  return ev;
}

// Per-distinct-combo upstream gradients through the centering layer:
// g_u = G_u - (sum_u' G_u') / |U| with G_u the sum of row gradients landing
// on combo u.
Mat centered_upstream(const BatchEval& ev, std::span<const double> w) {
  const int b = static_cast<int>(ev.resid2.size());
  const int r = ev.alpha_out.cols;
  const int nu = ev.beta_centered.rows;
  Mat g(nu, r);
  for (int i = 0; i < b; ++i) {
    const double h = -2.0 * w[i] * ev.resid2[i] / b;
    const double* arow = ev.alpha_out.row(i);
    double* grow = g.row(ev.row_pos[i]);
    for (int t = 0; t < r; ++t) grow[t] += h * arow[t];
  }
  Vec total(r, 0.0);
  for (int u = 0; u < nu; ++u) {
    const double* grow = g.row(u);
    for (int t = 0; t < r; ++t) total[t] += grow[t];
  }
  for (double& v : total) v /= nu;
  for (int u = 0; u < nu; ++u) {
    double* grow = g.row(u);
    for (int t = 0; t < r; ++t) grow[t] -= total[t];
  }
  return g;
}

Vec group_grad(const DemModel& model, ParamGroup group, const BatchEval& ev,
               std::span<const double> w) {
  const int b = static_cast<int>(ev.resid2.size());
  const int r = model.latent_dim;
  const int nu = ev.beta_centered.rows;

  if (group == ParamGroup::CovariateEncoder) {
    Mat upstream(b, r);
    for (int i = 0; i < b; ++i) {
      const double h = -2.0 * w[i] * ev.resid2[i] / b;
      const double* brow = ev.beta_centered.row(ev.row_pos[i]);
      double* urow = upstream.row(i);
      for (int t = 0; t < r; ++t) urow[t] = h * brow[t];
    }
    return model.alpha.net.backward(ev.alpha_cache, upstream).param_grads;
  }

  Mat g = centered_upstream(ev, w);
  if (group == ParamGroup::Additive) {
    // dW = sum_u g_u (outer) bits_u, laid out row-major like the matrix.
    Mat dw;
    kernels::matmul_ta(g, ev.bits_mat, dw);  // r x K
    return std::move(dw.data);
  }

  // Interactive group: masked combinations receive no upstream gradient.
  for (int u = 0; u < nu; ++u) {
    if (model.beta.masked(model.space.mask(ev.distinct[u]))) {
      double* grow = g.row(u);
      for (int t = 0; t < r; ++t) grow[t] = 0.0;
    }
  }
  if (model.beta.kind == TreatmentEncoder::Kind::Network) {
    return model.beta.net.backward(ev.inter_cache, g).param_grads;
  }
  Vec grad(model.beta.dictionary.data.size(), 0.0);
  // Dictionary layout: (t, combo) row-major over r x |A|.
  for (int u = 0; u < nu; ++u) {
    const int j = ev.distinct[u];
    const double* grow = g.row(u);
    for (int t = 0; t < r; ++t) {
      grad[static_cast<std::size_t>(t) * model.space.size() + j] = grow[t];
    }
  }
  return grad;
}

double full_objective(const DemModel& model, const Mat& xexp,
                      std::span<const int> combos, std::span<const double> resid,
                      std::span<const double> w, double lambda_a,
                      double lambda_i) {
  BatchEval ev = eval_batch(model, xexp, combos, resid, w);
  double obj = ev.loss;
  obj += penalty_value(Penalty::L2, lambda_a,
                       {model.beta.additive.data.data(),
                        model.beta.additive.data.size()});
  Vec ip(group_param_count(model, ParamGroup::Interactive));
  get_group_params(model, ParamGroup::Interactive, ip);
  obj += penalty_value(Penalty::L1, lambda_i, ip);
  return obj;
}

}  // namespace

double weighted_loss(const DemModel& model, const Mat& x,
                     std::span<const int> combo_idx, std::span<const double> y,
                     std::span<const double> w, std::span<const double> m_hat) {
  const int n = x.rows;
  if (n == 0) throw DataError("weighted_loss: empty batch");
  if (static_cast<int>(combo_idx.size()) != n ||
      static_cast<int>(y.size()) != n || static_cast<int>(w.size()) != n ||
      static_cast<int>(m_hat.size()) != n) {
    throw ShapeError("weighted_loss: row-aligned inputs required");
  }
  const Mat alpha = encode_covariates_batch(model.alpha, x);
  Mat betas(model.space.size(), model.latent_dim);
  for (int j = 0; j < model.space.size(); ++j) {
    const Vec bj = encode_treatment(model.beta, model.space, j);
    std::copy(bj.begin(), bj.end(), betas.row(j));
  }
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double pred = dot(alpha.row_span(i), betas.row_span(combo_idx[i]));
    const double resid = y[i] - m_hat[i] - pred;
    if (!std::isfinite(resid)) {
      throw OptimError("weighted_loss: non-finite residual at row " +
                       std::to_string(i));
    }
    loss += w[i] * resid * resid;
  }
  return loss / n;
}

double dem_batch_loss(const DemModel& model, const Mat& x,
                      std::span<const int> combo_idx, std::span<const double> y,
                      std::span<const double> w, std::span<const double> m_hat) {
  const Mat xexp = expand_features_batch(model.alpha, x);
  Vec resid(x.rows);
  for (int i = 0; i < x.rows; ++i) resid[i] = y[i] - m_hat[i];
  return eval_batch(model, xexp, combo_idx, resid, w).loss;
}

std::size_t group_param_count(const DemModel& model, ParamGroup g) {
  switch (g) {
    case ParamGroup::CovariateEncoder:
      return model.alpha.net.n_params();
    case ParamGroup::Additive:
      return model.beta.additive.data.size();
    case ParamGroup::Interactive:
    default:
      return model.beta.kind == TreatmentEncoder::Kind::Network
                 ? model.beta.net.n_params()
                 : model.beta.dictionary.data.size();
  }
}

void get_group_params(const DemModel& model, ParamGroup g, std::span<double> out) {
  switch (g) {
    case ParamGroup::CovariateEncoder:
      model.alpha.net.get_params(out);
      return;
    case ParamGroup::Additive:
      std::copy(model.beta.additive.data.begin(), model.beta.additive.data.end(),
                out.begin());
      return;
    case ParamGroup::Interactive:
      if (model.beta.kind == TreatmentEncoder::Kind::Network) {
        model.beta.net.get_params(out);
      } else {
        std::copy(model.beta.dictionary.data.begin(),
                  model.beta.dictionary.data.end(), out.begin());
      }
      return;
  }
}

void set_group_params(DemModel& model, ParamGroup g, std::span<const double> in) {
  switch (g) {
    case ParamGroup::CovariateEncoder:
      model.alpha.net.set_params(in);
      return;
    case ParamGroup::Additive:
      std::copy(in.begin(), in.end(), model.beta.additive.data.begin());
      return;
    case ParamGroup::Interactive:
      if (model.beta.kind == TreatmentEncoder::Kind::Network) {
        model.beta.net.set_params(in);
      } else {
        std::copy(in.begin(), in.end(), model.beta.dictionary.data.begin());
      }
      return;
  }
}

Vec dem_batch_loss_grad(const DemModel& model, ParamGroup g, const Mat& x,
                        std::span<const int> combo_idx, std::span<const double> y,
                        std::span<const double> w, std::span<const double> m_hat) {
  const Mat xexp = expand_features_batch(model.alpha, x);
  Vec resid(x.rows);
  for (int i = 0; i < x.rows; ++i) resid[i] = y[i] - m_hat[i];
  const BatchEval ev = eval_batch(model, xexp, combo_idx, resid, w);
  return group_grad(model, g, ev, w);
}

double dem_objective(const DemModel& model, const Mat& x,
                     std::span<const int> combo_idx, std::span<const double> y,
                     std::span<const double> w, std::span<const double> m_hat,
                     double lambda_additive, double lambda_interactive) {
  const Mat xexp = expand_features_batch(model.alpha, x);
  Vec resid(x.rows);
  for (int i = 0; i < x.rows; ++i) resid[i] = y[i] - m_hat[i];
  return full_objective(model, xexp, combo_idx, resid, w, lambda_additive,
                        lambda_interactive);
}

FitResult fit_dem(const Mat& x, std::span<const int> combo_idx,
                  std::span<const double> y, const TreatmentSpace& space,
                  const HyperParams& hp, std::span<const double> weights,
                  std::span<const double> m_hat,
                  std::vector<char>* update_log) {
  const int n = x.rows;
  if (n == 0) throw DataError("fit_dem: empty dataset");
  hp.validate(n);
  if (static_cast<int>(combo_idx.size()) != n ||
      static_cast<int>(y.size()) != n ||
      static_cast<int>(weights.size()) != n ||
      static_cast<int>(m_hat.size()) != n) {
    throw ShapeError("fit_dem: row-aligned inputs required");
  }
  for (int idx : combo_idx) {
    if (idx < 0 || idx >= space.size()) {
      throw DomainError("fit_dem: combination index out of range");
    }
  }

  Rng rng(hp.seed);
  DemModel model = init_model(space, x.cols, hp, rng);
  const Mat xexp = expand_features_batch(model.alpha, x);
  Vec resid(n);
  for (int i = 0; i < n; ++i) resid[i] = y[i] - m_hat[i];

  struct GroupState {
    ParamGroup group;
    AdamState adam;
    Vec params;
    Penalty penalty;
    double lambda;
  };
  std::vector<GroupState> groups;
  groups.push_back({ParamGroup::CovariateEncoder,
                    AdamState(group_param_count(model, ParamGroup::CovariateEncoder)),
                    Vec(group_param_count(model, ParamGroup::CovariateEncoder)),
                    Penalty::L2, 0.0});
  groups.push_back({ParamGroup::Additive,
                    AdamState(group_param_count(model, ParamGroup::Additive)),
                    Vec(group_param_count(model, ParamGroup::Additive)),
                    Penalty::L2, hp.lambda_additive});
  groups.push_back({ParamGroup::Interactive,
                    AdamState(group_param_count(model, ParamGroup::Interactive)),
                    Vec(group_param_count(model, ParamGroup::Interactive)),
                    Penalty::L1, hp.lambda_interactive});
  for (auto& g : groups) {
    g.adam.beta1 = hp.adam_beta1;
    g.adam.beta2 = hp.adam_beta2;
    g.adam.eps = hp.adam_eps;
  }

  FitResult result;
  result.hp = hp;
  result.initial_loss = full_objective(model, xexp, combo_idx, resid, weights,
                                       hp.lambda_additive, hp.lambda_interactive);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  const int bsz = hp.batch_size;

  Mat xb;
  std::vector<int> cb;
  Vec rb, wb;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i) {
      std::swap(order[i], order[rng.uniform_int(i + 1)]);
    }
    const double lr = scheduled_lr(hp.learning_rate, epoch, hp.lr_decay);

    for (int start = 0; start < n; start += bsz) {
      const int b = std::min(bsz, n - start);
      xb = Mat(b, xexp.cols);
      cb.resize(b);
      rb.resize(b);
      wb.resize(b);
      for (int i = 0; i < b; ++i) {
        const int src = order[start + i];
        std::copy(xexp.row(src), xexp.row(src) + xexp.cols, xb.row(i));
        cb[i] = combo_idx[src];
        rb[i] = resid[src];
        wb[i] = weights[src];
      }

      for (auto& g : groups) {
        const bool frozen =
            hp.additive_only && g.group == ParamGroup::Interactive;
        if (frozen) continue;
        for (int inner = 0; inner < hp.inner_steps; ++inner) {
          const BatchEval ev = eval_batch(model, xb, cb, rb, wb);
          Vec grad = group_grad(model, g.group, ev, wb);
          get_group_params(model, g.group, g.params);
          if (g.lambda > 0.0) {
            penalty_grad(g.penalty, g.lambda, g.params, grad);
          }
          adam_step(g.adam, g.params, grad, lr);
          set_group_params(model, g.group, g.params);
        }
        if (update_log != nullptr) {
          const char tag = g.group == ParamGroup::CovariateEncoder ? 'a'
                           : g.group == ParamGroup::Additive       ? '0'
                                                                   : '1';
          update_log->push_back(tag);
        }
      }
    }

    const double obj = full_objective(model, xexp, combo_idx, resid, weights,
                                      hp.lambda_additive, hp.lambda_interactive);
    if (!std::isfinite(obj)) {
      throw OptimError("fit_dem diverged at epoch " + std::to_string(epoch));
    }
    result.loss_trajectory.push_back(obj);
  }

  // Fix the centering over the whole admissible set so fitted encoder outputs
  // sum to zero across combinations.
  model.beta.centering.assign(model.latent_dim, 0.0);
  for (int j = 0; j < space.size(); ++j) {
    const Vec bj = encode_treatment_raw(model.beta, space, j);
    for (int t = 0; t < model.latent_dim; ++t) model.beta.centering[t] += bj[t];
  }
  for (double& v : model.beta.centering) v /= space.size();
  model.fitted = true;

  result.model = std::move(model);
  return result;
}

FitResult fit_dem(const Mat& x, std::span<const int> combo_idx,
                  std::span<const double> y, const TreatmentSpace& space,
                  const HyperParams& hp, const PropensityModel* propensity,
                  const TreatmentFreeModel* treatment_free,
                  std::vector<char>* update_log) {
  const int n = x.rows;
  Vec weights(n, 1.0);
  if (propensity != nullptr) {
    for (int i = 0; i < n; ++i) {
      weights[i] = stabilized_weight(*propensity, x.row_span(i), combo_idx[i]);
    }
  }
  Vec m_hat(n, 0.0);
  if (treatment_free != nullptr) {
    m_hat = predict_treatment_free_batch(*treatment_free, x);
  }
  return fit_dem(x, combo_idx, y, space, hp, weights, m_hat, update_log);
}

SearchSpace SearchSpace::defaults(int n_combos) {
  SearchSpace s;
  std::set<int> dims{2, 4, 8, std::min(16, n_combos)};
  s.latent_dims.assign(dims.begin(), dims.end());
  s.depths_alpha = {1, 2, 3};
  s.widths_alpha = {16, 32, 64};
  s.depths_beta = {1, 2};
  s.widths_beta = {8, 16, 32};
  s.lambdas_additive = {1e-5, 1e-4, 1e-3, 1e-2};
  s.lambdas_interactive = {1e-4, 1e-3, 1e-2, 1e-1};
  s.batch_sizes = {32, 64, 128};
  s.learning_rates = {3e-3, 1e-2, 3e-2};
  s.epoch_choices = {100, 200};
  s.cov_kinds = {CovariateEncoder::Kind::Network};
  s.trt_kinds = {TreatmentEncoder::Kind::Network};
  return s;
}

namespace {
template <typename T>
void maybe_pick(const std::vector<T>& choices, T& target, Rng& rng) {
  if (!choices.empty()) {
    target = choices[rng.uniform_int(static_cast<int>(choices.size()))];
  }
}
}  // namespace

HyperParams sample_hyperparams(const SearchSpace& space, Rng& rng) {
  HyperParams hp;
  maybe_pick(space.latent_dims, hp.latent_dim, rng);
  maybe_pick(space.depths_alpha, hp.depth_alpha, rng);
  maybe_pick(space.widths_alpha, hp.width_alpha, rng);
  maybe_pick(space.depths_beta, hp.depth_beta, rng);
  maybe_pick(space.widths_beta, hp.width_beta, rng);
  maybe_pick(space.lambdas_additive, hp.lambda_additive, rng);
  maybe_pick(space.lambdas_interactive, hp.lambda_interactive, rng);
  maybe_pick(space.batch_sizes, hp.batch_size, rng);
  maybe_pick(space.learning_rates, hp.learning_rate, rng);
  maybe_pick(space.epoch_choices, hp.epochs, rng);
  maybe_pick(space.cov_kinds, hp.cov_kind, rng);
  maybe_pick(space.trt_kinds, hp.trt_kind, rng);
  if (!space.additive_only_choices.empty()) {
    hp.additive_only = space.additive_only_choices[rng.uniform_int(
        static_cast<int>(space.additive_only_choices.size()))];
  }
  return hp;
}

SearchResult random_search(const Mat& x_train, std::span<const int> combo_train,
                           std::span<const double> y_train, const Mat& x_val,
                           std::span<const int> combo_val,
                           std::span<const double> y_val,
                           const TreatmentSpace& space, const SearchSpace& grid,
                           int n_draws, const PropensityModel* propensity,
                           const TreatmentFreeModel* treatment_free,
                           std::uint64_t seed) {
  if (n_draws < 1) throw ConfigError("random_search: n_draws must be >= 1");
  Rng rng(seed);

  SearchResult result;
  result.trials.resize(n_draws);
  std::vector<FitResult> fits(n_draws);

  // Draw every configuration up front (one RNG stream), then fan the
  // independent fits out across workers; results land in per-draw slots so
  // the outcome does not depend on the thread count.
  for (int d = 0; d < n_draws; ++d) {
    SearchTrial& trial = result.trials[d];
    trial.hp = sample_hyperparams(grid, rng);
    trial.hp.batch_size = std::min(trial.hp.batch_size, x_train.rows);
    trial.hp.seed = mix_seed(seed, static_cast<std::uint64_t>(d));
  }
#pragma omp parallel for schedule(dynamic) if (n_draws > 1)
  for (int d = 0; d < n_draws; ++d) {
    SearchTrial& trial = result.trials[d];
    try {
      fits[d] = fit_dem(x_train, combo_train, y_train, space, trial.hp,
                        propensity, treatment_free);
      const Policy policy = make_policy(fits[d].model);
      const EmpiricalValue ev = empirical_value(policy, x_val, combo_val, y_val);
      trial.valid = ev.defined;
      trial.validation_value = ev.defined
                                   ? ev.value
                                   : -std::numeric_limits<double>::infinity();
      if (!ev.defined) trial.error = "no validation row matched the rule";
      fits[d].validation_value = trial.validation_value;
    } catch (const Error& e) {
      trial.valid = false;
      trial.validation_value = -std::numeric_limits<double>::infinity();
      trial.error = e.what();
    }
  }

  int best = -1;
  for (int d = 0; d < n_draws; ++d) {
    if (!result.trials[d].valid) continue;
    if (best < 0) {
      best = d;
      continue;
    }
    const SearchTrial& cand = result.trials[d];
    const SearchTrial& cur = result.trials[best];
    if (cand.validation_value > cur.validation_value) {
      best = d;
    } else if (cand.validation_value == cur.validation_value) {
      if (cand.hp.latent_dim < cur.hp.latent_dim ||
          (cand.hp.latent_dim == cur.hp.latent_dim &&
           cand.hp.lambda_interactive < cur.hp.lambda_interactive)) {
        best = d;
      }
    }
  }
  if (best < 0) {
    std::string msg = "random_search: every configuration failed:";
    for (const auto& t : result.trials) {
      msg += "\n  - " + (t.error.empty() ? std::string("unknown") : t.error);
    }
    throw OptimError(msg);
  }
  result.best = result.trials[best].hp;
  result.fit = std::move(fits[best]);
  return result;
}

}  // namespace dem
