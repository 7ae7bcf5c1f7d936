// Long-running distributional properties of the training loop, kept out of
// the main unit binary: 20-seed replicate averages at realistic sample sizes.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "dem/nuisance.hpp"
#include "dem/policy.hpp"
#include "dem/training.hpp"

using namespace dem;

namespace {

HyperParams smoke_hp() {
  HyperParams hp;
  hp.latent_dim = 4;
  hp.depth_alpha = 2;
  hp.width_alpha = 32;
  hp.depth_beta = 1;
  hp.width_beta = 4;
  hp.lambda_additive = 1e-4;
  hp.lambda_interactive = 5e-2;
  hp.batch_size = 1000;
  hp.learning_rate = 0.05;
  hp.epochs = 300;
  return hp;
}

}  // namespace

TEST_CASE("double robustness: either nuisance model alone supports policy "
          "learning well above chance") {
  const SimSetting setting = make_setting(1);
  const Policy oracle = make_oracle_policy(setting);
  const int n = 1000;

  double acc_true_prop = 0.0;   // true propensity weights, zero m_hat
  double acc_fitted_m = 0.0;    // unit weights, fitted m_hat
  const int seeds = 20;
  for (int rep = 0; rep < seeds; ++rep) {
    const std::uint64_t seed = mix_seed(0xD0B1, rep);
    const SimSample sample = generate_sample(setting, n, AssignScheme::Uniform,
                                             seed);
    Rng erng(mix_seed(0xD0B2, rep));
    const Mat fresh = gen_covariates(2000, setting.p, erng);

    // (a) true (uniform) propensities stabilized by observed frequencies.
    {
      Vec counts(setting.space.size(), 0.0);
      for (int idx : sample.combo_idx) counts[idx] += 1.0;
      Vec w(n);
      for (int i = 0; i < n; ++i) {
        w[i] = (counts[sample.combo_idx[i]] / n) /
               sample.true_propensity(i, sample.combo_idx[i]);
      }
      HyperParams hp = smoke_hp();
      hp.seed = mix_seed(seed, 0xA);
      const FitResult fit = fit_dem(sample.x, sample.combo_idx, sample.y,
                                    setting.space, hp, w, Vec(n, 0.0));
      acc_true_prop += accuracy(make_policy(fit.model), oracle, fresh);
    }

    // (b) unit weights with a fitted treatment-free model.
    {
      TreatmentFreeFitOptions tf;
      tf.hidden = 8;
      tf.epochs = 150;
      tf.lr_decay = 0.99;
      tf.seed = mix_seed(seed, 0xB);
      const TreatmentFreeModel mfree =
          fit_treatment_free(sample.x, sample.y, tf);
      HyperParams hp = smoke_hp();
      hp.seed = mix_seed(seed, 0xC);
      const FitResult fit =
          fit_dem(sample.x, sample.combo_idx, sample.y, setting.space, hp,
                  Vec(n, 1.0), predict_treatment_free_batch(mfree, sample.x));
      acc_fitted_m += accuracy(make_policy(fit.model), oracle, fresh);
    }
  }
  acc_true_prop /= seeds;
  acc_fitted_m /= seeds;
  MESSAGE("true-propensity arm: ", acc_true_prop,
          ", fitted-m arm: ", acc_fitted_m);
  CHECK(acc_true_prop > 3.0 / 6.0);
  CHECK(acc_fitted_m > 3.0 / 6.0);
}

TEST_CASE("stochastic descent: the epoch objective is non-increasing in at "
          "least 90% of transitions") {
  const TreatmentSpace space(3, {0b000u, 0b100u, 0b010u, 0b110u, 0b001u, 0b111u});
  long down = 0, total = 0;
  for (int seedidx = 0; seedidx < 20; ++seedidx) {
    // Self-consistent data from a random centered generator plus mild noise.
    Rng grng(mix_seed(0x7247, seedidx));
    DemModel gen;
    gen.space = space;
    gen.latent_dim = 2;
    gen.alpha.kind = CovariateEncoder::Kind::Network;
    gen.alpha.input_dim = 5;
    gen.alpha.net = DenseNet::he_init({5, 8, 2}, grng);
    gen.beta.kind = TreatmentEncoder::Kind::Network;
    gen.beta.additive = Mat(2, 3);
    for (double& v : gen.beta.additive.data) v = grng.uniform(-1.0, 1.0);
    gen.beta.net = DenseNet::he_init({3, 8, 2}, grng);
    gen.beta.centering.assign(2, 0.0);
    for (int j = 0; j < space.size(); ++j) {
      const Vec b = encode_treatment_raw(gen.beta, space, j);
      for (int t = 0; t < 2; ++t) gen.beta.centering[t] += b[t] / space.size();
    }

    const int n = 500;
    Rng drng(mix_seed(0x7248, seedidx));
    Mat x(n, 5);
    for (double& v : x.data) v = drng.uniform(-1.0, 1.0);
    std::vector<int> combos(n);
    for (int i = 0; i < n; ++i) combos[i] = drng.uniform_int(space.size());
    const Mat delta = delta_matrix(gen, x);
    Vec y(n);
    for (int i = 0; i < n; ++i) y[i] = delta(i, combos[i]) + 0.3 * drng.normal();

    HyperParams hp;  // library defaults
    hp.latent_dim = 2;
    hp.seed = mix_seed(0x7249, seedidx);
    const FitResult fit =
        fit_dem(x, combos, y, space, hp, Vec(n, 1.0), Vec(n, 0.0));
    for (std::size_t e = 1; e < fit.loss_trajectory.size(); ++e) {
      total += 1;
      if (fit.loss_trajectory[e] <=
          fit.loss_trajectory[e - 1] * (1.0 + 1e-9) + 1e-12) {
        down += 1;
      }
    }
  }
  const double fraction = static_cast<double>(down) / total;
  MESSAGE("non-increasing fraction: ", fraction);
  CHECK(fraction >= 0.9);
}
