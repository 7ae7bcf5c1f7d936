#include <cmath>
#include <string>

#include "doctest.h"

#include "dem/errors.hpp"
#include "dem/policy.hpp"
#include "dem/training.hpp"
#include "oracles.hpp"

using namespace dem;

namespace {

TreatmentSpace space_k3_printed() {
  return TreatmentSpace(3, {0b000u, 0b100u, 0b010u, 0b110u, 0b001u, 0b111u});
}

// Small ground-truth model with random weights for recovery experiments. Its
// encoder outputs are centered over the admissible set, matching the fitted
// models' identifiability convention (a combo-mean component would belong to
// the treatment-free effect, which these tests hold at zero).
DemModel make_generator(const TreatmentSpace& space, int p, int r,
                        std::uint64_t seed) {
  Rng rng(seed);
  DemModel gen;
  gen.space = space;
  gen.latent_dim = r;
  gen.alpha.kind = CovariateEncoder::Kind::Network;
  gen.alpha.input_dim = p;
  gen.alpha.net = DenseNet::he_init({p, 8, r}, rng);
  gen.beta.kind = TreatmentEncoder::Kind::Network;
  gen.beta.additive = Mat(r, space.k());
  for (double& v : gen.beta.additive.data) v = rng.uniform(-1.0, 1.0);
  gen.beta.net = DenseNet::he_init({space.k(), 8, r}, rng);
  gen.beta.centering.assign(r, 0.0);
  for (int j = 0; j < space.size(); ++j) {
    const Vec b = encode_treatment_raw(gen.beta, space, j);
    for (int t = 0; t < r; ++t) gen.beta.centering[t] += b[t] / space.size();
  }
  gen.fitted = true;
  return gen;
}

struct Synthetic {
  Mat x;
  std::vector<int> combos;
  Vec y;
};

Synthetic sample_from(const DemModel& gen, int n, std::uint64_t seed) {
  Rng rng(seed);
  Synthetic s;
  s.x = Mat(n, gen.alpha.input_dim);
  for (double& v : s.x.data) v = rng.uniform(-1.0, 1.0);
  s.combos.resize(n);
  for (int i = 0; i < n; ++i) s.combos[i] = rng.uniform_int(gen.space.size());
  const Mat delta = delta_matrix(gen, s.x);
  s.y.resize(n);
  for (int i = 0; i < n; ++i) s.y[i] = delta(i, s.combos[i]);
  return s;
}

}  // namespace

TEST_CASE("weighted_loss: perfect fit and single-row arithmetic") {
  const TreatmentSpace space(1, {0b0u, 0b1u});
  DemModel model;
  model.space = space;
  model.latent_dim = 1;
  model.alpha.kind = CovariateEncoder::Kind::Network;
  model.alpha.input_dim = 1;
  model.alpha.net = DenseNet({1, 1});
  model.alpha.net.bias(0)[0] = 1.0;  // alpha = 1
  model.beta.kind = TreatmentEncoder::Kind::Dictionary;
  model.beta.additive = Mat(1, 1);
  model.beta.additive(0, 0) = 1.0;  // beta(treat) = 1
  model.beta.dictionary = Mat(1, 2);

  Mat x(1, 1, 0.0);
  // y - m_hat = 3, alpha^T beta = 1, w = 2 -> 2 * (3 - 1)^2 = 8
  CHECK(weighted_loss(model, x, std::vector<int>{1}, Vec{3.0}, Vec{2.0},
                      Vec{0.0}) == doctest::Approx(8.0));
  // Residual zero -> loss zero.
  CHECK(weighted_loss(model, x, std::vector<int>{1}, Vec{1.0}, Vec{2.0},
                      Vec{0.0}) == 0.0);
}

TEST_CASE("weighted_loss: batch mean equals the mean of single-row losses") {
  Rng rng(3);
  const TreatmentSpace space = space_k3_printed();
  const DemModel gen = make_generator(space, 4, 2, 7);
  const Synthetic s = sample_from(gen, 32, 11);
  Vec w(32), m_hat(32);
  for (int i = 0; i < 32; ++i) {
    w[i] = rng.uniform(0.5, 2.0);
    m_hat[i] = rng.uniform(-0.5, 0.5);
  }
  Vec y = s.y;
  for (double& v : y) v += rng.uniform(-1.0, 1.0);

  const double batch = weighted_loss(gen, s.x, s.combos, y, w, m_hat);
  double mean = 0.0;
  for (int i = 0; i < 32; ++i) {
    Mat xi(1, 4);
    std::copy(s.x.row(i), s.x.row(i) + 4, xi.row(0));
    mean += weighted_loss(gen, xi, std::vector<int>{s.combos[i]}, Vec{y[i]},
                          Vec{w[i]}, Vec{m_hat[i]});
  }
  mean /= 32;
  CHECK(batch == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("analytic gradients of the centered batch loss match finite "
          "differences for every parameter group") {
  const TreatmentSpace space = space_k3_printed();
  Rng rng(5);
  const int n = 24, p = 4;
  Mat x(n, p);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  std::vector<int> combos(n);
  for (int i = 0; i < n; ++i) combos[i] = rng.uniform_int(space.size());
  Vec y(n), w(n), m_hat(n);
  for (int i = 0; i < n; ++i) {
    y[i] = rng.uniform(-2.0, 2.0);
    w[i] = rng.uniform(0.5, 3.0);
    m_hat[i] = rng.uniform(-0.5, 0.5);
  }

  for (const auto cov_kind :
       {CovariateEncoder::Kind::Network, CovariateEncoder::Kind::Polynomial,
        CovariateEncoder::Kind::BSpline}) {
    for (const auto trt_kind :
         {TreatmentEncoder::Kind::Network, TreatmentEncoder::Kind::Dictionary}) {
      HyperParams hp;
      hp.latent_dim = 3;
      hp.cov_kind = cov_kind;
      hp.trt_kind = trt_kind;
      hp.depth_alpha = 2;
      hp.width_alpha = 8;
      hp.depth_beta = 1;
      hp.width_beta = 8;
      hp.epochs = 1;
      hp.batch_size = n;
      hp.seed = 31;
      // One-epoch fit just to obtain an initialized model of this shape.
      const FitResult warm =
          fit_dem(x, combos, y, space, hp, w, m_hat);
      DemModel model = warm.model;
      model.beta.centering.clear();

      for (const ParamGroup g :
           {ParamGroup::CovariateEncoder, ParamGroup::Additive,
            ParamGroup::Interactive}) {
        const Vec analytic =
            dem_batch_loss_grad(model, g, x, combos, y, w, m_hat);
        Vec params(group_param_count(model, g));
        get_group_params(model, g, params);
        DemModel probe = model;
        const auto f = [&](const Vec& p) {
          set_group_params(probe, g, p);
          return dem_batch_loss(probe, x, combos, y, w, m_hat);
        };
        const Vec fd = oracles::finite_difference(f, params);
        CHECK(oracles::max_rel_error(analytic, fd) < 1e-4);
      }
    }
  }
}

TEST_CASE("objective decomposes into weighted loss plus the two penalties") {
  const TreatmentSpace space = space_k3_printed();
  Rng rng(9);
  const int n = 40;
  Mat x(n, 3);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  std::vector<int> combos(n);
  Vec y(n), w(n, 1.0), m_hat(n, 0.0);
  for (int i = 0; i < n; ++i) {
    combos[i] = rng.uniform_int(space.size());
    y[i] = rng.uniform(-2.0, 2.0);
  }
  HyperParams hp;
  hp.epochs = 2;
  hp.batch_size = 16;
  hp.lambda_additive = 0.01;
  hp.lambda_interactive = 0.05;
  hp.latent_dim = 2;
  hp.width_alpha = 8;
  hp.width_beta = 4;
  const FitResult fit = fit_dem(x, combos, y, space, hp, w, m_hat);

  DemModel uncentered = fit.model;
  uncentered.beta.centering.clear();
  const double total = dem_objective(uncentered, x, combos, y, w, m_hat,
                                     hp.lambda_additive, hp.lambda_interactive);
  const double data_term = dem_batch_loss(uncentered, x, combos, y, w, m_hat);
  Vec wparams(group_param_count(uncentered, ParamGroup::Additive));
  get_group_params(uncentered, ParamGroup::Additive, wparams);
  Vec iparams(group_param_count(uncentered, ParamGroup::Interactive));
  get_group_params(uncentered, ParamGroup::Interactive, iparams);
  const double recomposed =
      data_term + penalty_value(Penalty::L2, hp.lambda_additive, wparams) +
      penalty_value(Penalty::L1, hp.lambda_interactive, iparams);
  CHECK(total == doctest::Approx(recomposed).epsilon(1e-12));
}

TEST_CASE("update log records the alternating order alpha, additive, "
          "interactive") {
  const TreatmentSpace space = space_k3_printed();
  const DemModel gen = make_generator(space, 3, 2, 1);
  const Synthetic s = sample_from(gen, 30, 2);
  HyperParams hp;
  hp.epochs = 2;
  hp.batch_size = 10;
  hp.latent_dim = 2;
  hp.width_alpha = 4;
  hp.width_beta = 4;
  std::vector<char> log;
  fit_dem(s.x, s.combos, s.y, space, hp, Vec(30, 1.0), Vec(30, 0.0), &log);
  REQUIRE(log.size() == 2u * 3u * 3u);  // epochs * batches * sub-steps
  for (std::size_t i = 0; i < log.size(); i += 3) {
    CHECK(log[i] == 'a');
    CHECK(log[i + 1] == '0');
    CHECK(log[i + 2] == '1');
  }
}

TEST_CASE("fit_dem: identical seeds give identical trajectories and models") {
  const TreatmentSpace space = space_k3_printed();
  const DemModel gen = make_generator(space, 3, 2, 13);
  const Synthetic s = sample_from(gen, 50, 17);
  HyperParams hp;
  hp.epochs = 5;
  hp.batch_size = 16;
  hp.latent_dim = 2;
  hp.seed = 23;
  const FitResult a = fit_dem(s.x, s.combos, s.y, space, hp, Vec(50, 1.0),
                              Vec(50, 0.0));
  const FitResult b = fit_dem(s.x, s.combos, s.y, space, hp, Vec(50, 1.0),
                              Vec(50, 0.0));
  CHECK(a.loss_trajectory == b.loss_trajectory);
  Vec pa(group_param_count(a.model, ParamGroup::CovariateEncoder));
  Vec pb(pa.size());
  get_group_params(a.model, ParamGroup::CovariateEncoder, pa);
  get_group_params(b.model, ParamGroup::CovariateEncoder, pb);
  CHECK(pa == pb);
}

TEST_CASE("fit_dem: trajectory has one entry per epoch and the recovery run "
          "drives the loss down") {
  const TreatmentSpace space = space_k3_printed();
  const DemModel gen = make_generator(space, 5, 2, 29);
  const Synthetic s = sample_from(gen, 300, 31);
  HyperParams hp;
  hp.epochs = 120;
  hp.batch_size = 64;
  hp.latent_dim = 2;
  hp.width_alpha = 16;
  hp.width_beta = 8;
  hp.lambda_additive = 0.0;
  hp.lambda_interactive = 0.0;
  hp.learning_rate = 0.03;
  hp.lr_decay = 0.99;
  hp.seed = 37;
  const FitResult fit = fit_dem(s.x, s.combos, s.y, space, hp, Vec(300, 1.0),
                                Vec(300, 0.0));
  CHECK(fit.loss_trajectory.size() == 120u);
  CHECK(fit.loss_trajectory.back() < 0.05 * fit.initial_loss);
  CHECK(fit.model.fitted);

  // Fitted centering: encoder outputs sum to ~0 over the admissible set.
  Vec total(fit.model.latent_dim, 0.0);
  for (int j = 0; j < space.size(); ++j) {
    const Vec bj = encode_treatment(fit.model.beta, space, j);
    for (int t = 0; t < fit.model.latent_dim; ++t) total[t] += bj[t];
  }
  CHECK(norm2(total) < 1e-8);
}

TEST_CASE("fit_dem: the additive-only ablation freezes the interactive "
          "encoder at zero") {
  const TreatmentSpace space = space_k3_printed();
  const DemModel gen = make_generator(space, 3, 2, 41);
  const Synthetic s = sample_from(gen, 60, 43);
  HyperParams hp;
  hp.epochs = 4;
  hp.batch_size = 20;
  hp.latent_dim = 2;
  hp.additive_only = true;
  const FitResult fit = fit_dem(s.x, s.combos, s.y, space, hp, Vec(60, 1.0),
                                Vec(60, 0.0));
  Vec ip(group_param_count(fit.model, ParamGroup::Interactive));
  get_group_params(fit.model, ParamGroup::Interactive, ip);
  for (double v : ip) CHECK(v == 0.0);
}

TEST_CASE("fit_dem: shape and domain errors") {
  const TreatmentSpace space = space_k3_printed();
  Mat x(4, 2, 0.1);
  HyperParams hp;
  hp.batch_size = 2;
  CHECK_THROWS_AS(fit_dem(x, std::vector<int>{0, 1, 2, 9}, Vec(4, 0.0), space,
                          hp, Vec(4, 1.0), Vec(4, 0.0)),
                  DomainError);
  CHECK_THROWS_AS(fit_dem(x, std::vector<int>{0, 1}, Vec(4, 0.0), space, hp,
                          Vec(4, 1.0), Vec(4, 0.0)),
                  ShapeError);
  hp.batch_size = 10;  // exceeds n
  CHECK_THROWS_AS(fit_dem(x, std::vector<int>{0, 1, 2, 3}, Vec(4, 0.0), space,
                          hp, Vec(4, 1.0), Vec(4, 0.0)),
                  ConfigError);
}

TEST_CASE("a scalar-latent encoder trained on a representable effect "
          "recovers it on a grid") {
  // K = 1: the identified quantity is the treated-vs-null contrast, which is
  // set to |x| (exactly representable by a small ReLU network).
  const TreatmentSpace space(1, {0b0u, 0b1u});
  const int grid = 200;
  Mat x(2 * grid, 1);
  std::vector<int> combos(2 * grid);
  Vec y(2 * grid);
  for (int g = 0; g < grid; ++g) {
    const double xg = -1.0 + 2.0 * (g + 0.5) / grid;
    x(2 * g, 0) = xg;
    combos[2 * g] = space.index_of(0b1u);
    y[2 * g] = std::fabs(xg);
    x(2 * g + 1, 0) = xg;
    combos[2 * g + 1] = space.index_of(0b0u);
    y[2 * g + 1] = 0.0;
  }
  HyperParams hp;
  hp.latent_dim = 1;
  hp.depth_alpha = 1;
  hp.width_alpha = 16;
  hp.width_beta = 4;
  hp.lambda_additive = 0.0;
  hp.lambda_interactive = 0.0;
  hp.epochs = 300;
  hp.batch_size = 2 * grid;
  hp.learning_rate = 0.05;
  hp.lr_decay = 0.99;
  hp.seed = 67;
  const FitResult fit = fit_dem(x, combos, y, space, hp,
                                Vec(2 * grid, 1.0), Vec(2 * grid, 0.0));
  double worst = 0.0;
  for (int g = 0; g < grid; ++g) {
    const Vec xg{x(2 * g, 0)};
    const double contrast = q_value(fit.model, 0.0, xg, space.index_of(0b1u)) -
                            q_value(fit.model, 0.0, xg, space.index_of(0b0u));
    worst = std::max(worst, std::fabs(contrast - std::fabs(xg[0])));
  }
  CHECK(worst < 0.1);
}

TEST_CASE("random_search prefers the interactive model on interaction-heavy "
          "data in most repeats") {
  const TreatmentSpace space = space_k3_printed();
  int full_wins = 0;
  const int repeats = 20;
  for (int rep = 0; rep < repeats; ++rep) {
    DemModel gen = make_generator(space, 3, 2, mix_seed(0xAB, rep));
    // Amplify the interactive part so ignoring it clearly costs value.
    for (int l = 0; l < gen.beta.net.depth(); ++l) {
      for (double& v : gen.beta.net.weight(l).data) v *= 2.0;
    }
    gen.beta.centering.assign(2, 0.0);
    for (int j = 0; j < space.size(); ++j) {
      const Vec b = encode_treatment_raw(gen.beta, space, j);
      for (int t = 0; t < 2; ++t) gen.beta.centering[t] += b[t] / space.size();
    }
    const Synthetic train = sample_from(gen, 250, mix_seed(0xAC, rep));
    const Synthetic val = sample_from(gen, 150, mix_seed(0xAD, rep));

    SearchSpace grid;
    grid.latent_dims = {2};
    grid.depths_alpha = {1};
    grid.widths_alpha = {16};
    grid.depths_beta = {1};
    grid.widths_beta = {8};
    grid.lambdas_additive = {0.0};
    grid.lambdas_interactive = {1e-3};
    grid.batch_sizes = {64};
    grid.learning_rates = {0.03};
    grid.epoch_choices = {80};
    grid.additive_only_choices = {false, true};

    const SearchResult res =
        random_search(train.x, train.combos, train.y, val.x, val.combos, val.y,
                      space, grid, 4, nullptr, nullptr, mix_seed(0xAE, rep));
    if (!res.best.additive_only) ++full_wins;
  }
  CHECK(full_wins > repeats / 2);
}

TEST_CASE("random_search: a single configuration is returned as the best") {
  const TreatmentSpace space = space_k3_printed();
  const DemModel gen = make_generator(space, 3, 2, 47);
  const Synthetic train = sample_from(gen, 80, 53);
  const Synthetic val = sample_from(gen, 40, 59);

  SearchSpace grid;
  grid.latent_dims = {2};
  grid.depths_alpha = {1};
  grid.widths_alpha = {8};
  grid.depths_beta = {1};
  grid.widths_beta = {4};
  grid.lambdas_additive = {1e-4};
  grid.lambdas_interactive = {1e-3};
  grid.batch_sizes = {20};
  grid.learning_rates = {1e-2};
  grid.epoch_choices = {10};

  const SearchResult res =
      random_search(train.x, train.combos, train.y, val.x, val.combos, val.y,
                    space, grid, 1, nullptr, nullptr, 61);
  CHECK(res.best.latent_dim == 2);
  CHECK(res.best.epochs == 10);
  CHECK(res.trials.size() == 1u);
  CHECK(res.trials[0].valid);
}

TEST_CASE("random_search: reproducible draws for a fixed seed") {
  const TreatmentSpace space = space_k3_printed();
  SearchSpace grid = SearchSpace::defaults(space.size());
  Rng a(7), b(7);
  for (int i = 0; i < 50; ++i) {
    const HyperParams ha = sample_hyperparams(grid, a);
    const HyperParams hb = sample_hyperparams(grid, b);
    CHECK(ha.latent_dim == hb.latent_dim);
    CHECK(ha.width_alpha == hb.width_alpha);
    CHECK(ha.lambda_interactive == hb.lambda_interactive);
    CHECK(ha.learning_rate == hb.learning_rate);
    CHECK(ha.epochs == hb.epochs);
  }
}

TEST_CASE("random_search: reports every failure when no draw fits") {
  const TreatmentSpace space = space_k3_printed();
  Mat x(10, 2, 0.1);
  std::vector<int> combos(10, 0);
  Vec y(10, 1.0);
  SearchSpace grid;
  grid.learning_rates = {-1.0};  // invalid on purpose
  CHECK_THROWS_AS(random_search(x, combos, y, x, combos, y, space, grid, 3,
                                nullptr, nullptr, 3),
                  OptimError);
}
