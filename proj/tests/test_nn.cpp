#include <cmath>

#include "doctest.h"

#include "dem/errors.hpp"
#include "dem/nn.hpp"
#include "oracles.hpp"

using namespace dem;

TEST_CASE("forward: single identity layer passes input through") {
  DenseNet net({2, 2});
  net.weight(0) = Mat::identity(2);
  const Vec out = net.forward(Vec{-1.0, 2.0});
  CHECK(out[0] == -1.0);  // output layer has no activation
  CHECK(out[1] == 2.0);
}

TEST_CASE("forward: hidden ReLU clips negative activations") {
  DenseNet net({2, 2, 1});
  net.weight(0) = Mat::identity(2);
  net.weight(1) = Mat(1, 2);
  net.weight(1)(0, 0) = 1.0;
  net.weight(1)(0, 1) = 1.0;
  const Vec out = net.forward(Vec{-1.0, 2.0});
  CHECK(out[0] == 2.0);
}

TEST_CASE("forward: zero network returns zero") {
  DenseNet net({3, 5, 2});
  const Vec out = net.forward(Vec{0.3, -0.7, 1.2});
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
}

TEST_CASE("forward matches an independent layer-by-layer recursion") {
  Rng rng(11);
  DenseNet net = DenseNet::he_init({4, 7, 5, 3}, rng);
  for (int rep = 0; rep < 20; ++rep) {
    Vec x(4);
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    const Vec got = net.forward(x);
    const Vec want = oracles::naive_forward(net, x);
    for (int i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("forward: input length mismatch names the offending layer") {
  DenseNet net({3, 2});
  CHECK_THROWS_WITH_AS(net.forward(Vec{1.0, 2.0}),
                       doctest::Contains("layer 1"), ShapeError);
}

TEST_CASE("backward: single linear layer, loss = output") {
  DenseNet net({2, 1});
  net.weight(0)(0, 0) = 0.5;
  net.weight(0)(0, 1) = -0.25;
  Mat x(1, 2);
  x(0, 0) = 1.0;
  x(0, 1) = 2.0;
  FwdCache cache;
  net.forward(x, cache);
  Mat upstream(1, 1, 1.0);
  const BackwardResult grads = net.backward(cache, upstream);
  // dW = (1, 2), db = 1
  CHECK(grads.param_grads[net.weight_offset(0) + 0] == 1.0);
  CHECK(grads.param_grads[net.weight_offset(0) + 1] == 2.0);
  CHECK(grads.param_grads[net.bias_offset(0)] == 1.0);
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(5);
  for (const auto& widths :
       {std::vector<int>{3, 4, 1}, std::vector<int>{5, 8, 8, 2},
        std::vector<int>{2, 16, 16, 16, 1}}) {
    DenseNet net = DenseNet::he_init(widths, rng);
    Mat x(3, widths.front());
    for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
    // Scalar loss: sum of outputs (upstream of ones).
    FwdCache cache;
    net.forward(x, cache);
    Mat upstream(3, widths.back(), 1.0);
    const BackwardResult grads = net.backward(cache, upstream);

    Vec params(net.n_params());
    net.get_params(params);
    DenseNet probe = net;
    const auto loss = [&](const Vec& p) {
      probe.set_params(p);
      const Mat out = probe.forward(x);
      double total = 0.0;
      for (double v : out.data) total += v;
      return total;
    };
    const Vec fd = oracles::finite_difference(loss, params);
    CHECK(oracles::max_rel_error(grads.param_grads, fd) < 1e-4);
  }
}

TEST_CASE("backward: dead hidden layer blocks gradients upstream of it") {
  DenseNet net({2, 2, 1});
  // All-negative pre-activations in the hidden layer for positive inputs.
  net.weight(0)(0, 0) = -1.0;
  net.weight(0)(1, 1) = -1.0;
  net.bias(0) = {-0.5, -0.5};
  net.weight(1)(0, 0) = 3.0;
  net.weight(1)(0, 1) = 4.0;
  Mat x(1, 2, 1.0);
  FwdCache cache;
  net.forward(x, cache);
  const BackwardResult grads = net.backward(cache, Mat(1, 1, 1.0));
  // Layer-0 weights and biases sit behind the dead ReLU.
  for (std::size_t i = net.weight_offset(0); i < net.weight_offset(1); ++i) {
    CHECK(grads.param_grads[i] == 0.0);
  }
  CHECK(grads.input_grads(0, 0) == 0.0);
  CHECK(grads.input_grads(0, 1) == 0.0);
}

TEST_CASE("backward without a cached forward pass is a state error") {
  DenseNet net({2, 1});
  FwdCache cache;
  CHECK_THROWS_AS(net.backward(cache, Mat(1, 1, 1.0)), StateError);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  AdamState state(3);
  Vec params{1.0, -2.0, 0.5};
  const Vec before = params;
  adam_step(state, params, Vec(3, 0.0), 0.1);
  CHECK(params == before);
}

TEST_CASE("adam: first step from a fresh state") {
  // Bias-corrected moments reduce to g and g^2, so the update is
  // lr * g / (|g| + eps).
  AdamState state(2);
  Vec params{0.0, 0.0};
  const Vec grad{0.3, -2.0};
  const double lr = 0.05;
  adam_step(state, params, grad, lr);
  for (int i = 0; i < 2; ++i) {
    const double expected = -lr * grad[i] / (std::fabs(grad[i]) + state.eps);
    CHECK(params[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("adam: two steps with constant gradient follow the closed form") {
  AdamState state(1);
  Vec params{1.0};
  const double g = 0.7, lr = 0.01;
  adam_step(state, params, Vec{g}, lr);
  adam_step(state, params, Vec{g}, lr);

  // Hand recursion with bias correction.
  double m = 0.0, v = 0.0, p = 1.0;
  for (int t = 1; t <= 2; ++t) {
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mhat = m / (1.0 - std::pow(0.9, t));
    const double vhat = v / (1.0 - std::pow(0.999, t));
    p -= lr * mhat / (std::sqrt(vhat) + 1e-8);
  }
  CHECK(params[0] == doctest::Approx(p).epsilon(1e-14));
  CHECK(state.step == 2);
}

TEST_CASE("adam: non-finite gradient carries the step index") {
  AdamState state(1);
  Vec params{0.0};
  adam_step(state, params, Vec{1.0}, 0.1);
  CHECK_THROWS_WITH_AS(
      adam_step(state, params, Vec{std::nan("")}, 0.1),
      doctest::Contains("step 2"), OptimError);
}

TEST_CASE("scheduled_lr: examples and monotonicity") {
  CHECK(scheduled_lr(0.1, 0, 0.95) == 0.1);
  CHECK(scheduled_lr(0.1, 1, 0.95) == doctest::Approx(0.095).epsilon(1e-15));
  CHECK(scheduled_lr(0.1, 10, 0.95) ==
        doctest::Approx(0.1 * std::pow(0.95, 10)).epsilon(1e-15));
  double prev = scheduled_lr(0.1, 0, 0.9);
  for (int e = 1; e < 50; ++e) {
    const double cur = scheduled_lr(0.1, e, 0.9);
    CHECK(cur <= prev);
    prev = cur;
  }
  CHECK_THROWS_AS(scheduled_lr(0.1, 1, 0.0), ConfigError);
  CHECK_THROWS_AS(scheduled_lr(0.1, 1, 1.5), ConfigError);
}

TEST_CASE("penalty_grad: L2, L1 and the subgradient at zero") {
  Vec grad(3, 0.0);
  penalty_grad(Penalty::L2, 0.5, Vec{2.0, 0.0, -1.0}, grad);
  CHECK(grad[0] == 2.0);
  CHECK(grad[1] == 0.0);
  CHECK(grad[2] == -1.0);

  grad.assign(3, 0.0);
  penalty_grad(Penalty::L1, 1.0, Vec{5.0, 0.0, -5.0}, grad);
  CHECK(grad[0] == 1.0);
  CHECK(grad[1] == 0.0);  // sign(0) = 0
  CHECK(grad[2] == -1.0);

  grad.assign(1, 0.0);
  penalty_grad(Penalty::L1, 0.1, Vec{-3.0}, grad);
  CHECK(grad[0] == doctest::Approx(-0.1));
}

TEST_CASE("determinism: same seed gives bit-identical nets and gradients") {
  Rng rng1(42), rng2(42);
  DenseNet a = DenseNet::he_init({3, 8, 2}, rng1);
  DenseNet b = DenseNet::he_init({3, 8, 2}, rng2);
  Vec pa(a.n_params()), pb(b.n_params());
  a.get_params(pa);
  b.get_params(pb);
  CHECK(pa == pb);

  Mat x(4, 3);
  Rng rx(9);
  for (double& v : x.data) v = rx.uniform(-1, 1);
  FwdCache ca, cb;
  const Mat oa = a.forward(x, ca);
  const Mat ob = b.forward(x, cb);
  CHECK(oa.data == ob.data);
  const Mat upstream(4, 2, 0.3);
  CHECK(a.backward(ca, upstream).param_grads == b.backward(cb, upstream).param_grads);
}
