#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dem/matrix.hpp"
#include "dem/rng.hpp"

namespace dem {

// Cached activations from a forward pass, consumed by backward().
struct FwdCache {
  Mat input;              // batch inputs, one row per sample
  std::vector<Mat> post;  // post[l] = output of layer l (after ReLU if hidden)
  bool ready = false;
};

struct BackwardResult {
  Vec param_grads;  // flat, same layout as get_params()
  Mat input_grads;  // d loss / d input, one row per sample
};

// Fully connected feed-forward network: affine layers with ReLU on all
// hidden layers and identity on the output layer. Parameters flatten to a
// single vector (per layer: weights row-major, then biases) so optimizers
// and finite-difference checks can treat the network as one coordinate block.
//
// A constructed network is immutable during inference and safe to share
// read-only across threads; forward passes that need gradients write their
// activations into a caller-owned FwdCache.
class DenseNet {
public:
  DenseNet() = default;
  // Zero weights and biases; widths = (r_0, ..., r_L).
  explicit DenseNet(std::vector<int> widths);
  static DenseNet he_init(std::vector<int> widths, Rng& rng);

  int depth() const { return static_cast<int>(weights_.size()); }
  int input_dim() const { return widths_.empty() ? 0 : widths_.front(); }
  int output_dim() const { return widths_.empty() ? 0 : widths_.back(); }
  const std::vector<int>& widths() const { return widths_; }

  Mat& weight(int layer) { return weights_[layer]; }
  const Mat& weight(int layer) const { return weights_[layer]; }
  Vec& bias(int layer) { return biases_[layer]; }
  const Vec& bias(int layer) const { return biases_[layer]; }

  Vec forward(std::span<const double> x) const;
  Mat forward(const Mat& x) const;
  Mat forward(const Mat& x, FwdCache& cache) const;
  // Exact reverse-mode gradients of a scalar loss whose gradient w.r.t. the
  // network output is `upstream` (one row per sample). The ReLU subgradient
  // at 0 is 0. Throws StateError if the cache is not ready.
  BackwardResult backward(const FwdCache& cache, const Mat& upstream) const;

  std::size_t n_params() const;
  void get_params(std::span<double> out) const;
  void set_params(std::span<const double> in);
  // Offsets of layer `l`'s weight block / bias block in the flat layout.
  std::size_t weight_offset(int layer) const;
  std::size_t bias_offset(int layer) const;

private:
  void check_input(int cols) const;

  std::vector<int> widths_;
  std::vector<Mat> weights_;  // weights_[l]: widths_[l+1] x widths_[l]
  std::vector<Vec> biases_;   // biases_[l]: widths_[l+1]
};

// Adam optimizer state for one flat parameter block.
struct AdamState {
  Vec m;  // first-moment accumulator
  Vec v;  // second-moment accumulator
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// One Adam update in place. Throws OptimError (carrying the step index) on a
// non-finite gradient entry.
void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, double lr);

// eta0 * gamma^epoch. gamma must lie in (0, 1].
double scheduled_lr(double eta0, int epoch, double gamma);

enum class Penalty { L1, L2 };

// Adds the penalty subgradient to grad_out. L2 adds 2*lambda*theta (gradient
// of lambda*||theta||^2); L1 adds lambda*sign(theta) with sign(0) = 0.
void penalty_grad(Penalty kind, double lambda, std::span<const double> params,
                  std::span<double> grad_out);

// lambda*||theta||^2 (L2) or lambda*||theta||_1 (L1).
double penalty_value(Penalty kind, double lambda, std::span<const double> params);

}  // namespace dem
