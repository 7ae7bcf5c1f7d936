#include "dem/nn.hpp"

#include <cmath>
#include <string>

#include "dem/errors.hpp"

namespace dem {

DenseNet::DenseNet(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ShapeError("DenseNet needs at least one layer");
  for (int w : widths_) {
    if (w <= 0) throw ShapeError("DenseNet widths must be positive");
  }
  const int depth = static_cast<int>(widths_.size()) - 1;
  weights_.reserve(depth);
  biases_.reserve(depth);
  for (int l = 0; l < depth; ++l) {
    weights_.emplace_back(widths_[l + 1], widths_[l]);
    biases_.emplace_back(widths_[l + 1], 0.0);
  }
}

DenseNet DenseNet::he_init(std::vector<int> widths, Rng& rng) {
  DenseNet net(std::move(widths));
  for (int l = 0; l < net.depth(); ++l) {
    Mat& w = net.weights_[l];
    const double limit = std::sqrt(6.0 / w.cols);
    for (double& v : w.data) v = rng.uniform(-limit, limit);
  }
  return net;
}

void DenseNet::check_input(int cols) const {
  if (cols != input_dim()) {
    throw ShapeError("DenseNet layer 1 expects input of length " +
                     std::to_string(input_dim()) + ", got " +
                     std::to_string(cols));
  }
}

Vec DenseNet::forward(std::span<const double> x) const {
  Mat batch(1, static_cast<int>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) batch(0, static_cast<int>(i)) = x[i];
  Mat out = forward(batch);
  return Vec(out.row(0), out.row(0) + out.cols);
}

Mat DenseNet::forward(const Mat& x) const {
  check_input(x.cols);
  Mat cur = x;
  Mat next;
  for (int l = 0; l < depth(); ++l) {
    kernels::matmul_bt(cur, weights_[l], next);
    const Vec& b = biases_[l];
    const bool hidden = l + 1 < depth();
    for (int i = 0; i < next.rows; ++i) {
      double* row = next.row(i);
      for (int j = 0; j < next.cols; ++j) {
        double v = row[j] + b[j];
        row[j] = hidden ? (v > 0.0 ? v : 0.0) : v;
      }
    }
    cur = std::move(next);
  }
  return cur;
}

Mat DenseNet::forward(const Mat& x, FwdCache& cache) const {
  check_input(x.cols);
  cache.input = x;
  cache.post.assign(depth(), Mat());
  const Mat* cur = &cache.input;
  for (int l = 0; l < depth(); ++l) {
    Mat next;
    kernels::matmul_bt(*cur, weights_[l], next);
    const Vec& b = biases_[l];
    const bool hidden = l + 1 < depth();
    for (int i = 0; i < next.rows; ++i) {
      double* row = next.row(i);
      for (int j = 0; j < next.cols; ++j) {
        double v = row[j] + b[j];
        row[j] = hidden ? (v > 0.0 ? v : 0.0) : v;
      }
    }
    cache.post[l] = std::move(next);
    cur = &cache.post[l];
  }
  cache.ready = true;
  return *cur;
}

BackwardResult DenseNet::backward(const FwdCache& cache, const Mat& upstream) const {
  if (!cache.ready) {
    throw StateError("DenseNet::backward called without a cached forward pass");
  }
  if (upstream.rows != cache.input.rows || upstream.cols != output_dim()) {
    throw ShapeError("DenseNet::backward: upstream gradient shape mismatch");
  }

  BackwardResult result;
  result.param_grads.assign(n_params(), 0.0);

  // delta holds dL/d(activation output of layer l); the ReLU mask for hidden
  // layers is applied when stepping down to layer l-1 (subgradient at 0 is 0).
  Mat delta = upstream;
  for (int l = depth() - 1; l >= 0; --l) {
    const Mat& layer_in = (l == 0) ? cache.input : cache.post[l - 1];

    // dW_l = delta^T * layer_in ; db_l = column sums of delta.
    Mat dw;
    kernels::matmul_ta(delta, layer_in, dw);
    const std::size_t w_off = weight_offset(l);
    for (std::size_t i = 0; i < dw.data.size(); ++i) {
      result.param_grads[w_off + i] += dw.data[i];
    }
    const std::size_t b_off = bias_offset(l);
    for (int i = 0; i < delta.rows; ++i) {
      const double* row = delta.row(i);
      for (int j = 0; j < delta.cols; ++j) result.param_grads[b_off + j] += row[j];
    }

    // d(input of layer l) = delta * W_l, masked by the previous activation.
    Mat dprev;
    kernels::matmul(delta, weights_[l], dprev);
    if (l > 0) {
      const Mat& prev_act = cache.post[l - 1];
      for (int i = 0; i < dprev.rows; ++i) {
        double* row = dprev.row(i);
        const double* act = prev_act.row(i);
        for (int j = 0; j < dprev.cols; ++j) {
          if (act[j] <= 0.0) row[j] = 0.0;
        }
      }
    }
    delta = std::move(dprev);
  }
  result.input_grads = std::move(delta);
  return result;
}

std::size_t DenseNet::n_params() const {
  std::size_t n = 0;
  for (int l = 0; l < depth(); ++l) {
    n += weights_[l].data.size() + biases_[l].size();
  }
  return n;
}

std::size_t DenseNet::weight_offset(int layer) const {
  std::size_t off = 0;
  for (int l = 0; l < layer; ++l) {
    off += weights_[l].data.size() + biases_[l].size();
  }
  return off;
}

std::size_t DenseNet::bias_offset(int layer) const {
  return weight_offset(layer) + weights_[layer].data.size();
}

void DenseNet::get_params(std::span<double> out) const {
  std::size_t k = 0;
  for (int l = 0; l < depth(); ++l) {
    for (double v : weights_[l].data) out[k++] = v;
    for (double v : biases_[l]) out[k++] = v;
  }
}

void DenseNet::set_params(std::span<const double> in) {
  std::size_t k = 0;
  for (int l = 0; l < depth(); ++l) {
    for (double& v : weights_[l].data) v = in[k++];
    for (double& v : biases_[l]) v = in[k++];
  }
}

void adam_step(AdamState& state, std::span<double> params,
               std::span<const double> grads, double lr) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: parameter/gradient size mismatch");
  }
  state.step += 1;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw OptimError("non-finite gradient at Adam step " +
                       std::to_string(state.step));
    }
  }
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

double scheduled_lr(double eta0, int epoch, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw ConfigError("learning-rate decay must lie in (0, 1]");
  }
  if (epoch < 0) throw ConfigError("epoch index must be non-negative");
  return eta0 * std::pow(gamma, static_cast<double>(epoch));
}

void penalty_grad(Penalty kind, double lambda, std::span<const double> params,
                  std::span<double> grad_out) {
  if (params.size() != grad_out.size()) {
    throw ShapeError("penalty_grad: size mismatch");
  }
  if (lambda < 0.0) throw ConfigError("penalty coefficient must be >= 0");
  if (kind == Penalty::L2) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      grad_out[i] += 2.0 * lambda * params[i];
    }
  } else {
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i] > 0.0) grad_out[i] += lambda;
      else if (params[i] < 0.0) grad_out[i] -= lambda;
    }
  }
}

double penalty_value(Penalty kind, double lambda, std::span<const double> params) {
  return kind == Penalty::L2 ? lambda * sum_sq(params) : lambda * norm1(params);
}

}  // namespace dem
