#include "dem/simdata.hpp"

#include <algorithm>
#include <cmath>

#include "dem/errors.hpp"

namespace dem {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double remap01(double u) { return (u + 1.0) / 2.0 + 1e-6; }
double remap_log(double u) { return std::log(remap01(u)); }
double remap_inv(double u) { return 1.0 / remap01(u); }

std::string remap_description() {
  return "log(u) evaluated as log((u+1)/2 + 1e-6); "
         "1/u evaluated as 1/((u+1)/2 + 1e-6)";
}

double SimSetting::m(std::span<const double> x) const {
  return 1.0 + 0.5 * x[0] + 0.5 * x[1] * x[1];
}

double SimSetting::additive_effect(int k, std::span<const double> x) const {
  if (id <= 2) {
    switch (k) {
      case 0:  // (1,0,0)
        return std::sin(x[2]) + 2.0 * remap_log(x[3]) + 2.0 * remap_log(x[6]);
      case 1:  // (0,1,0)
        return 2.0 * x[1] * remap_log(x[4]) + x[6];
      case 2:  // (0,0,1)
        return 2.0 * x[0] + std::exp(x[2] + x[3]);
      default:
        throw DomainError("treatment index out of range for settings 1-2");
    }
  }
  switch (k) {
    case 0:  // (1,0,0,0,0)
      return std::exp(x[1] - x[4]);
    case 1:  // (0,1,0,0,0)
      return std::pow(x[0] + x[4] - x[7] * x[7], 3.0);
    case 2:  // (0,0,1,0,0)
      return x[1] * std::sin(x[3]) - 1.0;
    case 3:  // (0,0,0,1,0)
      return 2.0 * remap_log(x[2]) +
             4.0 * remap_log(x[7]) * std::cos(2.0 * kPi * x[9]);
    case 4:  // (0,0,0,0,1)
      return std::pow(x[0] - 0.25, 3.0);
    default:
      throw DomainError("treatment index out of range for settings 3-4");
  }
}

double SimSetting::interaction_effect(int combo_index,
                                      std::span<const double> x) const {
  if (!interactions) return 0.0;
  const std::uint32_t bits = space.mask(combo_index);
  if (id == 2) {
    switch (bits) {
      case 0b110u:  // (0,1,1)
        return std::sin(5.0 * x[0] * x[0]) - 3.0 * (x[1] - 0.5) * (x[1] - 0.5);
      case 0b111u:  // (1,1,1)
        return 2.0 * std::sin((x[1] - x[3]) * (x[1] - x[3]));
      default:
        return 0.0;
    }
  }
  switch (bits) {
    case 0b10100u:  // (0,0,1,0,1)
      return std::exp(2.0 * x[1]);
    case 0b10010u:  // (0,1,0,0,1)
      return std::exp(2.0 * x[3] + x[8]);
    case 0b11010u:  // (0,1,0,1,1)
      return -4.0 * remap_log(x[5]);
    case 0b10101u:  // (1,0,1,0,1)
      return -1.5 * std::cos(2.0 * kPi * x[0] + x[7] * x[7]);
    case 0b10011u:  // (1,1,0,0,1)
      return -4.0 * remap_log(x[5]);
    case 0b11011u:  // (1,1,0,1,1)
      return x[5] * x[5] + 0.5 * std::sin(2.0 * kPi * remap_inv(x[6]));
    default:
      return 0.0;
  }
}

std::vector<std::string> SimSetting::formula_manifest() const {
  std::vector<std::string> out;
  out.push_back("remap: " + remap_description());
  out.push_back("m(x) = 1 + 0.5*x1 + 0.5*x2^2");
  if (id <= 2) {
    out.push_back("effect[1] = sin(x3) + 2*log(x4) + 2*log(x7)");
    out.push_back("effect[2] = 2*x2*log(x5) + x7");
    out.push_back("effect[3] = 2*x1 + exp(x3 + x4)");
    if (interactions) {
      out.push_back("interaction(0,1,1) = sin(5*x1^2) - 3*(x2 - 0.5)^2");
      out.push_back("interaction(1,1,1) = 2*sin((x2 - x4)^2)");
    }
  } else {
    out.push_back("effect[1] = exp(x2 - x5)");
    out.push_back("effect[2] = (x1 + x5 - x8^2)^3");
    out.push_back("effect[3] = x2*sin(x4) - 1");
    out.push_back("effect[4] = 2*log(x3) + 4*log(x8)*cos(2*pi*x10)");
    out.push_back("effect[5] = (x1 - 0.25)^3");
    if (interactions) {
      out.push_back("interaction(0,0,1,0,1) = exp(2*x2)");
      out.push_back("interaction(0,1,0,0,1) = exp(2*x4 + x9)");
      out.push_back("interaction(0,1,0,1,1) = -4*log(x6)");
      out.push_back("interaction(1,0,1,0,1) = -1.5*cos(2*pi*x1 + x8^2)");
      out.push_back("interaction(1,1,0,0,1) = -4*log(x6)");
      out.push_back("interaction(1,1,0,1,1) = x6^2 + 0.5*sin(2*pi/x7)");
    }
  }
  return out;
}

SimSetting make_setting(int id) {
  if (id < 1 || id > 4) throw ConfigError("simulation setting must be 1..4");
  SimSetting s;
  s.id = id;
  s.interactions = (id == 2 || id == 4);
  if (id <= 2) {
    // (0,0,0), (0,0,1), (0,1,0), (0,1,1), (1,0,0), (1,1,1)
    s.space = TreatmentSpace(3, {0b000u, 0b100u, 0b010u, 0b110u, 0b001u, 0b111u});
  } else {
    s.space = TreatmentSpace(
        5, {0b00000u, 0b10000u, 0b01000u, 0b00100u, 0b10100u,
            0b00010u, 0b10010u, 0b11010u, 0b00110u, 0b01110u,
            0b00001u, 0b10001u, 0b01001u, 0b00101u, 0b10101u,
            0b00011u, 0b10011u, 0b11011u, 0b00111u, 0b01111u});
  }
  s.beta_ps.assign(s.p, 0.0);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  s.beta_ps[0] = inv_sqrt2;
  s.beta_ps[1] = inv_sqrt2;
  return s;
}

double true_delta(const SimSetting& s, std::span<const double> x,
                  std::uint32_t bits) {
  return true_delta_by_index(s, x, s.space.index_of(bits));
}

double true_delta_by_index(const SimSetting& s, std::span<const double> x,
                           int combo_index) {
  const std::uint32_t bits = s.space.mask(combo_index);
  double total = 0.0;
  for (int k = 0; k < s.space.k(); ++k) {
    if (bits & (1u << k)) total += s.additive_effect(k, x);
  }
  return total + s.interaction_effect(combo_index, x);
}

Mat true_delta_matrix(const SimSetting& s, const Mat& x) {
  Mat delta(x.rows, s.space.size());
#pragma omp parallel for schedule(static) if (x.rows >= 64)
  for (int i = 0; i < x.rows; ++i) {
    for (int j = 0; j < s.space.size(); ++j) {
      delta(i, j) = true_delta_by_index(s, x.row_span(i), j);
    }
  }
  return delta;
}

Mat gen_covariates(int n, int p, Rng& rng) {
  if (n < 1) throw ConfigError("sample size must be >= 1");
  Mat x(n, p);
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  return x;
}

Vec assignment_probabilities(const SimSetting& s, std::span<const double> x,
                             AssignScheme scheme) {
  const int na = s.space.size();
  Vec probs(na, 1.0 / na);
  if (scheme == AssignScheme::Uniform) return probs;

  const double z = dot(x, s.beta_ps);
  double max_logit = -1e300;
  for (int j = 0; j < na; ++j) {
    const double logit = 0.2 * (j + 1) * z;
    probs[j] = logit;
    max_logit = std::max(max_logit, logit);
  }
  double total = 0.0;
  for (double& v : probs) {
    v = std::exp(v - max_logit);
    total += v;
  }
  for (double& v : probs) v /= total;
  return probs;
}

int assign_treatment(const SimSetting& s, std::span<const double> x,
                     AssignScheme scheme, Rng& rng) {
  if (scheme == AssignScheme::Uniform) return rng.uniform_int(s.space.size());
  const Vec probs = assignment_probabilities(s, x, scheme);
  const double u = rng.uniform();
  double cum = 0.0;
  for (int j = 0; j < s.space.size(); ++j) {
    cum += probs[j];
    if (u < cum) return j;
  }
  return s.space.size() - 1;
}

double gen_outcome(const SimSetting& s, std::span<const double> x,
                   int combo_index, Rng& rng) {
  return s.m(x) + true_delta_by_index(s, x, combo_index) +
         s.noise_sd * rng.normal();
}

SimSample generate_sample(const SimSetting& s, int n, AssignScheme scheme,
                          std::uint64_t seed) {
  Rng rng(seed);
  SimSample sample;
  sample.x = gen_covariates(n, s.p, rng);
  sample.combo_idx.resize(n);
  sample.y.resize(n);
  for (int i = 0; i < n; ++i) {
    sample.combo_idx[i] = assign_treatment(s, sample.x.row_span(i), scheme, rng);
    sample.y[i] = gen_outcome(s, sample.x.row_span(i), sample.combo_idx[i], rng);
  }
  sample.true_delta = true_delta_matrix(s, sample.x);
  sample.true_propensity = Mat(n, s.space.size());
  for (int i = 0; i < n; ++i) {
    const Vec probs = assignment_probabilities(s, sample.x.row_span(i), scheme);
    std::copy(probs.begin(), probs.end(), sample.true_propensity.row(i));
  }
  return sample;
}

}  // namespace dem
