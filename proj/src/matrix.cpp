#include "dem/matrix.hpp"

#include <cassert>
#include <cmath>

#include "dem/errors.hpp"

namespace dem {
namespace kernels {

namespace {
// Below this many output rows the OpenMP versions stay on the calling thread.
constexpr int kParallelRows = 16;
}  // namespace

namespace serial {

void matmul_bt(const Mat& a, const Mat& b, Mat& c) {
  if (a.cols != b.cols) throw ShapeError("matmul_bt: inner dimensions differ");
  c = Mat(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* bj = b.row(j);
      double s = 0.0;
      for (int t = 0; t < a.cols; ++t) s += ai[t] * bj[t];
      ci[j] = s;
    }
  }
}

void matmul_ta(const Mat& a, const Mat& b, Mat& c) {
  if (a.rows != b.rows) throw ShapeError("matmul_ta: row counts differ");
  c = Mat(a.cols, b.cols);
  for (int i = 0; i < a.cols; ++i) {
    double* ci = c.row(i);
    for (int t = 0; t < a.rows; ++t) {
      const double ati = a(t, i);
      if (ati == 0.0) continue;
      const double* bt = b.row(t);
      for (int j = 0; j < b.cols; ++j) ci[j] += ati * bt[j];
    }
  }
}

void matmul(const Mat& a, const Mat& b, Mat& c) {
  if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
  c = Mat(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (int t = 0; t < a.cols; ++t) {
      const double ait = ai[t];
      if (ait == 0.0) continue;
      const double* bt = b.row(t);
      for (int j = 0; j < b.cols; ++j) ci[j] += ait * bt[j];
    }
  }
}

}  // namespace serial

void matmul_bt(const Mat& a, const Mat& b, Mat& c) {
  if (a.cols != b.cols) throw ShapeError("matmul_bt: inner dimensions differ");
  c = Mat(a.rows, b.rows);
#pragma omp parallel for schedule(static) if (a.rows >= kParallelRows)
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* bj = b.row(j);
      double s = 0.0;
      for (int t = 0; t < a.cols; ++t) s += ai[t] * bj[t];
      ci[j] = s;
    }
  }
}

void matmul_ta(const Mat& a, const Mat& b, Mat& c) {
  if (a.rows != b.rows) throw ShapeError("matmul_ta: row counts differ");
  c = Mat(a.cols, b.cols);
#pragma omp parallel for schedule(static) if (a.cols >= kParallelRows)
  for (int i = 0; i < a.cols; ++i) {
    double* ci = c.row(i);
    for (int t = 0; t < a.rows; ++t) {
      const double ati = a(t, i);
      if (ati == 0.0) continue;
      const double* bt = b.row(t);
      for (int j = 0; j < b.cols; ++j) ci[j] += ati * bt[j];
    }
  }
}

void matmul(const Mat& a, const Mat& b, Mat& c) {
  if (a.cols != b.rows) throw ShapeError("matmul: inner dimensions differ");
  c = Mat(a.rows, b.cols);
#pragma omp parallel for schedule(static) if (a.rows >= kParallelRows)
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (int t = 0; t < a.cols; ++t) {
      const double ait = ai[t];
      if (ait == 0.0) continue;
      const double* bt = b.row(t);
      for (int j = 0; j < b.cols; ++j) ci[j] += ait * bt[j];
    }
  }
}

}  // namespace kernels

double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sum_sq(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(sum_sq(a)); }

double norm1(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += std::fabs(v);
  return s;
}

bool all_finite(std::span<const double> a) {
  for (double v : a) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace dem
