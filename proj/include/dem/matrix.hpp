#pragma once

#include <span>
#include <vector>

namespace dem {

using Vec = std::vector<double>;

// Dense row-major matrix.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int i, int j) {
    return data[static_cast<std::size_t>(i) * cols + j];
  }
  double operator()(int i, int j) const {
    return data[static_cast<std::size_t>(i) * cols + j];
  }

  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const {
    return data.data() + static_cast<std::size_t>(i) * cols;
  }

  std::span<double> row_span(int i) { return {row(i), static_cast<std::size_t>(cols)}; }
  std::span<const double> row_span(int i) const {
    return {row(i), static_cast<std::size_t>(cols)};
  }

  bool empty() const { return data.empty(); }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

// Dense kernels. The OpenMP entry points parallelize over independent output
// rows, so their results are bit-identical to the serial reference versions
// regardless of thread count; tests assert exact equality between the two.
namespace kernels {

namespace serial {
// C = A * B^T, A: n x k, B: m x k, C: n x m.
void matmul_bt(const Mat& a, const Mat& b, Mat& c);
// C = A^T * B, A: n x k, B: n x m, C: k x m.
void matmul_ta(const Mat& a, const Mat& b, Mat& c);
// C = A * B, A: n x k, B: k x m, C: n x m.
void matmul(const Mat& a, const Mat& b, Mat& c);
}  // namespace serial

void matmul_bt(const Mat& a, const Mat& b, Mat& c);
void matmul_ta(const Mat& a, const Mat& b, Mat& c);
void matmul(const Mat& a, const Mat& b, Mat& c);

}  // namespace kernels

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);       // Euclidean norm
double norm1(std::span<const double> a);       // sum of absolute values
double sum_sq(std::span<const double> a);      // squared Euclidean norm
bool all_finite(std::span<const double> a);

}  // namespace dem
