#pragma once

#include <cstdint>
#include <vector>

namespace relcomp {

// Dense row-major matrix of doubles. Deliberately minimal: the training and
// search code needs predictable memory layout more than it needs expression
// templates.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

  double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
  const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
  bool operator==(const Matrix& o) const {
    return rows == o.rows && cols == o.cols && data == o.data;
  }
};

namespace kernels {

// Reference implementations: straight loops, no threading. Kept permanently
// as the correctness oracle for the parallel variants and for benchmarking.
namespace serial {
void matmul(const Matrix& a, const Matrix& b, Matrix& c);            // c = a·b
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c);         // c = aᵀ·b
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);         // c = a·bᵀ
void add_bias(Matrix& x, const std::vector<double>& b);
void relu(Matrix& x);
void relu_backward(const Matrix& activated, Matrix& grad);
void softmax_rows(Matrix& x);
void hadamard(Matrix& x, const Matrix& mask);
// Squared euclidean distances between every row of q and every row of p:
// out[i*p.rows + j] = |q_i - p_j|².
void pairwise_sqdist(const Matrix& q, const Matrix& p, std::vector<double>& out);
}  // namespace serial

// Parallel variants. Each parallelizes only across independent output
// elements and keeps every per-element reduction in a fixed serial order,
// so results are bit-identical to the serial reference for any thread count.
void matmul(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c);
void add_bias(Matrix& x, const std::vector<double>& b);
void relu(Matrix& x);
void relu_backward(const Matrix& activated, Matrix& grad);
void softmax_rows(Matrix& x);
void hadamard(Matrix& x, const Matrix& mask);
void pairwise_sqdist(const Matrix& q, const Matrix& p, std::vector<double>& out);

int thread_count();

}  // namespace kernels
}  // namespace relcomp
