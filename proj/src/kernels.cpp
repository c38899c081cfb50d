#include "relcomp/kernels.hpp"

#include <cassert>
#include <cmath>

#ifdef RELCOMP_HAVE_OPENMP
#include <omp.h>
#endif

namespace relcomp::kernels {

int thread_count() {
#ifdef RELCOMP_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.rows);
  c = Matrix(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row(k);
      for (int j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.rows == b.rows);
  c = Matrix(a.cols, b.cols);
  for (int i = 0; i < a.cols; ++i) {
    double* ci = c.row(i);
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.rows; ++k) acc += a.at(k, i) * b.at(k, j);
      ci[j] = acc;
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.cols);
  c = Matrix(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* bj = b.row(j);
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
      ci[j] = acc;
    }
  }
}

void add_bias(Matrix& x, const std::vector<double>& b) {
  assert(static_cast<size_t>(x.cols) == b.size());
  for (int i = 0; i < x.rows; ++i) {
    double* xi = x.row(i);
    for (int j = 0; j < x.cols; ++j) xi[j] += b[j];
  }
}

void relu(Matrix& x) {
  for (double& v : x.data)
    if (v < 0.0) v = 0.0;
}

void relu_backward(const Matrix& activated, Matrix& grad) {
  assert(activated.rows == grad.rows && activated.cols == grad.cols);
  for (size_t i = 0; i < grad.data.size(); ++i)
    if (activated.data[i] <= 0.0) grad.data[i] = 0.0;
}

void softmax_rows(Matrix& x) {
  for (int i = 0; i < x.rows; ++i) {
    double* xi = x.row(i);
    double mx = xi[0];
    for (int j = 1; j < x.cols; ++j) mx = std::max(mx, xi[j]);
    double sum = 0.0;
    for (int j = 0; j < x.cols; ++j) {
      xi[j] = std::exp(xi[j] - mx);
      sum += xi[j];
    }
    for (int j = 0; j < x.cols; ++j) xi[j] /= sum;
  }
}

void hadamard(Matrix& x, const Matrix& mask) {
  assert(x.rows == mask.rows && x.cols == mask.cols);
  for (size_t i = 0; i < x.data.size(); ++i) x.data[i] *= mask.data[i];
}

void pairwise_sqdist(const Matrix& q, const Matrix& p, std::vector<double>& out) {
  assert(q.cols == p.cols);
  out.assign(static_cast<size_t>(q.rows) * p.rows, 0.0);
  for (int i = 0; i < q.rows; ++i) {
    const double* qi = q.row(i);
    for (int j = 0; j < p.rows; ++j) {
      const double* pj = p.row(j);
      double acc = 0.0;
      for (int k = 0; k < q.cols; ++k) {
        const double d = qi[k] - pj[k];
        acc += d * d;
      }
      out[static_cast<size_t>(i) * p.rows + j] = acc;
    }
  }
}

}  // namespace serial

// Parallel variants. Work is split across output rows; the accumulation
// order inside each output element matches the serial reference exactly.

void matmul(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.rows);
  c = Matrix(a.rows, b.cols);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.row(k);
      for (int j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.rows == b.rows);
  c = Matrix(a.cols, b.cols);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.cols; ++i) {
    double* ci = c.row(i);
    for (int j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.rows; ++k) acc += a.at(k, i) * b.at(k, j);
      ci[j] = acc;
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c) {
  assert(a.cols == b.cols);
  c = Matrix(a.rows, b.rows);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < a.rows; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const double* bj = b.row(j);
      double acc = 0.0;
      for (int k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
      ci[j] = acc;
    }
  }
}

void add_bias(Matrix& x, const std::vector<double>& b) {
  assert(static_cast<size_t>(x.cols) == b.size());
#pragma omp parallel for schedule(static)
  for (int i = 0; i < x.rows; ++i) {
    double* xi = x.row(i);
    for (int j = 0; j < x.cols; ++j) xi[j] += b[j];
  }
}

void relu(Matrix& x) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < x.rows; ++i) {
    double* xi = x.row(i);
    for (int j = 0; j < x.cols; ++j)
      if (xi[j] < 0.0) xi[j] = 0.0;
  }
}

void relu_backward(const Matrix& activated, Matrix& grad) {
  assert(activated.rows == grad.rows && activated.cols == grad.cols);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < grad.rows; ++i) {
    const double* ai = activated.row(i);
    double* gi = grad.row(i);
    for (int j = 0; j < grad.cols; ++j)
      if (ai[j] <= 0.0) gi[j] = 0.0;
  }
}

void softmax_rows(Matrix& x) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < x.rows; ++i) {
    double* xi = x.row(i);
    double mx = xi[0];
    for (int j = 1; j < x.cols; ++j) mx = std::max(mx, xi[j]);
    double sum = 0.0;
    for (int j = 0; j < x.cols; ++j) {
      xi[j] = std::exp(xi[j] - mx);
      sum += xi[j];
    }
    for (int j = 0; j < x.cols; ++j) xi[j] /= sum;
  }
}

void hadamard(Matrix& x, const Matrix& mask) {
  assert(x.rows == mask.rows && x.cols == mask.cols);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < x.rows; ++i) {
    double* xi = x.row(i);
    const double* mi = mask.row(i);
    for (int j = 0; j < x.cols; ++j) xi[j] *= mi[j];
  }
}

void pairwise_sqdist(const Matrix& q, const Matrix& p, std::vector<double>& out) {
  assert(q.cols == p.cols);
  out.assign(static_cast<size_t>(q.rows) * p.rows, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < q.rows; ++i) {
    const double* qi = q.row(i);
    double* oi = out.data() + static_cast<size_t>(i) * p.rows;
    for (int j = 0; j < p.rows; ++j) {
      const double* pj = p.row(j);
      double acc = 0.0;
      for (int k = 0; k < q.cols; ++k) {
        const double d = qi[k] - pj[k];
        acc += d * d;
      }
      oi[j] = acc;
    }
  }
}

}  // namespace relcomp::kernels
