#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "relcomp/kernels.hpp"
#include "relcomp/rng.hpp"

using relcomp::Matrix;
using relcomp::Rng;
namespace k = relcomp::kernels;

namespace {

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.normal();
  return m;
}

// Naive triple loop, accumulation order independent of the implementations.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (int l = 0; l < a.cols; ++l) s += a.at(i, l) * b.at(l, j);
      c.at(i, j) = s;
    }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
  return t;
}

}  // namespace

TEST_SUITE("kernels") {
  TEST_CASE("matmul matches naive reference") {
    Rng rng(11);
    for (auto [m, n, p] : {std::array{3, 4, 5}, {1, 7, 2}, {8, 1, 8}, {16, 16, 16}}) {
      Matrix a = random_matrix(m, n, rng), b = random_matrix(n, p, rng);
      Matrix c(m, p), ref = naive_matmul(a, b);
      k::serial::matmul(a, b, c);
      for (size_t i = 0; i < c.data.size(); ++i)
        CHECK(c.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("transposed products match explicit transposes") {
    Rng rng(12);
    Matrix a = random_matrix(6, 4, rng), b = random_matrix(6, 5, rng);
    Matrix tn(4, 5);
    k::serial::matmul_tn(a, b, tn);
    Matrix ref = naive_matmul(transpose(a), b);
    for (size_t i = 0; i < tn.data.size(); ++i)
      CHECK(tn.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-12));

    Matrix c = random_matrix(4, 6, rng), d = random_matrix(5, 6, rng);
    Matrix nt(4, 5);
    k::serial::matmul_nt(c, d, nt);
    Matrix ref2 = naive_matmul(c, transpose(d));
    for (size_t i = 0; i < nt.data.size(); ++i)
      CHECK(nt.data[i] == doctest::Approx(ref2.data[i]).epsilon(1e-12));
  }

  TEST_CASE("add_bias, relu, relu_backward, hadamard semantics") {
    Matrix x(2, 3);
    x.data = {-1.0, 0.0, 2.5, 3.0, -0.5, 1.0};
    k::serial::add_bias(x, {1.0, -1.0, 0.5});
    CHECK(x.data == std::vector<double>{0.0, -1.0, 3.0, 4.0, -1.5, 1.5});

    Matrix r = x;
    k::serial::relu(r);
    CHECK(r.data == std::vector<double>{0.0, 0.0, 3.0, 4.0, 0.0, 1.5});

    Matrix g(2, 3);
    g.data = {5.0, 5.0, 5.0, 5.0, 5.0, 5.0};
    k::serial::relu_backward(r, g);
    // Gradient passes only where the activation is positive.
    CHECK(g.data == std::vector<double>{0.0, 0.0, 5.0, 5.0, 0.0, 5.0});

    Matrix mask(2, 3);
    mask.data = {1.0, 0.0, 1.0, 0.0, 1.0, 0.0};
    k::serial::hadamard(r, mask);
    CHECK(r.data == std::vector<double>{0.0, 0.0, 3.0, 0.0, 0.0, 0.0});
  }

  TEST_CASE("softmax rows: normalized, shift-invariant, known values") {
    Matrix x(1, 2);
    x.data = {0.0, std::log(3.0)};
    k::serial::softmax_rows(x);
    CHECK(x.data[0] == doctest::Approx(0.25));
    CHECK(x.data[1] == doctest::Approx(0.75));

    Rng rng(13);
    Matrix a = random_matrix(5, 9, rng);
    Matrix shifted = a;
    for (int i = 0; i < shifted.rows; ++i)
      for (int j = 0; j < shifted.cols; ++j) shifted.at(i, j) += 123.0;
    k::serial::softmax_rows(a);
    k::serial::softmax_rows(shifted);
    for (int i = 0; i < a.rows; ++i) {
      double sum = 0.0;
      for (int j = 0; j < a.cols; ++j) {
        sum += a.at(i, j);
        CHECK(a.at(i, j) == doctest::Approx(shifted.at(i, j)).epsilon(1e-12));
        CHECK(a.at(i, j) > 0.0);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }

    // Large logits must not overflow.
    Matrix big(1, 3);
    big.data = {1000.0, 1000.0, 999.0};
    k::serial::softmax_rows(big);
    CHECK(std::isfinite(big.data[0]));
    CHECK(big.data[0] == doctest::Approx(big.data[1]));
  }

  TEST_CASE("pairwise_sqdist equals brute force") {
    Rng rng(14);
    Matrix q = random_matrix(7, 3, rng), p = random_matrix(9, 3, rng);
    std::vector<double> out;
    k::serial::pairwise_sqdist(q, p, out);
    REQUIRE(out.size() == 63);
    for (int i = 0; i < q.rows; ++i)
      for (int j = 0; j < p.rows; ++j) {
        double d = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double t = q.at(i, c) - p.at(j, c);
          d += t * t;
        }
        CHECK(out[static_cast<size_t>(i) * 9 + j] == doctest::Approx(d).epsilon(1e-9));
      }
  }

  TEST_CASE("parallel variants are bit-identical to serial") {
    CHECK(k::thread_count() >= 1);
    Rng rng(15);
    for (int round = 0; round < 4; ++round) {
      const int m = 1 + static_cast<int>(rng.below(40));
      const int n = 1 + static_cast<int>(rng.below(40));
      const int p = 1 + static_cast<int>(rng.below(40));
      Matrix a = random_matrix(m, n, rng), b = random_matrix(n, p, rng);
      Matrix cs(m, p), cp(m, p);
      k::serial::matmul(a, b, cs);
      k::matmul(a, b, cp);
      CHECK(cs == cp);

      Matrix at = random_matrix(n, m, rng);
      Matrix ts(m, p), tp(m, p);
      k::serial::matmul_tn(at, b, ts);
      k::matmul_tn(at, b, tp);
      CHECK(ts == tp);

      Matrix bt = random_matrix(p, n, rng);
      Matrix ns(m, p), np(m, p);
      k::serial::matmul_nt(a, bt, ns);
      k::matmul_nt(a, bt, np);
      CHECK(ns == np);

      std::vector<double> bias(static_cast<size_t>(p));
      for (double& v : bias) v = rng.normal();
      Matrix xs = cs, xp = cs;
      k::serial::add_bias(xs, bias);
      k::add_bias(xp, bias);
      CHECK(xs == xp);

      Matrix rs = xs, rp = xs;
      k::serial::relu(rs);
      k::relu(rp);
      CHECK(rs == rp);

      Matrix gs = random_matrix(m, p, rng);
      Matrix gp = gs;
      k::serial::relu_backward(rs, gs);
      k::relu_backward(rs, gp);
      CHECK(gs == gp);

      Matrix ss = xs, sp = xs;
      k::serial::softmax_rows(ss);
      k::softmax_rows(sp);
      CHECK(ss == sp);

      Matrix mask(m, p);
      for (double& v : mask.data) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
      Matrix hs = xs, hp = xs;
      k::serial::hadamard(hs, mask);
      k::hadamard(hp, mask);
      CHECK(hs == hp);

      std::vector<double> ds, dp;
      Matrix probe = random_matrix(6, n, rng);
      k::serial::pairwise_sqdist(a, probe, ds);
      k::pairwise_sqdist(a, probe, dp);
      CHECK(ds == dp);
    }
  }
}
