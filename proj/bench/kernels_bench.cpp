// Compares the serial reference kernels against the parallel variants and
// verifies they produce identical bytes. Run with no arguments for the
// default sizes, or pass `rows cols inner reps`.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#include "relcomp/kernels.hpp"
#include "relcomp/rng.hpp"

using relcomp::Matrix;
using relcomp::Rng;
namespace kernels = relcomp::kernels;

namespace {

Matrix random_matrix(int rows, int cols, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform() * 2.0 - 1.0;
  return m;
}

double time_ms(int reps, const std::function<void()>& fn) {
  fn();  // warm-up, also primes the thread pool
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

struct Case {
  std::string name;
  std::function<void()> serial;
  std::function<void()> parallel;
  std::function<bool()> match;
};

}  // namespace

int main(int argc, char** argv) {
  int rows = 512, cols = 256, inner = 256, reps = 5;
  if (argc == 5) {
    rows = std::atoi(argv[1]);
    cols = std::atoi(argv[2]);
    inner = std::atoi(argv[3]);
    reps = std::atoi(argv[4]);
  } else if (argc != 1) {
    std::fprintf(stderr, "usage: %s [rows cols inner reps]\n", argv[0]);
    return 1;
  }

  Rng rng(42);
  const Matrix a = random_matrix(rows, inner, rng);
  const Matrix b = random_matrix(inner, cols, rng);
  const Matrix at = random_matrix(inner, rows, rng);
  const Matrix bt = random_matrix(cols, inner, rng);
  const Matrix x0 = random_matrix(rows, cols, rng);
  const Matrix mask = random_matrix(rows, cols, rng);
  std::vector<double> bias(static_cast<size_t>(cols));
  for (double& v : bias) v = rng.uniform();
  const Matrix q = random_matrix(rows / 4 + 1, inner, rng);
  const Matrix p = random_matrix(rows, inner, rng);

  Matrix cs, cp;
  Matrix xs, xp;
  std::vector<double> ds, dp;

  const std::vector<Case> cases = {
      {"matmul",
       [&] { cs = Matrix(rows, cols); kernels::serial::matmul(a, b, cs); },
       [&] { cp = Matrix(rows, cols); kernels::matmul(a, b, cp); },
       [&] { return cs == cp; }},
      {"matmul_tn",
       [&] { cs = Matrix(rows, cols); kernels::serial::matmul_tn(at, b, cs); },
       [&] { cp = Matrix(rows, cols); kernels::matmul_tn(at, b, cp); },
       [&] { return cs == cp; }},
      {"matmul_nt",
       [&] { cs = Matrix(rows, cols); kernels::serial::matmul_nt(a, bt, cs); },
       [&] { cp = Matrix(rows, cols); kernels::matmul_nt(a, bt, cp); },
       [&] { return cs == cp; }},
      {"add_bias",
       [&] { xs = x0; kernels::serial::add_bias(xs, bias); },
       [&] { xp = x0; kernels::add_bias(xp, bias); },
       [&] { return xs == xp; }},
      {"relu",
       [&] { xs = x0; kernels::serial::relu(xs); },
       [&] { xp = x0; kernels::relu(xp); },
       [&] { return xs == xp; }},
      {"relu_backward",
       [&] { xs = mask; kernels::serial::relu_backward(x0, xs); },
       [&] { xp = mask; kernels::relu_backward(x0, xp); },
       [&] { return xs == xp; }},
      {"softmax_rows",
       [&] { xs = x0; kernels::serial::softmax_rows(xs); },
       [&] { xp = x0; kernels::softmax_rows(xp); },
       [&] { return xs == xp; }},
      {"hadamard",
       [&] { xs = x0; kernels::serial::hadamard(xs, mask); },
       [&] { xp = x0; kernels::hadamard(xp, mask); },
       [&] { return xs == xp; }},
      {"pairwise_sqdist",
       [&] { kernels::serial::pairwise_sqdist(q, p, ds); },
       [&] { kernels::pairwise_sqdist(q, p, dp); },
       [&] { return ds == dp; }},
  };

  std::printf("threads: %d, matrices: %dx%d (inner %d), %d reps\n",
              kernels::thread_count(), rows, cols, inner, reps);
  std::printf("%-16s %12s %12s %9s %7s\n", "kernel", "serial ms", "parallel ms",
              "speedup", "match");
  bool all_match = true;
  for (const auto& c : cases) {
    const double ts = time_ms(reps, c.serial);
    const double tp = time_ms(reps, c.parallel);
    const bool ok = c.match();
    all_match = all_match && ok;
    std::printf("%-16s %12.3f %12.3f %8.2fx %7s\n", c.name.c_str(), ts, tp,
                tp > 0 ? ts / tp : 0.0, ok ? "yes" : "NO");
  }
  return all_match ? 0 : 1;
}
