#include "relcomp/nn_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relcomp/errors.hpp"
#include "relcomp/rng.hpp"

namespace relcomp {

namespace {

double sqdist(const double* a, const double* b, int dim) {
  double s = 0.0;
  for (int j = 0; j < dim; ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

}  // namespace

NnIndex::NnIndex(Matrix points, NnIndexParams params)
    : points_(std::move(points)), params_(params) {
  if (points_.rows == 0) throw ExecutionError("nearest-neighbour index over empty point set");
  const int n = points_.rows;
  const int dim = points_.cols;
  const int k = std::clamp(static_cast<int>(std::lround(std::sqrt(static_cast<double>(n)))),
                           1, std::min(n, 256));

  Rng rng(Rng::derive(params_.seed, {0x6e6e69}));
  std::vector<int> ids(static_cast<size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  rng.shuffle(ids);
  centroids_ = Matrix(k, dim);
  for (int c = 0; c < k; ++c)
    std::copy(points_.row(ids[static_cast<size_t>(c)]),
              points_.row(ids[static_cast<size_t>(c)]) + dim, centroids_.row(c));

  std::vector<int> assign(static_cast<size_t>(n), 0);
  for (int iter = 0; iter < 8; ++iter) {
#ifdef RELCOMP_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < n; ++i) {
      double best = sqdist(points_.row(i), centroids_.row(0), dim);
      int best_c = 0;
      for (int c = 1; c < k; ++c) {
        const double d = sqdist(points_.row(i), centroids_.row(c), dim);
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      assign[static_cast<size_t>(i)] = best_c;
    }
    Matrix sums(k, dim);
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      const int c = assign[static_cast<size_t>(i)];
      double* s = sums.row(c);
      const double* p = points_.row(i);
      for (int j = 0; j < dim; ++j) s[j] += p[j];
      counts[static_cast<size_t>(c)]++;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] == 0) continue;  // keep previous centroid
      double* ctr = centroids_.row(c);
      const double* s = sums.row(c);
      for (int j = 0; j < dim; ++j) ctr[j] = s[j] / counts[static_cast<size_t>(c)];
    }
  }

  members_.assign(static_cast<size_t>(k), {});
  for (int i = 0; i < n; ++i)
    members_[static_cast<size_t>(assign[static_cast<size_t>(i)])].push_back(i);
  radius_.assign(static_cast<size_t>(k), 0.0);
  for (int c = 0; c < k; ++c)
    for (int i : members_[static_cast<size_t>(c)])
      radius_[static_cast<size_t>(c)] = std::max(
          radius_[static_cast<size_t>(c)],
          std::sqrt(sqdist(points_.row(i), centroids_.row(c), dim)));
}

std::vector<int> NnIndex::query_batch(const Matrix& queries) const {
  const int dim = points_.cols;
  if (queries.cols != dim)
    throw ExecutionError("query dimensionality does not match the index");
  const int k = centroids_.rows;
  std::vector<int> out(static_cast<size_t>(queries.rows), -1);

#ifdef RELCOMP_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int q = 0; q < queries.rows; ++q) {
    const double* qv = queries.row(q);
    std::vector<std::pair<double, int>> order(static_cast<size_t>(k));
    for (int c = 0; c < k; ++c)
      order[static_cast<size_t>(c)] = {std::sqrt(sqdist(qv, centroids_.row(c), dim)), c};
    std::sort(order.begin(), order.end());

    double best_d2 = std::numeric_limits<double>::infinity();
    double best_d = std::numeric_limits<double>::infinity();
    int best_i = -1;
    int probed = 0;
    for (const auto& [cd, c] : order) {
      if (members_[static_cast<size_t>(c)].empty()) continue;
      // Any member is at least cd - radius away; with the epsilon slack a
      // cluster that cannot beat best/(1+eps) is skipped.
      const double lower = std::max(0.0, cd - radius_[static_cast<size_t>(c)]);
      if (best_i >= 0 && lower * (1.0 + params_.epsilon) >= best_d) continue;
      if (params_.max_probes > 0 && probed >= params_.max_probes) break;
      ++probed;
      for (int i : members_[static_cast<size_t>(c)]) {
        const double d2 = sqdist(qv, points_.row(i), dim);
        if (d2 < best_d2 || (d2 == best_d2 && i < best_i)) {
          best_d2 = d2;
          best_i = i;
        }
      }
      best_d = std::sqrt(best_d2);
    }
    out[static_cast<size_t>(q)] = best_i;
  }
  return out;
}

std::vector<int> NnIndex::exact(const Matrix& points, const Matrix& queries) {
  if (points.rows == 0) throw ExecutionError("nearest-neighbour search over empty point set");
  std::vector<int> out(static_cast<size_t>(queries.rows), -1);
#ifdef RELCOMP_HAVE_OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int q = 0; q < queries.rows; ++q) {
    double best = std::numeric_limits<double>::infinity();
    int best_i = -1;
    for (int i = 0; i < points.rows; ++i) {
      const double d = sqdist(points.row(i), queries.row(q), points.cols);
      if (d < best) {
        best = d;
        best_i = i;
      }
    }
    out[static_cast<size_t>(q)] = best_i;
  }
  return out;
}

}  // namespace relcomp
