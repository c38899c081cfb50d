#pragma once

#include <cstdint>
#include <vector>

#include "relcomp/kernels.hpp"

namespace relcomp {

struct NnIndexParams {
  // A probed result is guaranteed within (1+epsilon) of the true nearest
  // distance; larger values prune more clusters.
  double epsilon = 0.1;
  // Hard cap on probed clusters per query (0 = bounded by epsilon only).
  int max_probes = 0;
  uint64_t seed = 7;
};

// Euclidean nearest-neighbour index over a fixed point set: points are
// partitioned by seeded k-means and queries probe clusters in order of
// centroid distance, skipping any cluster whose distance lower bound cannot
// improve the current best by more than the epsilon slack.
class NnIndex {
 public:
  NnIndex(Matrix points, NnIndexParams params = {});

  // Index of an approximately nearest point for every query row.
  std::vector<int> query_batch(const Matrix& queries) const;

  // Exact reference: full scan, lowest index wins ties.
  static std::vector<int> exact(const Matrix& points, const Matrix& queries);

  int cluster_count() const { return centroids_.rows; }

 private:
  Matrix points_;
  NnIndexParams params_;
  Matrix centroids_;                      // k × dim
  std::vector<std::vector<int>> members_;  // point ids per cluster
  std::vector<double> radius_;             // max member distance per cluster
};

}  // namespace relcomp
