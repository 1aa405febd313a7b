#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "actc/ctc.hpp"

namespace actc {

// Reference implementation by direct path summation: enumerate every
// length-T path over the V+1 symbols, keep those whose collapse equals y,
// and sum the path products in plain probability space. Deliberately
// independent of the trellis DP so it can serve as its oracle.
inline double brute_force_score(const PosteriorGrid& grid, const std::vector<int>& y) {
  const Eigen::Index T = grid.num_frames();
  const Eigen::Index V1 = grid.num_symbols();
  double n_paths = std::pow(static_cast<double>(V1), static_cast<double>(T));
  if (n_paths > 1e7) throw std::invalid_argument("instance too large for oracle");
  const Eigen::MatrixXd probs = grid.is_log ? grid.probs.array().exp().matrix() : grid.probs;

  std::vector<int> path(static_cast<size_t>(T), 0);
  double total = 0.0;
  while (true) {
    double p = 1.0;
    for (Eigen::Index t = 0; t < T; ++t) p *= probs(t, path[static_cast<size_t>(t)]);
    if (collapse(path) == y) total += p;
    // odometer increment
    Eigen::Index pos = T - 1;
    while (pos >= 0) {
      if (++path[static_cast<size_t>(pos)] < V1) break;
      path[static_cast<size_t>(pos)] = 0;
      --pos;
    }
    if (pos < 0) break;
  }
  return total;
}

}  // namespace actc
