#pragma once

// Independent reference computations used by tests only. These deliberately
// avoid the library's own code paths.

#include <cstddef>
#include <span>
#include <vector>

namespace oracles {

// Rank-statistic AUC: over all (positive, negative) pairs, the fraction where
// the positive scores higher, counting ties as half.
inline double mann_whitney_auc(std::span<const float> prob, std::span<const float> gt) {
  std::vector<float> pos, neg;
  for (std::size_t i = 0; i < prob.size(); ++i) (gt[i] > 0.5f ? pos : neg).push_back(prob[i]);
  double wins = 0;
  for (float p : pos)
    for (float n : neg) {
      if (p > n)
        wins += 1.0;
      else if (p == n)
        wins += 0.5;
    }
  return wins / (double(pos.size()) * double(neg.size()));
}

// Per-voxel 2-of-3 majority vote.
inline float majority3(float a, float b, float c) {
  return (a + b + c) >= 2.f ? 1.f : 0.f;
}

}  // namespace oracles
