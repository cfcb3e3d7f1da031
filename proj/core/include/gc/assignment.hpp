#pragma once

#include <vector>

#include "gc/mesh.hpp"

namespace gc {

// Bijection between two equal-size clouds: point i of A pairs with
// perm[i] of B. cost is the mean Euclidean distance under the matching.
struct Assignment {
    std::vector<int> perm;
    double cost = 0;
};

// Globally optimal matching (Hungarian / shortest augmenting path) on the
// n x n Euclidean cost matrix. Oracle-scale: n <= 256 enforced.
Assignment emd_exact(const PointCloud3& a, const PointCloud3& b);

// Epsilon-scaling auction: eps halves per round from 0.1 * (median pairwise
// distance) down to 1e-4 of the same scale; prices persist across rounds.
// The result is a valid bijection, so its cost is >= the optimal cost.
Assignment auction_assign(const PointCloud3& a, const PointCloud3& b);

}  // namespace gc
