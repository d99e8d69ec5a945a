#pragma once

#include <cstdint>
#include <vector>

namespace gridtopo::reconnect {

struct KMeansResult {
  std::vector<std::size_t> assignment;  // per input point, cluster index
  std::vector<std::vector<double>> centroids;
  double objective = 0.0;  // sum of squared distances of the kept run
  std::vector<double> objective_history;  // per iteration, nonincreasing
};

// Lloyd iterations with k-means++ seeding. Runs `restarts` times from
// derived sub-seeds and keeps the lowest objective (first winner on a tie,
// so results are reproducible). Empty clusters are reseeded to the point
// farthest from its current centroid. StructuralError when there are fewer
// points than clusters or dimensions disagree.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k_clusters,
                    std::uint64_t seed, std::size_t restarts = 10, std::size_t max_iter = 100);

}  // namespace gridtopo::reconnect
