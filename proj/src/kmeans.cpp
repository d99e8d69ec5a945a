#include "gridtopo/kmeans.hpp"

#include <algorithm>
#include <limits>

#include "gridtopo/error.hpp"
#include "gridtopo/rng.hpp"

namespace gridtopo::reconnect {
namespace {

double sqdist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

std::vector<std::vector<double>> seed_plus_plus(const std::vector<std::vector<double>>& points,
                                                std::size_t k, Rng& rng) {
  std::vector<std::vector<double>> centroids;
  centroids.reserve(k);
  centroids.push_back(points[rng.next_index(points.size())]);
  std::vector<double> d2(points.size());
  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, sqdist(points[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick;
    if (total > 0.0) {
      double target = rng.next_double() * total;
      double acc = 0.0;
      pick = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        acc += d2[i];
        if (acc >= target) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.next_index(points.size());  // all points coincide
    }
    centroids.push_back(points[pick]);
  }
  return centroids;
}

KMeansResult run_once(const std::vector<std::vector<double>>& points, std::size_t k,
                      std::uint64_t seed, std::size_t max_iter) {
  Rng rng(seed);
  KMeansResult r;
  r.centroids = seed_plus_plus(points, k, rng);
  r.assignment.assign(points.size(), k);
  const std::size_t dim = points.front().size();

  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double sse = 0.0;
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double d = sqdist(points[i], r.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (r.assignment[i] != best) {
        r.assignment[i] = best;
        changed = true;
      }
      ++counts[best];
      sse += best_d;
    }

    // an empty cluster steals the point farthest from its own centroid
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      std::size_t far = points.size();
      double far_d = -1.0;
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (counts[r.assignment[i]] <= 1) continue;  // do not empty another cluster
        double d = sqdist(points[i], r.centroids[r.assignment[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == points.size()) continue;  // nothing stealable, cluster stays empty
      sse -= far_d;
      --counts[r.assignment[far]];
      r.assignment[far] = c;
      ++counts[c];
      r.centroids[c] = points[far];
      changed = true;
    }

    r.objective_history.push_back(sse);
    r.objective = sse;
    if (!changed && iter > 0) break;

    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0) r.centroids[c].assign(dim, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& cent = r.centroids[r.assignment[i]];
      for (std::size_t d = 0; d < dim; ++d) cent[d] += points[i][d];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c] > 0)
        for (double& v : r.centroids[c]) v /= static_cast<double>(counts[c]);
  }

  // final exact objective against the reported centroids
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i)
    sse += sqdist(points[i], r.centroids[r.assignment[i]]);
  r.objective = sse;
  if (r.objective_history.empty() || sse < r.objective_history.back())
    r.objective_history.push_back(sse);
  return r;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k_clusters,
                    std::uint64_t seed, std::size_t restarts, std::size_t max_iter) {
  if (k_clusters == 0) throw ConfigError("cluster count must be positive");
  if (restarts == 0) throw ConfigError("restart count must be positive");
  if (max_iter == 0) throw ConfigError("iteration cap must be positive");
  if (points.size() < k_clusters)
    throw StructuralError("fewer points than clusters: " + std::to_string(points.size()) +
                          " < " + std::to_string(k_clusters));
  const std::size_t dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw StructuralError("points disagree on dimension");
  if (dim == 0) throw StructuralError("points have no dimensions");

  KMeansResult best;
  bool have = false;
  for (std::size_t r = 0; r < restarts; ++r) {
    KMeansResult candidate = run_once(points, k_clusters, mix_seed(seed, r), max_iter);
    if (!have || candidate.objective < best.objective) {
      best = std::move(candidate);
      have = true;
    }
  }
  return best;
}

}  // namespace gridtopo::reconnect
