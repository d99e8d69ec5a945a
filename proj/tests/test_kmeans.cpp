#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "gridtopo/error.hpp"
#include "gridtopo/kmeans.hpp"

using gridtopo::ConfigError;
using gridtopo::StructuralError;
using gridtopo::reconnect::kmeans;
using gridtopo::reconnect::KMeansResult;

namespace {

using Points = std::vector<std::vector<double>>;

double partition_sse(const Points& pts, unsigned mask) {
  std::vector<double> m0(pts[0].size(), 0.0), m1(pts[0].size(), 0.0);
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto& m = (mask >> i) & 1u ? m1 : m0;
    ((mask >> i) & 1u ? n1 : n0) += 1;
    for (std::size_t d = 0; d < pts[i].size(); ++d) m[d] += pts[i][d];
  }
  for (double& v : m0) v /= static_cast<double>(n0);
  for (double& v : m1) v /= static_cast<double>(n1);
  double sse = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& m = (mask >> i) & 1u ? m1 : m0;
    for (std::size_t d = 0; d < pts[i].size(); ++d) {
      double diff = pts[i][d] - m[d];
      sse += diff * diff;
    }
  }
  return sse;
}

double best_two_partition(const Points& pts) {
  double best = std::numeric_limits<double>::infinity();
  unsigned full = (1u << pts.size()) - 1u;
  for (unsigned mask = 1; mask < full; ++mask) best = std::min(best, partition_sse(pts, mask));
  return best;
}

}  // namespace

TEST_CASE("two clusters match exhaustive enumeration on small inputs") {
  std::mt19937_64 gen(20240101);
  std::uniform_int_distribution<int> n_dist(2, 8);
  std::normal_distribution<double> coord(0.0, 5.0);

  for (int trial = 0; trial < 30; ++trial) {
    int n = n_dist(gen);
    Points pts(n, std::vector<double>(2));
    for (auto& p : pts)
      for (double& v : p) v = coord(gen);

    KMeansResult r = kmeans(pts, 2, 1000 + trial, 10);
    double oracle = best_two_partition(pts);
    CHECK(r.objective == doctest::Approx(oracle).epsilon(1e-6));
    CHECK(r.objective >= oracle - 1e-9);  // can never beat the true optimum
  }
}

TEST_CASE("same seed, same clustering") {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> coord(0.0, 1.0);
  Points pts(30, std::vector<double>(3));
  for (auto& p : pts)
    for (double& v : p) v = coord(gen);

  KMeansResult a = kmeans(pts, 4, 99);
  KMeansResult b = kmeans(pts, 4, 99);
  CHECK(a.assignment == b.assignment);
  CHECK(a.centroids == b.centroids);
  CHECK(a.objective == b.objective);
}

TEST_CASE("well separated blobs are recovered") {
  Points pts;
  std::mt19937_64 gen(11);
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (int i = 0; i < 10; ++i) pts.push_back({0.0 + jitter(gen), 0.0 + jitter(gen)});
  for (int i = 0; i < 10; ++i) pts.push_back({8.0 + jitter(gen), 8.0 + jitter(gen)});

  KMeansResult r = kmeans(pts, 2, 5);
  std::set<std::size_t> left(r.assignment.begin(), r.assignment.begin() + 10);
  std::set<std::size_t> right(r.assignment.begin() + 10, r.assignment.end());
  CHECK(left.size() == 1);
  CHECK(right.size() == 1);
  CHECK(*left.begin() != *right.begin());
}

TEST_CASE("coincident points never strand a cluster") {
  Points pts = {{0.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}, {10.0, 10.0}, {10.0, 10.0}, {10.0, 10.0}};
  KMeansResult r = kmeans(pts, 3, 42);
  std::vector<std::size_t> counts(3, 0);
  for (std::size_t c : r.assignment) {
    REQUIRE(c < 3);
    ++counts[c];
  }
  for (std::size_t c = 0; c < 3; ++c) CHECK(counts[c] > 0);
  // the optimum splits one stack 2+1, which still costs nothing
  CHECK(r.objective == 0.0);
}

TEST_CASE("objective history never climbs") {
  std::mt19937_64 gen(13);
  std::normal_distribution<double> coord(0.0, 3.0);
  Points pts(60, std::vector<double>(3));
  for (auto& p : pts)
    for (double& v : p) v = coord(gen);

  KMeansResult r = kmeans(pts, 5, 17);
  REQUIRE(!r.objective_history.empty());
  for (std::size_t i = 1; i < r.objective_history.size(); ++i)
    CHECK(r.objective_history[i] <= r.objective_history[i - 1] + 1e-9);
  CHECK(r.objective == doctest::Approx(r.objective_history.back()));
}

TEST_CASE("single cluster is just the mean") {
  Points pts = {{0.0}, {2.0}};
  KMeansResult r = kmeans(pts, 1, 1);
  CHECK(r.assignment == std::vector<std::size_t>{0, 0});
  CHECK(r.centroids[0][0] == 1.0);
  CHECK(r.objective == 2.0);
}

TEST_CASE("input validation") {
  Points two = {{0.0, 0.0}, {1.0, 1.0}};
  CHECK_THROWS_AS(kmeans(two, 3, 1), StructuralError);  // more clusters than points
  CHECK_THROWS_AS(kmeans({{1.0}, {1.0, 2.0}}, 1, 1), StructuralError);
  CHECK_THROWS_AS(kmeans({{}, {}}, 1, 1), StructuralError);
  CHECK_THROWS_AS(kmeans(two, 0, 1), ConfigError);
  CHECK_THROWS_AS(kmeans(two, 2, 1, 0), ConfigError);
  CHECK_THROWS_AS(kmeans(two, 2, 1, 10, 0), ConfigError);
}
