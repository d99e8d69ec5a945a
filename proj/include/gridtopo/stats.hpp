#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace gridtopo {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

struct PearsonResult {
  double rho = 0.0;
  std::size_t n = 0;  // pairwise-complete sample count
};

// Pearson correlation over pairwise-complete samples (indices where both
// inputs are non-missing). nullopt when fewer than 2 complete pairs remain or
// either side has zero variance. The estimate is clamped to [-1, 1].
std::optional<PearsonResult> pearson(std::span<const double> x, std::span<const double> y);

// Shannon entropy in nats of an equal-width histogram over [min, max] of the
// non-missing values. Zero for constant or empty input.
double histogram_entropy(std::span<const double> x, int bins);

// Plug-in mutual information in nats from a joint equal-width 2-D histogram,
// each axis binned over its own min-max range; pairwise-complete samples only.
// Computed as H(x) + H(y) - H(x,y) with entropy terms accumulated over sorted
// cell counts, which makes the estimate exactly symmetric in its arguments.
// Non-negative. A constant input collapses to a single bin and yields 0 with
// *degenerate set when provided.
double histogram_mi(std::span<const double> x, std::span<const double> y, int bins,
                    bool* degenerate = nullptr);

// Number of indices where both inputs are non-missing.
std::size_t pairwise_complete_count(std::span<const double> x, std::span<const double> y);

// Quantile of pre-sorted values by linear interpolation between order
// statistics: h = (n-1)p, q = v[floor(h)] + frac(h)*(v[floor(h)+1]-v[floor(h)]).
double quantile_sorted(std::span<const double> sorted, double p);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double mean(std::span<const double> x);

// Mean of non-missing values; kMissing when none remain.
double mean_nonmissing(std::span<const double> x);

// Sample standard deviation (n-1 denominator) of non-missing values; 0 when
// fewer than 2 samples remain.
double stddev_nonmissing(std::span<const double> x);

}  // namespace gridtopo
