#include "gridtopo/stats.hpp"

#include <algorithm>
#include <cassert>

#include "gridtopo/error.hpp"

namespace gridtopo {

std::size_t pairwise_complete_count(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!is_missing(x[i]) && !is_missing(y[i])) ++count;
  }
  return count;
}

std::optional<PearsonResult> pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  double sx = 0.0, sy = 0.0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_missing(x[i]) || is_missing(y[i])) continue;
    sx += x[i];
    sy += y[i];
    ++m;
  }
  if (m < 2) return std::nullopt;
  const double mx = sx / static_cast<double>(m);
  const double my = sy / static_cast<double>(m);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_missing(x[i]) || is_missing(y[i])) continue;
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  // exact +/-1 when one side is an exact (anti)mirror of the other, so the
  // identity rho(x,x)=1 holds without rounding residue
  if (sxy == sxx && sxx == syy) return PearsonResult{1.0, m};
  if (sxy == -sxx && sxx == syy) return PearsonResult{-1.0, m};
  double rho = sxy / std::sqrt(sxx * syy);
  rho = std::clamp(rho, -1.0, 1.0);
  return PearsonResult{rho, m};
}

namespace {

struct BinAxis {
  double lo = 0.0;
  double width = 0.0;  // 0 means degenerate (constant input)
  int bins = 1;
};

BinAxis make_axis(std::span<const double> v, std::span<const double> other, int bins) {
  BinAxis axis;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const std::size_t n = std::min(v.size(), other.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (is_missing(v[i]) || is_missing(other[i])) continue;
    lo = std::min(lo, v[i]);
    hi = std::max(hi, v[i]);
  }
  axis.lo = lo;
  if (hi > lo) {
    axis.bins = bins;
    axis.width = (hi - lo) / static_cast<double>(bins);
  }
  return axis;
}

int bin_of(const BinAxis& axis, double v) {
  if (axis.width <= 0.0) return 0;
  int b = static_cast<int>((v - axis.lo) / axis.width);
  return std::clamp(b, 0, axis.bins - 1);
}

// ln(n) - sum(c*ln(c))/n over counts sorted ascending. Sorting fixes the
// accumulation order, so transposed joint histograms sum identically.
double entropy_from_counts(std::vector<std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  std::sort(counts.begin(), counts.end());
  double acc = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double cd = static_cast<double>(c);
    acc += cd * std::log(cd);
  }
  const double td = static_cast<double>(total);
  return std::log(td) - acc / td;
}

}  // namespace

double histogram_entropy(std::span<const double> x, int bins) {
  if (bins < 1) throw ConfigError("histogram bins must be >= 1");
  const BinAxis axis = make_axis(x, x, bins);
  std::vector<std::size_t> counts(static_cast<std::size_t>(axis.bins), 0);
  std::size_t total = 0;
  for (double v : x) {
    if (is_missing(v)) continue;
    ++counts[static_cast<std::size_t>(bin_of(axis, v))];
    ++total;
  }
  return entropy_from_counts(counts, total);
}

double histogram_mi(std::span<const double> x, std::span<const double> y, int bins,
                    bool* degenerate) {
  if (bins < 2) throw ConfigError("mutual information needs bins >= 2");
  const std::size_t n = std::min(x.size(), y.size());
  const BinAxis ax = make_axis(x, y, bins);
  const BinAxis ay = make_axis(y, x, bins);
  if (degenerate) *degenerate = (ax.width <= 0.0 || ay.width <= 0.0);

  std::vector<std::size_t> cx(static_cast<std::size_t>(ax.bins), 0);
  std::vector<std::size_t> cy(static_cast<std::size_t>(ay.bins), 0);
  std::vector<std::size_t> cxy(static_cast<std::size_t>(ax.bins) * static_cast<std::size_t>(ay.bins), 0);
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (is_missing(x[i]) || is_missing(y[i])) continue;
    const auto bx = static_cast<std::size_t>(bin_of(ax, x[i]));
    const auto by = static_cast<std::size_t>(bin_of(ay, y[i]));
    ++cx[bx];
    ++cy[by];
    ++cxy[bx * static_cast<std::size_t>(ay.bins) + by];
    ++total;
  }
  const double hx = entropy_from_counts(cx, total);
  const double hy = entropy_from_counts(cy, total);
  const double hxy = entropy_from_counts(cxy, total);
  return std::max(0.0, hx + hy - hxy);
}

double quantile_sorted(std::span<const double> sorted, double p) {
  assert(!sorted.empty());
  if (sorted.size() == 1) return sorted[0];
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double mean_nonmissing(std::span<const double> x) {
  double s = 0.0;
  std::size_t m = 0;
  for (double v : x) {
    if (is_missing(v)) continue;
    s += v;
    ++m;
  }
  if (m == 0) return kMissing;
  return s / static_cast<double>(m);
}

double stddev_nonmissing(std::span<const double> x) {
  double s = 0.0;
  std::size_t m = 0;
  for (double v : x) {
    if (is_missing(v)) continue;
    s += v;
    ++m;
  }
  if (m < 2) return 0.0;
  const double mu = s / static_cast<double>(m);
  double acc = 0.0;
  for (double v : x) {
    if (is_missing(v)) continue;
    acc += (v - mu) * (v - mu);
  }
  return std::sqrt(acc / static_cast<double>(m - 1));
}

}  // namespace gridtopo
