#include "gridtopo/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>

#include "gridtopo/csv.hpp"
#include "gridtopo/error.hpp"
#include "gridtopo/stats.hpp"

namespace gridtopo::confidence {
namespace {

double euclid(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

constexpr double kFloor = 1e-12;
constexpr double kCap = 1e12;

double bounded(double v) {
  if (std::isnan(v)) return kFloor;
  return std::clamp(v, kFloor, kCap);
}

const std::vector<double>* voltage_of(const SeriesFrame& series, const std::string& pid) {
  auto it = series.premises.find(pid);
  return it == series.premises.end() ? nullptr : primary_voltage(it->second);
}

// mean raw Pearson of the outlier against each member; NaN when nothing is
// evaluable
double mean_corr(const SeriesFrame& series, const std::string& outlier,
                 const std::vector<std::string>& members, std::size_t min_overlap) {
  const std::vector<double>* ov = voltage_of(series, outlier);
  if (!ov) return kMissing;
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& pid : members) {
    const std::vector<double>* mv = voltage_of(series, pid);
    if (!mv) continue;
    auto r = pearson(*ov, *mv);
    if (!r || r->n < min_overlap) continue;
    total += r->rho;
    ++n;
  }
  return n == 0 ? kMissing : total / static_cast<double>(n);
}

}  // namespace

DbiResult dbi(const std::vector<std::vector<std::vector<double>>>& clusters) {
  if (clusters.size() < 2) throw StructuralError("dbi needs at least two clusters");
  for (const auto& c : clusters)
    if (c.empty()) throw StructuralError("dbi clusters must be non-empty");

  const std::size_t k = clusters.size();
  std::vector<std::vector<double>> centroids(k);
  std::vector<double> spread(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& pts = clusters[i];
    std::vector<double> c(pts.front().size(), 0.0);
    for (const auto& p : pts)
      for (std::size_t d = 0; d < c.size(); ++d) c[d] += p[d];
    for (double& v : c) v /= static_cast<double>(pts.size());
    double s = 0.0;
    for (const auto& p : pts) s += euclid(p, c);
    spread[i] = s / static_cast<double>(pts.size());
    centroids[i] = std::move(c);
  }

  DbiResult out;
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double worst = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (j == i) continue;
      double d = euclid(centroids[i], centroids[j]);
      if (d == 0.0) {
        out.infinite = true;
        worst = std::numeric_limits<double>::infinity();
        break;
      }
      worst = std::max(worst, (spread[i] + spread[j]) / d);
    }
    sum += worst;
  }
  out.value = sum / static_cast<double>(k);
  if (out.infinite) out.value = std::numeric_limits<double>::infinity();
  return out;
}

double score_dbi(double dbi_true, double dbi_false) {
  double a = bounded(dbi_true);
  double b = bounded(dbi_false);
  return b / (a + b);
}

double score_corr(double corr_ours, double corr_false) {
  double ours = std::isnan(corr_ours) ? 0.0 : std::clamp(corr_ours, 0.0, 1.0);
  double other = std::isnan(corr_false) ? 0.0 : std::clamp(corr_false, 0.0, 1.0);
  other = std::max(other, kFloor);
  return sigmoid(ours / other);
}

double confidence_level(double s_dbi, double s_corr, double w_dbi, double w_corr) {
  if (w_dbi < 0.0 || w_corr < 0.0 || std::abs(w_dbi + w_corr - 1.0) > 1e-9)
    throw ConfigError("confidence weights must be non-negative and sum to 1");
  return w_dbi * s_dbi + w_corr * s_corr;
}

void FalsifyOptions::validate() const {
  if (w_dbi < 0.0 || w_corr < 0.0 || std::abs(w_dbi + w_corr - 1.0) > 1e-9)
    throw ConfigError("confidence weights must be non-negative and sum to 1");
  if (min_overlap < 2) throw ConfigError("minimum overlap must be at least 2");
}

ConfidenceBreakdown falsify(const reconnect::Reassignment& move,
                            const reconnect::CandidateSet& candidates,
                            const std::vector<reconnect::FeatureVector>& features,
                            const SeriesFrame& series, const Topology& topology,
                            const FalsifyOptions& options) {
  options.validate();
  if (candidates.transformers.size() < 2)
    throw StructuralError("falsification needs at least two candidate transformers");

  std::map<std::string, const std::vector<double>*> feature_of;
  for (const auto& f : features) feature_of[f.premise_id] = &f.values;
  auto oit = feature_of.find(move.premise_id);
  if (oit == feature_of.end())
    throw UnresolvableError("premise " + move.premise_id + " has no feature vector");

  // members per candidate transformer under the recorded (old) edges
  std::map<std::string, std::vector<std::string>> members;
  for (const auto& tid : candidates.transformers) members[tid];
  for (const auto& pid : candidates.premises) {
    if (!feature_of.count(pid)) continue;
    auto eit = topology.edges.find(pid);
    if (eit == topology.edges.end()) continue;
    auto mit = members.find(eit->second);
    if (mit != members.end()) mit->second.push_back(pid);
  }

  auto clustering_with = [&](const std::string& host) {
    std::vector<std::vector<std::vector<double>>> clusters;
    for (const auto& [tid, ids] : members) {
      std::vector<std::vector<double>> pts;
      for (const auto& pid : ids) pts.push_back(*feature_of.at(pid));
      if (tid == host) pts.push_back(*oit->second);
      if (!pts.empty()) clusters.push_back(std::move(pts));
    }
    return clusters;
  };

  ConfidenceBreakdown out;
  out.premise_id = move.premise_id;
  out.old_transformer = move.old_transformer;
  out.new_transformer = move.new_transformer;

  auto true_clusters = clustering_with(move.new_transformer);
  DbiResult dbi_chosen{std::numeric_limits<double>::infinity(), true};
  if (true_clusters.size() >= 2) dbi_chosen = dbi(true_clusters);
  out.dbi_true = dbi_chosen.value;

  bool any_infinite = dbi_chosen.infinite;
  std::vector<double> rivals;
  for (const auto& tid : candidates.transformers) {
    if (tid == move.new_transformer) continue;
    if (members.at(tid).empty()) continue;  // nothing to falsify against
    auto alt_clusters = clustering_with(tid);
    if (alt_clusters.size() < 2) continue;
    DbiResult r = dbi(alt_clusters);
    any_infinite = any_infinite || r.infinite;
    rivals.push_back(r.value);
    out.falsified_against.push_back(tid);
  }
  if (rivals.empty())
    throw UnresolvableError("premise " + move.premise_id + ": every rival group is empty");

  if (options.aggregate == FalsifyOptions::Aggregate::minimum) {
    out.dbi_false = *std::min_element(rivals.begin(), rivals.end());
  } else {
    double s = 0.0;
    for (double v : rivals) s += v;
    out.dbi_false = s / static_cast<double>(rivals.size());
  }
  out.dbi_infinite = any_infinite;

  std::vector<std::string> rival_members;
  for (const auto& tid : out.falsified_against)
    for (const auto& pid : members.at(tid)) rival_members.push_back(pid);
  out.corr_ours = mean_corr(series, move.premise_id, members.at(move.new_transformer),
                            options.min_overlap);
  out.corr_false = mean_corr(series, move.premise_id, rival_members, options.min_overlap);

  out.score_dbi = score_dbi(out.dbi_true, out.dbi_false);
  out.score_corr = score_corr(out.corr_ours, out.corr_false);
  out.level = confidence_level(out.score_dbi, out.score_corr, options.w_dbi, options.w_corr);
  return out;
}

std::vector<RankedEntry> rank_report(std::vector<ConfidenceBreakdown> breakdowns,
                                     double review_threshold) {
  std::sort(breakdowns.begin(), breakdowns.end(),
            [](const ConfidenceBreakdown& a, const ConfidenceBreakdown& b) {
              if (a.level != b.level) return a.level > b.level;
              return a.premise_id < b.premise_id;
            });
  std::vector<RankedEntry> out;
  out.reserve(breakdowns.size());
  for (auto& b : breakdowns) {
    RankedEntry e;
    e.needs_review = b.level < review_threshold;
    e.breakdown = std::move(b);
    out.push_back(std::move(e));
  }
  return out;
}

void write_confidence_csv(std::ostream& out, const std::vector<RankedEntry>& entries) {
  write_csv_row(out, {"PREMISE_ID", "OLD_XFMR", "NEW_XFMR", "DBI_TRUE", "DBI_FALSE", "CORR_OURS",
                      "CORR_FALSE", "SCORE_DBI", "SCORE_CORR", "LEVEL", "FLAG"});
  for (const auto& e : entries) {
    const auto& b = e.breakdown;
    write_csv_row(out, {b.premise_id, b.old_transformer, b.new_transformer, fmt_double(b.dbi_true),
                        fmt_double(b.dbi_false), fmt_double(b.corr_ours),
                        fmt_double(b.corr_false), fmt_double(b.score_dbi),
                        fmt_double(b.score_corr), fmt_double(b.level),
                        e.needs_review ? "NEEDS_REVIEW" : "OK"});
  }
}

nlohmann::ordered_json confidence_to_json(const std::vector<RankedEntry>& entries) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    const auto& b = e.breakdown;
    nlohmann::ordered_json j;
    j["premise_id"] = b.premise_id;
    j["old_transformer"] = b.old_transformer;
    j["new_transformer"] = b.new_transformer;
    j["dbi_true"] = fmt_double(b.dbi_true);
    j["dbi_false"] = fmt_double(b.dbi_false);
    j["dbi_infinite"] = b.dbi_infinite;
    j["corr_ours"] = fmt_double(b.corr_ours);
    j["corr_false"] = fmt_double(b.corr_false);
    j["score_dbi"] = fmt_double(b.score_dbi);
    j["score_corr"] = fmt_double(b.score_corr);
    j["level"] = fmt_double(b.level);
    j["falsified_against"] = b.falsified_against;
    j["needs_review"] = e.needs_review;
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace gridtopo::confidence
