#include "gridtopo/reconnect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <set>

#include "gridtopo/csv.hpp"
#include "gridtopo/error.hpp"
#include "gridtopo/geo.hpp"
#include "gridtopo/stats.hpp"

namespace gridtopo::reconnect {
namespace {

const std::vector<double>* voltage_of(const SeriesFrame& series, const std::string& pid) {
  auto it = series.premises.find(pid);
  return it == series.premises.end() ? nullptr : primary_voltage(it->second);
}

// complete pairs only, in time order
void complete_pairs(std::span<const double> x, std::span<const double> y,
                    std::vector<double>& xc, std::vector<double>& yc) {
  xc.clear();
  yc.clear();
  std::size_t n = std::min(x.size(), y.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) continue;
    xc.push_back(x[i]);
    yc.push_back(y[i]);
  }
}

}  // namespace

void ReconnectConfig::validate() const {
  if (k < 2) throw ConfigError("candidate transformer count must be at least 2");
  if (restarts == 0) throw ConfigError("restart count must be positive");
  if (max_iter == 0) throw ConfigError("iteration cap must be positive");
  if (mi_bins < 2) throw ConfigError("mi bins must be at least 2");
  if (min_overlap < 2) throw ConfigError("minimum overlap must be at least 2");
}

std::string method_name(Method m) {
  return m == Method::kmeans ? "kmeans" : "mutual_information";
}

CandidateSet build_candidates(const Topology& topology, const std::string& outlier_id,
                              std::size_t k) {
  if (k < 2) throw ConfigError("candidate transformer count must be at least 2");
  const PremiseRecord* outlier = topology.premise(outlier_id);
  if (!outlier) throw StructuralError("unknown premise " + outlier_id);
  if (!outlier->location)
    throw UnresolvableError("premise " + outlier_id + " has no location");
  if (topology.transformers.size() < k)
    throw StructuralError("topology has " + std::to_string(topology.transformers.size()) +
                          " transformers, need " + std::to_string(k));

  auto eit = topology.edges.find(outlier_id);
  const std::string current = eit == topology.edges.end() ? "" : eit->second;

  std::vector<std::pair<double, std::string>> ranked;
  ranked.reserve(topology.transformers.size());
  for (const auto& t : topology.transformers)
    ranked.emplace_back(geodist_m(*outlier->location, t.location), t.id);
  std::sort(ranked.begin(), ranked.end());

  CandidateSet out;
  out.outlier = outlier_id;
  std::set<std::string> chosen;
  for (std::size_t i = 0; i < ranked.size() && chosen.size() < k; ++i)
    chosen.insert(ranked[i].second);
  if (!current.empty()) chosen.insert(current);
  for (const auto& [d, tid] : ranked)
    if (chosen.count(tid)) out.transformers.push_back(tid);

  auto groups = group_by_transformer(topology);
  for (const auto& tid : out.transformers)
    for (const auto& pid : groups.at(tid))
      if (pid != outlier_id) out.premises.push_back(pid);
  std::sort(out.premises.begin(), out.premises.end());
  return out;
}

FeaturizeOutcome featurize(const Topology& topology, const std::vector<std::string>& premise_ids,
                           const SeriesFrame& series) {
  FeaturizeOutcome out;
  const std::size_t steps = series.size();
  for (const auto& pid : premise_ids) {
    const PremiseRecord* p = topology.premise(pid);
    const std::vector<double>* v = voltage_of(series, pid);
    double fill = v ? mean_nonmissing(*v) : kMissing;
    if (!p || !p->location || !v || std::isnan(fill)) {
      out.excluded.push_back(pid);
      continue;
    }
    FeatureVector f;
    f.premise_id = pid;
    f.values.reserve(steps + 2);
    for (std::size_t t = 0; t < steps; ++t) {
      double s = (*v)[t];
      f.values.push_back(std::isnan(s) ? fill : s);
    }
    f.values.push_back(p->location->lat);
    f.values.push_back(p->location->lon);
    out.features.push_back(std::move(f));
  }

  if (out.features.empty()) return out;
  const std::size_t dim = out.features.front().values.size();
  for (std::size_t d = 0; d < dim; ++d) {
    double m = 0.0;
    for (const auto& f : out.features) m += f.values[d];
    m /= static_cast<double>(out.features.size());
    double var = 0.0;
    for (const auto& f : out.features) {
      double diff = f.values[d] - m;
      var += diff * diff;
    }
    var /= static_cast<double>(out.features.size());
    double sd = std::sqrt(var);
    for (auto& f : out.features)
      f.values[d] = sd > 0.0 ? (f.values[d] - m) / sd : 0.0;
  }
  return out;
}

std::optional<std::string> pair_cluster_transformer(const Topology& topology,
                                                    const CandidateSet& candidates,
                                                    const std::vector<std::string>& cluster) {
  std::map<std::string, std::size_t> share;
  for (const auto& pid : cluster) {
    if (pid == candidates.outlier) continue;
    auto eit = topology.edges.find(pid);
    if (eit == topology.edges.end()) continue;
    if (std::find(candidates.transformers.begin(), candidates.transformers.end(), eit->second) !=
        candidates.transformers.end())
      ++share[eit->second];
  }
  if (share.empty()) return std::nullopt;
  std::size_t top = 0;
  for (const auto& [tid, n] : share) top = std::max(top, n);

  std::vector<std::string> tied;
  for (const auto& [tid, n] : share)
    if (n == top) tied.push_back(tid);
  if (tied.size() == 1) return tied.front();

  // tie: nearest transformer to the cluster's mean location
  double lat = 0.0, lon = 0.0;
  std::size_t located = 0;
  for (const auto& pid : cluster) {
    const PremiseRecord* p = topology.premise(pid);
    if (p && p->location) {
      lat += p->location->lat;
      lon += p->location->lon;
      ++located;
    }
  }
  if (located == 0) return tied.front();  // tied ids sorted, smallest wins
  GeoPoint centroid{lat / static_cast<double>(located), lon / static_cast<double>(located)};
  std::string best = tied.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& tid : tied) {
    const TransformerRecord* t = topology.transformer(tid);
    double d = t ? geodist_m(centroid, t->location) : std::numeric_limits<double>::infinity();
    if (d < best_d) {
      best_d = d;
      best = tid;
    }
  }
  return best;
}

double mutual_information(std::span<const double> x, std::span<const double> y,
                          std::size_t bins, std::size_t min_overlap) {
  std::vector<double> xc, yc;
  complete_pairs(x, y, xc, yc);
  if (xc.size() < min_overlap)
    throw DataError("only " + std::to_string(xc.size()) + " shared samples, need " +
                    std::to_string(min_overlap));
  bool degenerate = false;
  return histogram_mi(xc, yc, bins, &degenerate);
}

Reassignment reconnect_mi(const Topology& topology, const SeriesFrame& series,
                          const CandidateSet& candidates, std::size_t bins,
                          std::size_t min_overlap) {
  const std::vector<double>* ov = voltage_of(series, candidates.outlier);
  if (!ov)
    throw UnresolvableError("premise " + candidates.outlier + " has no voltage data");
  const PremiseRecord* outlier = topology.premise(candidates.outlier);

  auto groups = group_by_transformer(topology);
  std::string best;
  double best_mi = -1.0;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& tid : candidates.transformers) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& pid : groups.at(tid)) {
      if (pid == candidates.outlier) continue;
      const std::vector<double>* mv = voltage_of(series, pid);
      if (!mv) continue;
      std::vector<double> xc, yc;
      complete_pairs(*ov, *mv, xc, yc);
      if (xc.size() < min_overlap) continue;
      bool degenerate = false;
      total += histogram_mi(xc, yc, bins, &degenerate);
      ++n;
    }
    if (n == 0) continue;
    double mi = total / static_cast<double>(n);
    double d = std::numeric_limits<double>::infinity();
    const TransformerRecord* t = topology.transformer(tid);
    if (outlier && outlier->location && t) d = geodist_m(*outlier->location, t->location);
    if (mi > best_mi || (mi == best_mi && (d < best_d || (d == best_d && tid < best)))) {
      best = tid;
      best_mi = mi;
      best_d = d;
    }
  }
  if (best.empty())
    throw UnresolvableError("premise " + candidates.outlier +
                            ": no candidate group can be scored");

  Reassignment r;
  r.premise_id = candidates.outlier;
  auto eit = topology.edges.find(candidates.outlier);
  r.old_transformer = eit == topology.edges.end() ? "" : eit->second;
  r.new_transformer = best;
  r.method = Method::mutual_information;
  return r;
}

Reassignment reconnect_kmeans(const Topology& topology, const SeriesFrame& series,
                              const CandidateSet& candidates, const ReconnectConfig& config) {
  config.validate();
  std::vector<std::string> ids = candidates.premises;
  ids.push_back(candidates.outlier);
  FeaturizeOutcome feats = featurize(topology, ids, series);

  std::size_t outlier_row = feats.features.size();
  for (std::size_t i = 0; i < feats.features.size(); ++i)
    if (feats.features[i].premise_id == candidates.outlier) outlier_row = i;
  if (outlier_row == feats.features.size())
    throw UnresolvableError("premise " + candidates.outlier + " cannot be featurized");

  std::vector<std::vector<double>> points;
  points.reserve(feats.features.size());
  for (const auto& f : feats.features) points.push_back(f.values);

  std::size_t k_clusters = std::min(candidates.transformers.size(), points.size());
  KMeansResult km = kmeans(points, k_clusters, config.seed, config.restarts, config.max_iter);

  std::vector<std::string> cluster;
  for (std::size_t i = 0; i < points.size(); ++i)
    if (km.assignment[i] == km.assignment[outlier_row])
      cluster.push_back(feats.features[i].premise_id);

  auto paired = pair_cluster_transformer(topology, candidates, cluster);
  if (!paired) {
    // outlier sits in a cluster of its own, geometry cannot decide
    Reassignment r = reconnect_mi(topology, series, candidates, config.mi_bins,
                                  config.min_overlap);
    r.cluster_index = km.assignment[outlier_row];
    return r;
  }

  Reassignment r;
  r.premise_id = candidates.outlier;
  auto eit = topology.edges.find(candidates.outlier);
  r.old_transformer = eit == topology.edges.end() ? "" : eit->second;
  r.new_transformer = *paired;
  r.method = Method::kmeans;
  r.cluster_index = km.assignment[outlier_row];
  return r;
}

Reassignment reconnect(const Topology& topology, const SeriesFrame& series,
                       const CandidateSet& candidates, const ReconnectConfig& config) {
  config.validate();
  if (config.mi_only)
    return reconnect_mi(topology, series, candidates, config.mi_bins, config.min_overlap);
  return reconnect_kmeans(topology, series, candidates, config);
}

void write_reassignments_csv(std::ostream& out, const std::vector<Reassignment>& moves) {
  write_csv_row(out, {"PREMISE_ID", "OLD_XFMR", "NEW_XFMR", "METHOD"});
  for (const auto& m : moves)
    write_csv_row(out, {m.premise_id, m.old_transformer, m.new_transformer,
                        method_name(m.method)});
}

std::vector<Reassignment> read_reassignments_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  std::size_t c_id = t.require("PREMISE_ID", path);
  std::size_t c_old = t.require("OLD_XFMR", path);
  std::size_t c_new = t.require("NEW_XFMR", path);
  std::size_t c_m = t.require("METHOD", path);
  std::vector<Reassignment> out;
  for (const auto& row : t.rows) {
    Reassignment m;
    m.premise_id = row.at(c_id);
    m.old_transformer = row.at(c_old);
    m.new_transformer = row.at(c_new);
    const std::string& name = row.at(c_m);
    if (name == "kmeans")
      m.method = Method::kmeans;
    else if (name == "mutual_information")
      m.method = Method::mutual_information;
    else
      throw DataError(path + ": unknown method '" + name + "'");
    out.push_back(std::move(m));
  }
  return out;
}

nlohmann::ordered_json reassignments_to_json(const std::vector<Reassignment>& moves) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& m : moves) {
    nlohmann::ordered_json j;
    j["premise_id"] = m.premise_id;
    j["old_transformer"] = m.old_transformer;
    j["new_transformer"] = m.new_transformer;
    j["method"] = method_name(m.method);
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace gridtopo::reconnect
