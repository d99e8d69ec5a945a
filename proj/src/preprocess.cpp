#include "gridtopo/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gridtopo/error.hpp"
#include "gridtopo/geo.hpp"
#include "gridtopo/stats.hpp"

namespace gridtopo::preprocess {

void PreprocessConfig::validate() const {
  if (!(min_completeness >= 0.0 && min_completeness <= 1.0))
    throw ConfigError("min completeness must lie in [0,1]");
  if (!(iqr_k > 0.0)) throw ConfigError("iqr multiplier must be positive");
  if (flatline_window < 2) throw ConfigError("flatline window must be >= 2");
  if (!(flatline_epsilon_pu > 0.0)) throw ConfigError("flatline epsilon must be positive");
}

nlohmann::ordered_json to_json(const CleaningReport& report) {
  nlohmann::ordered_json j;
  j["dropped_incomplete"] = report.dropped_incomplete;
  j["dropped_flatline"] = report.dropped_flatline;
  j["samples_removed_range"] = report.samples_removed_range;
  j["samples_removed_iqr"] = report.samples_removed_iqr;
  j["inferred_nominal"] = report.inferred_nominal;
  j["nominal_unresolved"] = report.nominal_unresolved;
  j["warnings"] = report.warnings;
  return j;
}

IqrOutcome iqr_filter(std::span<const double> x, double k) {
  if (!(k > 0.0)) throw ConfigError("iqr multiplier must be positive");
  IqrOutcome out;
  out.values.assign(x.begin(), x.end());
  std::vector<double> usable;
  usable.reserve(x.size());
  for (double v : x)
    if (!std::isnan(v)) usable.push_back(v);
  if (usable.size() < 4) {
    out.warning = true;
    return out;
  }
  std::sort(usable.begin(), usable.end());
  double q1 = quantile_sorted(usable, 0.25);
  double q3 = quantile_sorted(usable, 0.75);
  double lo = q1 - k * (q3 - q1);
  double hi = q3 + k * (q3 - q1);
  for (double& v : out.values) {
    if (std::isnan(v)) continue;
    if (v < lo || v > hi) {
      v = kMissing;
      ++out.removed;
    }
  }
  return out;
}

double infer_nominal(const PremiseRecord& premise,
                     const std::vector<const PremiseRecord*>& neighbors) {
  std::map<double, std::size_t> votes;
  for (const PremiseRecord* n : neighbors)
    if (n->nominal_voltage) ++votes[*n->nominal_voltage];
  if (votes.empty())
    throw UnresolvableError("premise " + premise.id + ": no neighbor has a known nominal");

  std::size_t top = 0;
  for (const auto& [v, n] : votes) top = std::max(top, n);
  std::vector<double> tied;
  for (const auto& [v, n] : votes)
    if (n == top) tied.push_back(v);
  if (tied.size() == 1) return tied.front();

  // tie: side with whichever tied value the nearest neighbor holds
  double best_dist = std::numeric_limits<double>::infinity();
  double best_value = tied.front();  // tied is sorted ascending (map order)
  for (const PremiseRecord* n : neighbors) {
    if (!n->nominal_voltage) continue;
    if (!std::binary_search(tied.begin(), tied.end(), *n->nominal_voltage)) continue;
    double d = std::numeric_limits<double>::infinity();
    if (premise.location && n->location) d = geodist_m(*premise.location, *n->location);
    if (d < best_dist || (d == best_dist && *n->nominal_voltage < best_value)) {
      best_dist = d;
      best_value = *n->nominal_voltage;
    }
  }
  return best_value;
}

NominalResolution resolve_nominals(const Topology& topology) {
  NominalResolution out;

  auto groups = group_by_transformer(topology);
  std::map<std::string, const std::vector<std::string>*> group_of;
  for (const auto& [tid, members] : groups)
    for (const auto& pid : members) group_of[pid] = &members;

  std::vector<const PremiseRecord*> with_nominal;
  for (const auto& p : topology.premises)
    if (p.nominal_voltage) with_nominal.push_back(&p);

  for (const auto& p : topology.premises) {
    if (p.nominal_voltage) {
      out.nominal[p.id] = *p.nominal_voltage;
      continue;
    }

    std::vector<const PremiseRecord*> neighbors;
    auto git = group_of.find(p.id);
    if (git != group_of.end()) {
      for (const auto& pid : *git->second) {
        if (pid == p.id) continue;
        const PremiseRecord* n = topology.premise(pid);
        if (n && n->nominal_voltage) neighbors.push_back(n);
      }
    }

    if (neighbors.empty() && p.location) {
      // fall back to the nearest premises that do know their nominal
      std::vector<std::pair<double, const PremiseRecord*>> ranked;
      for (const PremiseRecord* n : with_nominal) {
        if (n->id == p.id || !n->location) continue;
        ranked.emplace_back(geodist_m(*p.location, *n->location), n);
      }
      std::sort(ranked.begin(), ranked.end(),
                [](const auto& a, const auto& b) {
                  return a.first != b.first ? a.first < b.first : a.second->id < b.second->id;
                });
      for (std::size_t i = 0; i < ranked.size() && i < 10; ++i)
        neighbors.push_back(ranked[i].second);
    }

    if (neighbors.empty()) {
      out.unresolved.push_back(p.id);
      continue;
    }
    double v = infer_nominal(p, neighbors);
    out.nominal[p.id] = v;
    out.inferred[p.id] = v;
  }
  return out;
}

void normalize_per_unit(SeriesFrame& frame, const std::map<std::string, double>& nominal) {
  for (auto& [pid, chans] : frame.premises) {
    auto it = nominal.find(pid);
    if (it == nominal.end())
      throw DataError("premise " + pid + ": no nominal voltage to normalize against");
    double v = it->second;
    if (!(v > 0.0)) throw DataError("premise " + pid + ": non-positive nominal voltage");
    for (std::vector<double>* chan : {&chans.va, &chans.vb, &chans.vc})
      for (double& s : *chan)
        if (!std::isnan(s)) s /= v;
  }
}

CleanOutcome clean(const Topology& topology, const SeriesFrame& frame,
                   const PreprocessConfig& config, const std::optional<ConstraintSet>& band) {
  config.validate();
  if (band) band->validate();

  CleanOutcome out;
  out.frame = frame;

  NominalResolution nominals = resolve_nominals(topology);
  out.report.inferred_nominal = nominals.inferred;
  out.report.nominal_unresolved = nominals.unresolved;
  for (const auto& pid : nominals.unresolved) {
    if (out.frame.premises.erase(pid))
      out.report.warnings.push_back("premise " + pid + ": dropped, nominal unresolved");
  }
  // series for premises the topology does not know cannot be normalized
  for (auto it = out.frame.premises.begin(); it != out.frame.premises.end();) {
    if (nominals.nominal.count(it->first)) {
      ++it;
    } else {
      out.report.warnings.push_back("premise " + it->first + ": dropped, not in topology");
      it = out.frame.premises.erase(it);
    }
  }

  if (config.enable_range_screen) {
    for (auto& [pid, chans] : out.frame.premises) {
      ConstraintSet cs = band ? *band : ConstraintSet::for_nominal(nominals.nominal.at(pid));
      std::size_t removed = 0;
      for (std::vector<double>* chan : {&chans.va, &chans.vb, &chans.vc}) {
        for (double& s : *chan) {
          if (std::isnan(s)) continue;
          if (s < cs.v_min || s > cs.v_max) {
            s = kMissing;
            ++removed;
          }
        }
      }
      if (removed) out.report.samples_removed_range[pid] = removed;
    }
  }

  normalize_per_unit(out.frame, nominals.nominal);

  for (auto it = out.frame.premises.begin(); it != out.frame.premises.end();) {
    const std::vector<double>* v = primary_voltage(it->second);
    double present = v ? static_cast<double>(v->size() - std::count_if(
                             v->begin(), v->end(), [](double s) { return std::isnan(s); }))
                       : 0.0;
    double fraction = out.frame.size() ? present / static_cast<double>(out.frame.size()) : 0.0;
    if (!v || fraction < config.min_completeness) {
      out.report.dropped_incomplete.push_back(it->first);
      it = out.frame.premises.erase(it);
    } else {
      ++it;
    }
  }

  if (config.enable_iqr) {
    for (auto& [pid, chans] : out.frame.premises) {
      std::size_t removed = 0;
      for (std::vector<double>* chan : {&chans.va, &chans.vb, &chans.vc}) {
        if (std::all_of(chan->begin(), chan->end(), [](double s) { return std::isnan(s); }))
          continue;
        IqrOutcome o = iqr_filter(*chan, config.iqr_k);
        if (o.warning)
          out.report.warnings.push_back("premise " + pid + ": too few samples for iqr filter");
        removed += o.removed;
        *chan = std::move(o.values);
      }
      if (removed) out.report.samples_removed_iqr[pid] = removed;
    }
  }

  if (config.enable_flatline) {
    for (auto it = out.frame.premises.begin(); it != out.frame.premises.end();) {
      const std::vector<double>* v = primary_voltage(it->second);
      double sd = v ? stddev_nonmissing(*v) : 0.0;
      if (!v || std::isnan(sd) || sd < config.flatline_epsilon_pu) {
        out.report.dropped_flatline.push_back(it->first);
        it = out.frame.premises.erase(it);
      } else {
        ++it;
      }
    }
  }

  for (const auto& [pid, chans] : out.frame.premises)
    out.nominal[pid] = nominals.nominal.at(pid);
  return out;
}

}  // namespace gridtopo::preprocess
