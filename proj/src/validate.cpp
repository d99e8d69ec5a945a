#include "gridtopo/validate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "gridtopo/csv.hpp"
#include "gridtopo/error.hpp"
#include "gridtopo/geo.hpp"
#include "gridtopo/reconnect.hpp"
#include "gridtopo/stats.hpp"
#include "gridtopo/timeutil.hpp"

namespace gridtopo::validate {
namespace {

double rating_of(const Topology& topology, const ConstraintSet& constraints,
                 const std::string& tid, bool* known) {
  auto oit = constraints.rated_kva_override.find(tid);
  if (oit != constraints.rated_kva_override.end()) {
    *known = true;
    return oit->second;
  }
  const TransformerRecord* t = topology.transformer(tid);
  if (t && t->rated_kva) {
    *known = true;
    return *t->rated_kva;
  }
  *known = false;
  return 0.0;
}

std::vector<double> group_real_power(const std::vector<std::string>& group,
                                     const SeriesFrame& series) {
  std::vector<double> sum(series.size(), 0.0);
  for (const auto& pid : group) {
    auto it = series.premises.find(pid);
    if (it == series.premises.end()) continue;
    for (std::size_t t = 0; t < sum.size() && t < it->second.p_kw.size(); ++t) {
      double p = it->second.p_kw[t];
      if (!std::isnan(p)) sum[t] += p;
    }
  }
  return sum;
}

double peak_of(const std::vector<double>& x) {
  double peak = 0.0;
  for (double v : x)
    if (v > peak) peak = v;
  return peak;
}

}  // namespace

std::string kind_name(ViolationKind k) {
  return k == ViolationKind::capacity ? "capacity" : "voltage_range";
}

ApparentPower aggregate_apparent_power(const std::vector<std::string>& group,
                                       const SeriesFrame& series) {
  ApparentPower out;
  out.kva.assign(series.size(), 0.0);
  out.coverage.assign(series.size(), 0.0);
  if (group.empty()) return out;
  for (const auto& pid : group) {
    auto it = series.premises.find(pid);
    if (it == series.premises.end()) continue;
    const auto& p = it->second.p_kw;
    const auto& q = it->second.q_kvar;
    for (std::size_t t = 0; t < out.kva.size(); ++t) {
      double pw = t < p.size() && !std::isnan(p[t]) ? p[t] : 0.0;
      double qw = t < q.size() && !std::isnan(q[t]) ? q[t] : 0.0;
      out.kva[t] += std::sqrt(pw * pw + qw * qw);
      if (t < p.size() && !std::isnan(p[t])) out.coverage[t] += 1.0;
    }
  }
  for (double& c : out.coverage) c /= static_cast<double>(group.size());
  return out;
}

CapacityOutcome check_capacity(const Topology& topology, const SeriesFrame& series,
                               const ConstraintSet& constraints) {
  constraints.validate();
  CapacityOutcome out;
  auto groups = group_by_transformer(topology);
  for (const auto& [tid, members] : groups) {
    bool known = false;
    double rating = rating_of(topology, constraints, tid, &known);
    if (!known) {
      out.skipped.push_back(tid);
      continue;
    }
    std::vector<double> p = group_real_power(members, series);
    double peak = peak_of(p);
    double limit = rating * constraints.power_factor;

    CapacityRow row;
    row.id = tid;
    row.rating_kva = rating;
    row.peak_kw = peak;
    row.limit_kw = limit;
    row.violation = peak > limit;
    out.table.push_back(row);

    if (!row.violation) continue;
    Violation v;
    v.id = tid;
    v.kind = ViolationKind::capacity;
    v.observed = peak;
    v.limit = limit;
    v.unit = "kW";
    v.rating_kva = rating;
    for (std::size_t t = 0; t < p.size(); ++t)
      if (p[t] > limit) v.timestamps.push_back(series.timestamps[t]);
    ApparentPower s = aggregate_apparent_power(members, series);
    v.peak_kva = peak_of(s.kva);
    v.apparent_exceeds_rating = *v.peak_kva > rating;
    out.violations.push_back(std::move(v));
  }
  return out;
}

void VoltageRangeConfig::validate() const {
  if (v_min && v_max && !(*v_min < *v_max))
    throw ConfigError("voltage band is empty");
  if ((v_min && !v_max) || (v_max && !v_min))
    throw ConfigError("voltage band needs both ends");
  if (!(band_fraction > 0.0 && band_fraction < 1.0))
    throw ConfigError("band fraction must lie in (0,1)");
  if (persistence < 1) throw ConfigError("persistence must be at least 1");
}

std::vector<Violation> check_voltage_range(const SeriesFrame& series,
                                           const std::vector<PremiseRecord>& premises,
                                           const std::map<std::string, double>& nominal,
                                           const VoltageRangeConfig& config) {
  config.validate();
  std::vector<Violation> out;
  for (const auto& p : premises) {
    double lo, hi;
    if (config.v_min) {
      lo = *config.v_min;
      hi = *config.v_max;
    } else {
      auto nit = nominal.find(p.id);
      double nom = nit != nominal.end()
                       ? nit->second
                       : (p.nominal_voltage ? *p.nominal_voltage : kMissing);
      if (std::isnan(nom)) continue;  // no band derivable
      lo = nom * (1.0 - config.band_fraction);
      hi = nom * (1.0 + config.band_fraction);
    }

    auto sit = series.premises.find(p.id);
    const std::vector<double>* v =
        sit == series.premises.end() ? nullptr : primary_voltage(sit->second);
    if (!v) continue;

    Violation viol;
    viol.id = p.id;
    viol.kind = ViolationKind::voltage_range;
    viol.unit = "V";
    double worst_dev = -1.0;

    std::size_t run = 0;
    auto close_run = [&](std::size_t end) {
      if (run < config.persistence) {
        run = 0;
        return;
      }
      for (std::size_t t = end - run; t < end; ++t) {
        viol.timestamps.push_back(series.timestamps[t]);
        double s = (*v)[t];
        double dev = s < lo ? lo - s : s - hi;
        if (dev > worst_dev) {
          worst_dev = dev;
          viol.observed = s;
          viol.limit = s < lo ? lo : hi;
        }
      }
      run = 0;
    };
    for (std::size_t t = 0; t < v->size(); ++t) {
      double s = (*v)[t];
      if (!std::isnan(s) && (s < lo || s > hi))
        ++run;
      else
        close_run(t);
    }
    close_run(v->size());

    if (!viol.timestamps.empty()) out.push_back(std::move(viol));
  }
  return out;
}

RefinementOutcome refine_overload(const Topology& topology, const SeriesFrame& series,
                                  const ConstraintSet& constraints,
                                  const std::vector<confidence::RankedEntry>& report,
                                  const RefineConfig& config) {
  RefinementOutcome out;
  out.topology = topology;

  std::map<std::string, double> trust;  // unscored premises sort last
  for (const auto& e : report) trust[e.breakdown.premise_id] = e.breakdown.level;
  auto trust_of = [&](const std::string& pid) {
    auto it = trust.find(pid);
    return it == trust.end() ? std::numeric_limits<double>::infinity() : it->second;
  };

  CapacityOutcome initial = check_capacity(out.topology, series, constraints);
  std::vector<std::pair<double, std::string>> queue;  // magnitude desc, id asc
  for (const auto& v : initial.violations)
    queue.emplace_back(v.observed - v.limit, v.id);
  std::sort(queue.begin(), queue.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });

  auto group_peak = [&](const std::string& tid) {
    auto groups = group_by_transformer(out.topology);
    return peak_of(group_real_power(groups.at(tid), series));
  };
  auto limit_of = [&](const std::string& tid, bool* known) {
    return rating_of(out.topology, constraints, tid, known) * constraints.power_factor;
  };

  for (const auto& [magnitude, tid] : queue) {
    bool known = false;
    double limit = limit_of(tid, &known);
    if (!known) continue;

    while (group_peak(tid) > limit) {
      auto groups = group_by_transformer(out.topology);
      std::vector<std::string> members = groups.at(tid);
      std::sort(members.begin(), members.end(), [&](const auto& a, const auto& b) {
        double ta = trust_of(a), tb = trust_of(b);
        return ta != tb ? ta < tb : a < b;
      });

      bool moved = false;
      for (const auto& pid : members) {
        const std::vector<double>* pv = nullptr;
        auto sit = series.premises.find(pid);
        if (sit != series.premises.end()) pv = primary_voltage(sit->second);

        reconnect::CandidateSet candidates;
        try {
          candidates = reconnect::build_candidates(out.topology, pid, config.k);
        } catch (const Error&) {
          continue;  // no location or too few transformers, try another premise
        }

        // rank targets by mean mutual information, unscorable ones last by
        // distance
        const PremiseRecord* prem = out.topology.premise(pid);
        std::vector<std::tuple<double, double, std::string>> targets;  // -mi, dist, id
        for (const auto& cand : candidates.transformers) {
          if (cand == tid) continue;
          double mi_sum = 0.0;
          std::size_t n = 0;
          if (pv) {
            for (const auto& mid : groups.at(cand)) {
              auto mit = series.premises.find(mid);
              const std::vector<double>* mv =
                  mit == series.premises.end() ? nullptr : primary_voltage(mit->second);
              if (!mv) continue;
              try {
                mi_sum += reconnect::mutual_information(*pv, *mv, config.mi_bins,
                                                        config.min_overlap);
                ++n;
              } catch (const DataError&) {
              }
            }
          }
          double mi = n ? mi_sum / static_cast<double>(n) : -1.0;
          double dist = std::numeric_limits<double>::infinity();
          const TransformerRecord* t = out.topology.transformer(cand);
          if (prem && prem->location && t) dist = geodist_m(*prem->location, t->location);
          targets.emplace_back(-mi, dist, cand);
        }
        std::sort(targets.begin(), targets.end());

        for (const auto& [neg_mi, dist, cand] : targets) {
          bool cand_known = false;
          double cand_limit = limit_of(cand, &cand_known);
          if (cand_known) {
            std::vector<std::string> with = groups.at(cand);
            with.push_back(pid);
            if (peak_of(group_real_power(with, series)) > cand_limit) continue;
          }
          out.topology.edges[pid] = cand;
          out.moves.push_back({pid, tid, cand});
          moved = true;
          break;
        }
        if (moved) break;
      }
      if (!moved) {
        out.unresolved.push_back(tid);
        break;
      }
    }
  }

  std::sort(out.unresolved.begin(), out.unresolved.end());
  out.topology.validate();
  return out;
}

void write_capacity_csv(std::ostream& out, const std::vector<CapacityRow>& table) {
  write_csv_row(out, {"ID", "RATING_KVA", "PEAK_KW", "LIMIT_KW", "STATUS"});
  for (const auto& r : table)
    write_csv_row(out, {r.id, fmt_double(r.rating_kva), fmt_double(r.peak_kw),
                        fmt_double(r.limit_kw), r.violation ? "Violation" : "Normal"});
}

nlohmann::ordered_json violations_to_json(const std::vector<Violation>& violations) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& v : violations) {
    nlohmann::ordered_json j;
    j["id"] = v.id;
    j["kind"] = kind_name(v.kind);
    j["observed"] = fmt_double(v.observed);
    j["limit"] = fmt_double(v.limit);
    j["unit"] = v.unit;
    j["offending_samples"] = v.timestamps.size();
    if (!v.timestamps.empty()) {
      j["first_offense"] = format_rfc3339(v.timestamps.front());
      j["last_offense"] = format_rfc3339(v.timestamps.back());
    }
    if (v.rating_kva) j["rating_kva"] = fmt_double(*v.rating_kva);
    if (v.peak_kva) j["peak_kva"] = fmt_double(*v.peak_kva);
    if (v.kind == ViolationKind::capacity)
      j["apparent_exceeds_rating"] = v.apparent_exceeds_rating;
    arr.push_back(std::move(j));
  }
  return arr;
}

nlohmann::ordered_json capacity_table_to_json(const std::vector<CapacityRow>& table) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& r : table) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["rating_kva"] = fmt_double(r.rating_kva);
    j["peak_kw"] = fmt_double(r.peak_kw);
    j["limit_kw"] = fmt_double(r.limit_kw);
    j["status"] = r.violation ? "Violation" : "Normal";
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace gridtopo::validate
