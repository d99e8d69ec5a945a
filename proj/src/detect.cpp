#include "gridtopo/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "gridtopo/csv.hpp"
#include "gridtopo/error.hpp"
#include "gridtopo/geo.hpp"
#include "gridtopo/stats.hpp"

namespace gridtopo::detect {
namespace {

bool flag_order(const OutlierFlag& a, const OutlierFlag& b) {
  return a.premise_id < b.premise_id;
}

// geo columns are informative on electrical flags too, fill what we can
void fill_geometry(OutlierFlag& f, const Topology& topology, const PremiseRecord& premise) {
  f.dist_m = f.nearest_dist_m = f.ratio = kMissing;
  if (!premise.location || topology.transformers.empty()) return;
  const TransformerRecord* cur = topology.transformer(f.transformer);
  if (!cur) return;
  NearestResult near = nearest_transformer(topology, *premise.location);
  f.nearest_transformer = near.id;
  f.nearest_dist_m = near.dist_m;
  f.dist_m = geodist_m(*premise.location, cur->location);
  if (near.dist_m > 0.0)
    f.ratio = f.dist_m / near.dist_m;
  else
    f.ratio = f.dist_m > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

}  // namespace

std::string reason_name(FlagReason r) {
  switch (r) {
    case FlagReason::geographic: return "geographic";
    case FlagReason::electrical: return "electrical";
    case FlagReason::both: return "both";
  }
  return "geographic";
}

NearestResult nearest_transformer(const Topology& topology, const GeoPoint& point) {
  if (topology.transformers.empty())
    throw StructuralError("topology has no transformers");
  NearestResult best;
  best.dist_m = std::numeric_limits<double>::infinity();
  for (const auto& t : topology.transformers) {
    double d = geodist_m(point, t.location);
    if (d < best.dist_m || (d == best.dist_m && t.id < best.id)) {
      best.id = t.id;
      best.dist_m = d;
    }
  }
  return best;
}

NearestResult nearest_transformer(const Topology& topology, const PremiseRecord& premise) {
  if (!premise.location)
    throw UnresolvableError("premise " + premise.id + " has no location");
  return nearest_transformer(topology, *premise.location);
}

GeoFlagOutcome flag_geographic(const Topology& topology, double tau) {
  if (!(tau > 1.0)) throw ConfigError("distance ratio threshold must exceed 1");
  GeoFlagOutcome out;
  for (const auto& p : topology.premises) {
    auto eit = topology.edges.find(p.id);
    if (eit == topology.edges.end() || !p.location) {
      out.skipped.push_back(p.id);
      continue;
    }
    OutlierFlag f;
    f.premise_id = p.id;
    f.transformer = eit->second;
    f.reason = FlagReason::geographic;
    fill_geometry(f, topology, p);
    if (!std::isnan(f.ratio) && f.ratio > tau) out.flags.push_back(f);
  }
  std::sort(out.flags.begin(), out.flags.end(), flag_order);
  return out;
}

ElectricalFlagOutcome flag_electrical(const Topology& topology, const SeriesFrame& series,
                                      double epsilon, std::size_t min_overlap) {
  if (!(epsilon > -1.0 && epsilon < 1.0))
    throw ConfigError("correlation threshold must lie in (-1,1)");
  if (min_overlap < 2) throw ConfigError("minimum overlap must be at least 2");

  ElectricalFlagOutcome out;
  auto groups = group_by_transformer(topology);
  for (const auto& [tid, members] : groups) {
    // members with usable voltage
    std::vector<std::pair<std::string, const std::vector<double>*>> usable;
    for (const auto& pid : members) {
      auto sit = series.premises.find(pid);
      const std::vector<double>* v =
          sit == series.premises.end() ? nullptr : primary_voltage(sit->second);
      if (v)
        usable.emplace_back(pid, v);
      else
        out.skipped_premises.push_back(pid);
    }
    if (usable.size() < 2) {
      if (!members.empty()) out.skipped_groups.push_back(tid);
      continue;
    }
    for (const auto& [pid, v] : usable) {
      bool evaluable = false;
      bool all_below = true;
      for (const auto& [oid, ov] : usable) {
        if (oid == pid) continue;
        auto r = pearson(*v, *ov);
        if (!r || r->n < min_overlap) continue;
        evaluable = true;
        if (r->rho >= epsilon) {
          all_below = false;
          break;
        }
      }
      if (evaluable && all_below) {
        OutlierFlag f;
        f.premise_id = pid;
        f.transformer = tid;
        f.reason = FlagReason::electrical;
        const PremiseRecord* p = topology.premise(pid);
        if (p) fill_geometry(f, topology, *p);
        out.flags.push_back(f);
      }
    }
  }
  std::sort(out.flags.begin(), out.flags.end(), flag_order);
  std::sort(out.skipped_premises.begin(), out.skipped_premises.end());
  return out;
}

std::vector<OutlierFlag> merge_flags(const std::vector<OutlierFlag>& geographic,
                                     const std::vector<OutlierFlag>& electrical) {
  std::map<std::string, OutlierFlag> merged;
  for (const auto& f : geographic) merged[f.premise_id] = f;
  for (const auto& f : electrical) {
    auto [it, fresh] = merged.try_emplace(f.premise_id, f);
    if (!fresh) it->second.reason = FlagReason::both;
  }
  std::vector<OutlierFlag> out;
  out.reserve(merged.size());
  for (auto& [_, f] : merged) out.push_back(std::move(f));
  return out;
}

void write_flags_csv(std::ostream& out, const std::vector<OutlierFlag>& flags) {
  write_csv_row(out, {"PREMISE_ID", "XFMR", "NEAREST_XFMR", "DIST_M", "NEAREST_DIST_M", "RATIO",
                      "REASON"});
  for (const auto& f : flags)
    write_csv_row(out, {f.premise_id, f.transformer, f.nearest_transformer, fmt_double(f.dist_m),
                        fmt_double(f.nearest_dist_m), fmt_double(f.ratio), reason_name(f.reason)});
}

std::vector<OutlierFlag> read_flags_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  std::size_t c_id = t.require("PREMISE_ID", path);
  std::size_t c_tx = t.require("XFMR", path);
  std::size_t c_near = t.require("NEAREST_XFMR", path);
  std::size_t c_d = t.require("DIST_M", path);
  std::size_t c_nd = t.require("NEAREST_DIST_M", path);
  std::size_t c_r = t.require("RATIO", path);
  std::size_t c_why = t.require("REASON", path);
  auto num = [](const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    auto v = parse_double_cell(s);
    return v ? *v : kMissing;
  };
  std::vector<OutlierFlag> out;
  for (const auto& row : t.rows) {
    OutlierFlag f;
    f.premise_id = row.at(c_id);
    f.transformer = row.at(c_tx);
    f.nearest_transformer = row.at(c_near);
    f.dist_m = num(row.at(c_d));
    f.nearest_dist_m = num(row.at(c_nd));
    f.ratio = num(row.at(c_r));
    const std::string& why = row.at(c_why);
    if (why == "geographic")
      f.reason = FlagReason::geographic;
    else if (why == "electrical")
      f.reason = FlagReason::electrical;
    else if (why == "both")
      f.reason = FlagReason::both;
    else
      throw DataError(path + ": unknown flag reason '" + why + "'");
    out.push_back(std::move(f));
  }
  return out;
}

nlohmann::ordered_json flags_to_json(const std::vector<OutlierFlag>& flags) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& f : flags) {
    nlohmann::ordered_json j;
    j["premise_id"] = f.premise_id;
    j["transformer"] = f.transformer;
    j["nearest_transformer"] = f.nearest_transformer;
    j["dist_m"] = fmt_double(f.dist_m);
    j["nearest_dist_m"] = fmt_double(f.nearest_dist_m);
    j["ratio"] = fmt_double(f.ratio);
    j["reason"] = reason_name(f.reason);
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace gridtopo::detect
