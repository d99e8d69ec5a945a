#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "gridtopo/model.hpp"
#include "json.hpp"

namespace gridtopo::detect {

enum class FlagReason { geographic, electrical, both };

std::string reason_name(FlagReason r);

// Distances are NaN when the premise has no usable location.
struct OutlierFlag {
  std::string premise_id;
  std::string transformer;          // as recorded
  std::string nearest_transformer;  // empty when location is unknown
  double dist_m = 0.0;
  double nearest_dist_m = 0.0;
  double ratio = 0.0;  // dist_m / nearest_dist_m, +inf when nearest is 0
  FlagReason reason = FlagReason::geographic;
};

struct NearestResult {
  std::string id;
  double dist_m = 0.0;
};

// Smallest id wins a distance tie. StructuralError when the topology has no
// transformers; the PremiseRecord overload throws UnresolvableError when the
// premise has no location.
NearestResult nearest_transformer(const Topology& topology, const GeoPoint& point);
NearestResult nearest_transformer(const Topology& topology, const PremiseRecord& premise);

struct GeoFlagOutcome {
  std::vector<OutlierFlag> flags;    // sorted by premise id
  std::vector<std::string> skipped;  // no location or no assignment
};

// Flags premises whose recorded transformer is more than tau times farther
// away than the nearest one. tau must exceed 1 (ratio 1 is a perfect record).
GeoFlagOutcome flag_geographic(const Topology& topology, double tau = 3.0);

struct ElectricalFlagOutcome {
  std::vector<OutlierFlag> flags;
  std::vector<std::string> skipped_premises;  // no voltage data to correlate
  std::vector<std::string> skipped_groups;    // fewer than two members with data
};

// Flags a premise when its voltage correlates below epsilon with every
// cohort member it can be compared against (at least min_overlap shared
// samples). Premises with nothing to compare against are skipped, never
// flagged.
ElectricalFlagOutcome flag_electrical(const Topology& topology, const SeriesFrame& series,
                                      double epsilon = 0.5, std::size_t min_overlap = 96);

// Union keyed by premise id; a premise present on both sides keeps the
// geographic numbers and gets reason=both. Sorted by premise id.
std::vector<OutlierFlag> merge_flags(const std::vector<OutlierFlag>& geographic,
                                     const std::vector<OutlierFlag>& electrical);

void write_flags_csv(std::ostream& out, const std::vector<OutlierFlag>& flags);
std::vector<OutlierFlag> read_flags_csv(const std::string& path);
nlohmann::ordered_json flags_to_json(const std::vector<OutlierFlag>& flags);

}  // namespace gridtopo::detect
