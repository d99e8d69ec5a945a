#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridtopo/confidence.hpp"
#include "gridtopo/model.hpp"
#include "json.hpp"

namespace gridtopo::validate {

struct ApparentPower {
  std::vector<double> kva;       // per timestamp, missing samples count as 0
  std::vector<double> coverage;  // fraction of members with real power present
};

// Sum over members of sqrt(P^2 + Q^2). An empty group yields zeros.
ApparentPower aggregate_apparent_power(const std::vector<std::string>& group,
                                       const SeriesFrame& series);

enum class ViolationKind { capacity, voltage_range };
std::string kind_name(ViolationKind k);

struct Violation {
  std::string id;  // transformer for capacity, premise for voltage_range
  ViolationKind kind = ViolationKind::capacity;
  double observed = 0.0;
  double limit = 0.0;
  std::string unit;
  std::vector<std::int64_t> timestamps;  // offending instants
  // capacity only:
  std::optional<double> rating_kva;
  std::optional<double> peak_kva;
  bool apparent_exceeds_rating = false;
};

struct CapacityRow {
  std::string id;
  double rating_kva = 0.0;
  double peak_kw = 0.0;
  double limit_kw = 0.0;
  bool violation = false;
};

struct CapacityOutcome {
  std::vector<Violation> violations;
  std::vector<CapacityRow> table;    // every rated transformer, by id
  std::vector<std::string> skipped;  // rating unknown
};

// A transformer violates capacity when its group's peak real power exceeds
// rated_kva * power_factor (strict). Ratings come from the records unless
// overridden in the constraints. Aggregate apparent power beyond the rating
// itself is annotated on the violation.
CapacityOutcome check_capacity(const Topology& topology, const SeriesFrame& series,
                               const ConstraintSet& constraints);

struct VoltageRangeConfig {
  std::optional<double> v_min;  // explicit band in volts; otherwise derived
  std::optional<double> v_max;  //   from the premise nominal
  double band_fraction = 0.05;
  std::size_t persistence = 4;  // consecutive out-of-band samples required
  void validate() const;
};

// Raw-voltage screen: a premise violates when it spends at least
// `persistence` consecutive samples outside its band. Missing samples break
// a run. Premises with neither an explicit band nor a nominal are skipped.
std::vector<Violation> check_voltage_range(const SeriesFrame& series,
                                           const std::vector<PremiseRecord>& premises,
                                           const std::map<std::string, double>& nominal,
                                           const VoltageRangeConfig& config = {});

struct RefinementMove {
  std::string premise_id;
  std::string from_transformer;
  std::string to_transformer;
};

struct RefinementOutcome {
  Topology topology;
  std::vector<RefinementMove> moves;
  std::vector<std::string> unresolved;  // transformers still overloaded
};

struct RefineConfig {
  std::size_t k = 2;  // candidate transformers per premise
  std::size_t mi_bins = 16;
  std::size_t min_overlap = 96;
};

// Walks overloaded transformers worst-first, moving their least-trusted
// premises to the best-correlated candidate that stays within its own limit.
// Moves never create a new violation; transformers that cannot be fixed are
// reported unresolved.
RefinementOutcome refine_overload(const Topology& topology, const SeriesFrame& series,
                                  const ConstraintSet& constraints,
                                  const std::vector<confidence::RankedEntry>& report,
                                  const RefineConfig& config = {});

void write_capacity_csv(std::ostream& out, const std::vector<CapacityRow>& table);
nlohmann::ordered_json violations_to_json(const std::vector<Violation>& violations);
nlohmann::ordered_json capacity_table_to_json(const std::vector<CapacityRow>& table);

}  // namespace gridtopo::validate
