#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridtopo/model.hpp"
#include "json.hpp"

namespace gridtopo::preprocess {

struct PreprocessConfig {
  double min_completeness = 0.9;    // fraction of voltage samples present
  double iqr_k = 1.5;               // fence multiplier
  int flatline_window = 4;          // must be >= 2; kept for tuning symmetry
  double flatline_epsilon_pu = 1e-4;
  bool enable_range_screen = true;
  bool enable_iqr = true;
  bool enable_flatline = true;
  void validate() const;  // ConfigError on out-of-range knobs
};

struct CleaningReport {
  std::vector<std::string> dropped_incomplete;
  std::vector<std::string> dropped_flatline;
  std::map<std::string, std::size_t> samples_removed_range;
  std::map<std::string, std::size_t> samples_removed_iqr;
  std::map<std::string, double> inferred_nominal;
  std::vector<std::string> nominal_unresolved;
  std::vector<std::string> warnings;
};

nlohmann::ordered_json to_json(const CleaningReport& report);

struct IqrOutcome {
  std::vector<double> values;  // input with outliers blanked to missing
  std::size_t removed = 0;
  bool warning = false;  // fewer than 4 usable samples, nothing filtered
};

// Tukey fences [Q1 - k*IQR, Q3 + k*IQR]; quartiles by linear interpolation
// over the sorted non-missing samples. Filtered samples become missing, the
// vector keeps its length.
IqrOutcome iqr_filter(std::span<const double> x, double k = 1.5);

// Mode of the neighbors' known nominals. Ties break to the value held by the
// geographically nearest neighbor (no location sorts last), then to the
// smaller voltage. UnresolvableError when no neighbor knows its nominal.
double infer_nominal(const PremiseRecord& premise,
                     const std::vector<const PremiseRecord*>& neighbors);

struct NominalResolution {
  std::map<std::string, double> nominal;   // every resolved premise
  std::map<std::string, double> inferred;  // the subset that was filled in
  std::vector<std::string> unresolved;
};

// Recorded nominal wins. Otherwise infer from same-transformer neighbors,
// falling back to the 10 nearest premises with a known nominal. Premises that
// still cannot be resolved land in `unresolved`.
NominalResolution resolve_nominals(const Topology& topology);

// Divides voltage channels by the premise nominal (P/Q untouched, missing
// stays missing). Every premise in the frame must have a positive nominal;
// DataError otherwise.
void normalize_per_unit(SeriesFrame& frame, const std::map<std::string, double>& nominal);

struct CleanOutcome {
  SeriesFrame frame;
  CleaningReport report;
  std::map<std::string, double> nominal;  // volts, per surviving premise
};

// Full cleaning pass: resolve nominals, screen raw voltages against the
// plausibility band, normalize to per-unit, drop incomplete records, IQR
// filter each voltage channel, drop flatlined premises. The screen band per
// premise is `band` when given, else nominal +/- 5%.
CleanOutcome clean(const Topology& topology, const SeriesFrame& frame,
                   const PreprocessConfig& config = {},
                   const std::optional<ConstraintSet>& band = std::nullopt);

}  // namespace gridtopo::preprocess
