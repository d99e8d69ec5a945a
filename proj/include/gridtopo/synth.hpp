#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridtopo/model.hpp"

namespace gridtopo::synth {

// Knobs for the synthetic feeder generator. Defaults give a hundred
// pole-top transformers on a jittered grid with tightly clustered service
// points, one week of 15 minute interval data, and a fifth of the premises
// recorded against the wrong transformer.
struct SynthConfig {
  std::uint64_t seed = 1;

  std::size_t n_transformers = 100;
  std::size_t premises_min = 10;  // per transformer, inclusive bounds
  std::size_t premises_max = 18;

  std::size_t n_steps = 672;
  std::int64_t step_seconds = 900;
  std::int64_t start_epoch = 1704067200;  // 2024-01-01T00:00:00Z

  double corruption_fraction = 0.2;

  // Target Pearson correlation between voltage series of premises on the
  // same transformer (intra) and on different transformers (inter).
  double intra_corr_target = 0.95;
  double inter_corr_target = 0.6;
  double sigma_v = 0.01;  // relative voltage noise scale
  double nominal_v = 240.0;

  double center_lat = 45.0;
  double center_lon = -122.0;
  double grid_spacing_m = 400.0;
  double coord_jitter_m = 50.0;
  double cluster_radius_m = 40.0;

  double default_rated_kva = 50.0;
  double peak_kw_min = 0.6;
  double peak_kw_max = 1.6;
  double load_power_factor = 0.95;

  double ar_phi = 0.85;           // AR(1) pole of the stochastic voltage parts
  double feeder_sin_share = 0.5;  // variance share of the diurnal component

  double missing_fraction = 0.0;            // per-sample dropout
  double missing_nominal_fraction = 0.0;    // premises without a recorded nominal
  double missing_location_fraction = 0.0;   // premises without coordinates

  std::size_t outage_count = 0;
  std::size_t outage_min_steps = 8;
  std::size_t outage_max_steps = 96;

  void validate() const;  // throws ConfigError
};

// One rewired service point: the physical transformer and the one the
// records claim.
struct CorruptionRecord {
  std::string premise_id;
  std::string true_transformer;
  std::string recorded_transformer;
};

// A deliberately overloaded transformer planted by generate_overload_scenario.
struct OverloadInfo {
  std::string transformer_id;
  double rating_kva = 0.0;
  double peak_kw_true = 0.0;       // with the physical membership
  double peak_kw_corrupted = 0.0;  // with the corrupted membership
  std::string moved_premise;
  std::string donor_transformer;
};

struct SynthBundle {
  SynthConfig config;
  Topology truth;      // physical connectivity
  Topology corrupted;  // what the records claim
  SeriesFrame series;
  ConstraintSet constraints;
  std::vector<OutageRecord> outages;
  std::vector<CorruptionRecord> corruption_log;  // equals diff(truth, corrupted)
  std::vector<OverloadInfo> overloads;
};

struct OverloadCase {
  double rating_kva = 10.0;
  double target_peak_kw = 11.32;  // corrupted-group peak after the move
  double native_peak_kw = 5.5;    // physical-group peak, kept under the limit
};

struct OverloadConfig {
  std::vector<OverloadCase> cases = {{10.0, 11.32, 5.5}, {15.0, 13.0, 9.0}};
};

// Deterministic in the seed: equal configs give byte-identical bundles,
// independent of platform or thread count.
SynthBundle generate(const SynthConfig& config);

// generate() plus planted capacity violations: for each case one premise is
// moved into a small transformer and load is rescaled so the corrupted group
// peaks at target_peak_kw while the physical group stays at native_peak_kw.
SynthBundle generate_overload_scenario(const SynthConfig& config,
                                       const OverloadConfig& overload = {});

// Writes meters.csv, transformers.csv, series.csv, outages.csv, truth.csv
// and manifest.json under dir (created if needed).
void export_bundle(const SynthBundle& bundle, const std::string& dir);

}  // namespace gridtopo::synth
