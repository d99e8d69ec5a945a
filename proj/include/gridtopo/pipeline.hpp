#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridtopo/confidence.hpp"
#include "gridtopo/geocode.hpp"
#include "gridtopo/model.hpp"
#include "gridtopo/preprocess.hpp"
#include "gridtopo/reconnect.hpp"
#include "gridtopo/validate.hpp"
#include "json.hpp"

namespace gridtopo::pipeline {

// Stage names in execution order; stop_after / resume_from take these.
const std::vector<std::string>& stage_names();

struct PipelineConfig {
  // inputs (file-based runs)
  std::string meters_csv;
  std::string transformers_csv;
  std::string series_csv;
  std::string outages_csv;  // optional
  std::string truth_csv;    // optional, enables the accuracy section
  std::int64_t interval_s = 900;

  // detection
  double tau = 3.0;
  double epsilon = 0.5;
  std::size_t min_overlap = 96;

  // reconnection
  std::size_t k = 2;
  std::size_t mi_bins = 16;
  bool mi_only = false;
  std::size_t kmeans_restarts = 10;
  std::size_t kmeans_max_iter = 100;

  // confidence
  double w_dbi = 0.7;
  double w_corr = 0.3;
  double review_threshold = 0.5;
  std::string dbi_false_aggregate = "min";  // or "mean"

  // physical validation
  double power_factor = 0.8;
  std::optional<double> v_min;  // explicit band in volts; default is
  std::optional<double> v_max;  //   nominal +/- 5% per premise
  std::size_t persistence = 4;

  preprocess::PreprocessConfig cleaning;

  // geocoding
  std::string geocoder = "none";  // none | fixture | http
  std::string fixture_table_csv;  // ADDRESS,LAT,LON
  double max_discrepancy_m = 500.0;
  ingest::HttpGeocoderConfig http;

  // execution
  std::uint64_t seed = 1;
  std::size_t parallelism = 1;
  bool emit_intermediate = false;
  std::string out_dir;      // required for file-based runs
  std::string stop_after;   // halt once this stage has run
  std::string resume_from;  // continue a stopped run at this stage

  void validate() const;  // ConfigError on anything out of range
};

// JSON config document; unknown keys are rejected so typos surface early.
PipelineConfig load_config(const std::string& path);

// The config as canonical JSON, staging controls excluded, so a resumed run
// can prove it continues the same analysis.
nlohmann::ordered_json config_fingerprint(const PipelineConfig& config);

// Topology artifact round-trip; JSON numbers survive parsing bit-exactly so
// staged and monolithic runs see identical coordinates.
nlohmann::ordered_json topology_json(const Topology& topology);
Topology topology_from_json(const nlohmann::ordered_json& j);

// Geocoder built from config ("none" leaves client null). The handle owns the
// backend and its cache; keep it alive for as long as the client is used.
struct GeocoderHandle {
  std::unique_ptr<ingest::GeocoderClient> backend;
  std::unique_ptr<ingest::GeocoderClient> cache;
  ingest::GeocoderClient* client = nullptr;
};
GeocoderHandle make_geocoder(const PipelineConfig& config);

struct PipelineInput {
  Topology topology;
  SeriesFrame series;  // raw volts and kW/kVAR
  std::vector<OutageRecord> outages;
  std::map<std::string, std::string> truth;  // empty when unknown
  std::vector<std::string> input_warnings;   // carried into the report
};

struct RunReport {
  nlohmann::ordered_json canonical;  // assembled by the report stage
  Topology final_topology;
  std::vector<reconnect::Reassignment> reassignments;
  std::vector<confidence::RankedEntry> confidence;
  std::vector<validate::Violation> violations_before;
  std::vector<validate::Violation> violations_after;
  std::vector<validate::CapacityRow> capacity_table;  // pre-refinement
  std::vector<validate::CapacityRow> capacity_after;
  std::vector<validate::RefinementMove> refinement_moves;
  std::vector<std::string> unresolved;  // transformers still overloaded
  std::optional<double> accuracy;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, double>> stage_seconds;  // not canonical
  std::string stopped_after;  // set when the run halted at stop_after
};

// In-memory run over all stages; no filesystem traffic. The geocoder is
// optional and only consulted when config.geocoder != "none".
RunReport run_on(PipelineInput input, const PipelineConfig& config,
                 ingest::GeocoderClient* geocoder = nullptr);

// File-based run honoring out_dir, emit_intermediate, stop_after and
// resume_from. Stage artifacts land in out_dir; a stopped run leaves
// state.json behind for the resume.
RunReport run_pipeline(const PipelineConfig& config);

// Canonical report document (timings excluded); byte-stable for a given
// config and seed.
nlohmann::ordered_json report_json(const RunReport& report);

struct KSweepRow {
  std::size_t k = 0;
  std::size_t reassignments = 0;
  double agreement = 1.0;  // vs the first k, over the union of moved premises
};

// Reruns the pipeline per k and reports how strongly the reassignment sets
// agree with the first entry's run.
std::vector<KSweepRow> k_sweep(const PipelineInput& input, PipelineConfig config,
                               const std::vector<std::size_t>& ks,
                               ingest::GeocoderClient* geocoder = nullptr);

}  // namespace gridtopo::pipeline
