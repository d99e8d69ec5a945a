#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gridtopo/model.hpp"
#include "gridtopo/reconnect.hpp"
#include "json.hpp"

namespace gridtopo::confidence {

struct DbiResult {
  double value = 0.0;
  bool infinite = false;  // coincident centroids somewhere
};

// Davies-Bouldin index: mean over clusters of the worst (S_i + S_j) / d(c_i,
// c_j). Needs at least two non-empty clusters (StructuralError otherwise);
// coincident centroids surface as the infinite flag, not an exception.
DbiResult dbi(const std::vector<std::vector<std::vector<double>>>& clusters);

// sigma(ln(dbi_false / dbi_true)), computed as the equivalent ratio
// dbi_false / (dbi_true + dbi_false). Inputs floored at 1e-12 and capped at
// 1e12 so infinite-DBI flags stay representable.
double score_dbi(double dbi_true, double dbi_false);

// sigma(corr_ours / corr_false) with both correlations clipped to [0,1]
// first and corr_false floored at 1e-12.
double score_corr(double corr_ours, double corr_false);

// w_dbi * s_dbi + w_corr * s_corr; weights must be non-negative and sum to 1.
double confidence_level(double s_dbi, double s_corr, double w_dbi = 0.7, double w_corr = 0.3);

struct FalsifyOptions {
  enum class Aggregate { minimum, mean };
  Aggregate aggregate = Aggregate::minimum;  // strongest rival by default
  double w_dbi = 0.7;
  double w_corr = 0.3;
  std::size_t min_overlap = 96;
  void validate() const;
};

struct ConfidenceBreakdown {
  std::string premise_id;
  std::string old_transformer;
  std::string new_transformer;
  double dbi_true = 0.0;
  double dbi_false = 0.0;
  bool dbi_infinite = false;  // either side hit coincident centroids
  double corr_ours = 0.0;
  double corr_false = 0.0;
  double score_dbi = 0.0;
  double score_corr = 0.0;
  double level = 0.0;
  std::vector<std::string> falsified_against;
};

// Tries to knock the reassignment over: recluster with the outlier forced
// into each rival transformer's group and keep the strongest rival DBI.
// Clusters are the candidate transformers' member groups under the
// pre-reassignment edges, built from `features` (the z-scored vectors used
// for reconnection, outlier included). Rivals without members are skipped;
// all rivals empty -> UnresolvableError.
ConfidenceBreakdown falsify(const reconnect::Reassignment& move,
                            const reconnect::CandidateSet& candidates,
                            const std::vector<reconnect::FeatureVector>& features,
                            const SeriesFrame& series, const Topology& topology,
                            const FalsifyOptions& options = {});

struct RankedEntry {
  ConfidenceBreakdown breakdown;
  bool needs_review = false;
};

// Descending by level, ties by premise id; entries under the threshold get
// the review tag.
std::vector<RankedEntry> rank_report(std::vector<ConfidenceBreakdown> breakdowns,
                                     double review_threshold = 0.5);

void write_confidence_csv(std::ostream& out, const std::vector<RankedEntry>& entries);
nlohmann::ordered_json confidence_to_json(const std::vector<RankedEntry>& entries);

}  // namespace gridtopo::confidence
