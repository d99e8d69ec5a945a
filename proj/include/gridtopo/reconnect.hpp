#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridtopo/kmeans.hpp"
#include "gridtopo/model.hpp"
#include "json.hpp"

namespace gridtopo::reconnect {

struct FeatureVector {
  std::string premise_id;
  std::vector<double> values;  // voltage samples then latitude, longitude
};

struct CandidateSet {
  std::string outlier;
  std::vector<std::string> transformers;  // nearest first, recorded one always present
  std::vector<std::string> premises;      // their members, outlier excluded, sorted
};

// The k nearest transformers to the outlier plus its recorded one. k must be
// at least 2; UnresolvableError without an outlier location, StructuralError
// when the topology cannot supply k transformers.
CandidateSet build_candidates(const Topology& topology, const std::string& outlier_id,
                              std::size_t k = 2);

struct FeaturizeOutcome {
  std::vector<FeatureVector> features;  // input order, minus exclusions
  std::vector<std::string> excluded;    // no voltage data or no location
};

// Missing samples are filled with the premise mean, then every dimension is
// z-scored across the given set (constant dimensions become zero).
FeaturizeOutcome featurize(const Topology& topology, const std::vector<std::string>& premise_ids,
                           const SeriesFrame& series);

enum class Method { kmeans, mutual_information };
std::string method_name(Method m);

struct Reassignment {
  std::string premise_id;
  std::string old_transformer;
  std::string new_transformer;
  Method method = Method::kmeans;
  std::size_t cluster_index = 0;  // meaningful for kmeans only
};

struct ReconnectConfig {
  std::size_t k = 2;  // candidate transformer count
  std::size_t restarts = 10;
  std::size_t max_iter = 100;
  std::size_t mi_bins = 16;
  std::size_t min_overlap = 96;
  bool mi_only = false;
  std::uint64_t seed = 1;
  void validate() const;
};

// Picks the candidate transformer owning the biggest share of the cluster.
// `cluster` holds premise ids, outlier included. Ties go to the transformer
// nearest the cluster's mean location, then the smaller id. nullopt when no
// candidate transformer has a member in the cluster.
std::optional<std::string> pair_cluster_transformer(const Topology& topology,
                                                    const CandidateSet& candidates,
                                                    const std::vector<std::string>& cluster);

// Pairwise-complete mutual information in nats; DataError when fewer than
// min_overlap shared samples exist.
double mutual_information(std::span<const double> x, std::span<const double> y,
                          std::size_t bins = 16, std::size_t min_overlap = 96);

// Highest mean mutual information against each candidate's members; ties by
// distance then id. UnresolvableError when nothing can be evaluated.
Reassignment reconnect_mi(const Topology& topology, const SeriesFrame& series,
                          const CandidateSet& candidates, std::size_t bins = 16,
                          std::size_t min_overlap = 96);

// Clusters the candidate premises (as many clusters as candidate
// transformers) and reattaches the outlier to the transformer paired with
// its cluster. Falls back to mutual information when the cluster pairs with
// nobody. UnresolvableError when the outlier itself cannot be featurized.
Reassignment reconnect_kmeans(const Topology& topology, const SeriesFrame& series,
                              const CandidateSet& candidates, const ReconnectConfig& config);

// Dispatch on config.mi_only.
Reassignment reconnect(const Topology& topology, const SeriesFrame& series,
                       const CandidateSet& candidates, const ReconnectConfig& config);

void write_reassignments_csv(std::ostream& out, const std::vector<Reassignment>& moves);
std::vector<Reassignment> read_reassignments_csv(const std::string& path);
nlohmann::ordered_json reassignments_to_json(const std::vector<Reassignment>& moves);

}  // namespace gridtopo::reconnect
