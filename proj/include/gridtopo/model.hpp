#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridtopo/geo.hpp"
#include "gridtopo/stats.hpp"

namespace gridtopo {

struct PhaseLabel {
  bool has_a = false;
  bool has_b = false;
  bool has_c = false;

  bool any() const { return has_a || has_b || has_c; }
  std::string str() const;
  static std::optional<PhaseLabel> parse(const std::string& text);
};

struct PremiseRecord {
  std::string id;  // opaque key (never parsed for meaning)
  std::optional<GeoPoint> location;
  std::string address;
  PhaseLabel phase;
  std::optional<double> nominal_voltage;  // volts per phase, > 0 when present
};

struct TransformerRecord {
  std::string id;
  GeoPoint location;
  std::optional<double> rated_kva;  // > 0 when present
  PhaseLabel phase;
};

// Radial secondary topology: each connected premise maps to exactly one
// transformer. The medium-voltage backbone is not modeled.
struct Topology {
  std::vector<PremiseRecord> premises;        // sorted by id
  std::vector<TransformerRecord> transformers;  // sorted by id
  std::map<std::string, std::string> edges;   // premise id -> transformer id

  const PremiseRecord* premise(const std::string& id) const;
  const TransformerRecord* transformer(const std::string& id) const;

  // Sorts the record vectors; call after bulk construction.
  void finalize();
  // Throws StructuralError when an invariant is broken (dangling edge
  // endpoint, duplicate id, invalid coordinates, non-positive rating).
  void validate() const;
};

// Per-premise measurement channels aligned to the frame timestamps.
// NaN marks a missing sample. A voltage channel that is entirely missing is
// treated as absent.
struct ChannelSet {
  std::vector<double> va;
  std::vector<double> vb;
  std::vector<double> vc;
  std::vector<double> p_kw;
  std::vector<double> q_kvar;
};

struct SeriesFrame {
  std::vector<std::int64_t> timestamps;  // unix seconds, strictly increasing, fixed step
  std::map<std::string, ChannelSet> premises;

  std::size_t size() const { return timestamps.size(); }
  const ChannelSet* channels(const std::string& premise_id) const;
};

// Preferred voltage channel: phase A when it has data, else the first channel
// with any non-missing sample. nullptr when the premise has no voltage data.
const std::vector<double>* primary_voltage(const ChannelSet& ch);

bool has_data(const std::vector<double>& channel);

struct ConstraintSet {
  double v_min = 0.0;         // volts per phase
  double v_max = 0.0;
  double power_factor = 0.8;  // (0, 1]
  std::map<std::string, double> rated_kva_override;

  // +/-5% service band around a nominal voltage.
  static ConstraintSet for_nominal(double v_nom, double power_factor = 0.8);
  void validate() const;  // throws ConfigError
};

// Known interruption window for one premise. Samples inside [start, restored)
// are untrustworthy and treated as missing.
struct OutageRecord {
  std::string premise_id;
  std::int64_t start = 0;     // unix seconds
  std::int64_t restored = 0;  // first good instant
};

// Preimage of the edge map: transformer id -> connected premise ids (sorted).
// Every transformer in the topology appears; unused ones map to empty lists.
std::map<std::string, std::vector<std::string>> group_by_transformer(const Topology& topology);

struct EdgeDiff {
  std::string premise_id;
  std::string transformer_a;  // empty when unconnected in a
  std::string transformer_b;
};

// Premises whose assigned transformer differs between a and b, sorted by
// premise id. Throws StructuralError when the premise sets differ.
std::vector<EdgeDiff> diff_topologies(const Topology& a, const Topology& b);

// 1 - |diff| / |premises|.
double topology_accuracy(const Topology& truth, const Topology& estimate);

}  // namespace gridtopo
