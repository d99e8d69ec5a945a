#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "gridtopo/model.hpp"

namespace gridtopo::ingest {

// Result of loading meters.csv + transformers.csv. The meters file carries
// the recorded premise->transformer edges, so a full Topology comes out.
struct AssetLoad {
  Topology topology;
  std::vector<std::string> premises_missing_location;  // candidates for geocoding
  std::vector<std::string> warnings;
};

// Schema: meters.csv `ENDPOINTID,XFMR,LAT,LON,ADDRESS,PHASE,NOMINAL_V`,
// transformers.csv `XFMR,LAT,LON,RATED_KVA,PHASE`. Missing required column
// -> SchemaError naming it. Duplicate ids -> DataError listing them. Edge to
// an unknown transformer -> DataError. Unparseable premise coordinates load
// as absent location and are flagged; unparseable transformer coordinates
// are an error (transformer positions anchor everything downstream).
AssetLoad load_assets(const std::string& meters_csv, const std::string& transformers_csv);

// Loads series.csv `ENDPOINTID,TIMESTAMP,VA,VB,VC,P_KW,Q_KVAR` onto a
// regular grid: the earliest timestamp anchors slot 0 and every timestamp
// must sit within +/-60 s of a multiple of expected_interval_s from there
// (offenders -> DataError listing them). Gaps between observed slots are
// filled with missing markers so the frame is equally spaced. Duplicate
// (id, slot) rows -> DataError. Non-empty cells that fail to parse ->
// DataError.
SeriesFrame load_series(const std::string& series_csv, std::int64_t expected_interval_s = 900);

// outages.csv `PREMISE_ID,START,RESTORED`, RFC 3339 instants,
// restored >= start enforced. Sorted by (premise, start).
std::vector<OutageRecord> load_outages(const std::string& outages_csv);

// Blanks every channel sample falling inside [start, restored) of an outage
// for its premise. Unknown premise ids are ignored.
void apply_outages(SeriesFrame& frame, const std::vector<OutageRecord>& outages);

// truth.csv `ENDPOINTID,XFMR` -> edge map (for accuracy scoring).
std::map<std::string, std::string> load_edges(const std::string& truth_csv);

// Inverse of load_series: every premise/slot pair is emitted (empty cells
// for missing samples) so the frame round-trips exactly, grid and all.
void write_series_csv(std::ostream& out, const SeriesFrame& frame);

}  // namespace gridtopo::ingest
