#include "gridtopo/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "gridtopo/csv.hpp"
#include "gridtopo/error.hpp"
#include "gridtopo/timeutil.hpp"

namespace gridtopo::ingest {
namespace {

const std::string& cell(const std::vector<std::string>& row, std::size_t i) {
  static const std::string empty;
  return i < row.size() ? row[i] : empty;
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// empty -> nullopt; non-empty garbage -> DataError
std::optional<double> strict_opt(const std::string& s, const std::string& what) {
  if (blank(s)) return std::nullopt;
  auto v = parse_double_cell(s);
  if (!v) throw DataError("unparseable " + what + ": '" + s + "'");
  return v;
}

template <typename T>
void reject_duplicates(const std::vector<T>& records, const std::string& what) {
  std::map<std::string, int> seen;
  for (const auto& r : records) ++seen[r.id];
  std::string dupes;
  for (const auto& [id, n] : seen)
    if (n > 1) dupes += (dupes.empty() ? "" : ", ") + id;
  if (!dupes.empty()) throw DataError("duplicate " + what + " id(s): " + dupes);
}

}  // namespace

AssetLoad load_assets(const std::string& meters_csv, const std::string& transformers_csv) {
  AssetLoad out;

  {
    CsvTable t = read_csv(transformers_csv);
    std::size_t c_id = t.require("XFMR", transformers_csv);
    std::size_t c_lat = t.require("LAT", transformers_csv);
    std::size_t c_lon = t.require("LON", transformers_csv);
    std::size_t c_kva = t.require("RATED_KVA", transformers_csv);
    std::size_t c_ph = t.require("PHASE", transformers_csv);
    for (const auto& row : t.rows) {
      TransformerRecord rec;
      rec.id = cell(row, c_id);
      if (rec.id.empty()) throw DataError(transformers_csv + ": row with empty XFMR");
      auto lat = strict_opt(cell(row, c_lat), "transformer latitude");
      auto lon = strict_opt(cell(row, c_lon), "transformer longitude");
      if (!lat || !lon)
        throw DataError(transformers_csv + ": transformer " + rec.id + " has no coordinates");
      rec.location = {*lat, *lon};
      if (!geo_valid(rec.location))
        throw DataError(transformers_csv + ": transformer " + rec.id + " coordinates out of range");
      rec.rated_kva = strict_opt(cell(row, c_kva), "rating");
      if (!rec.rated_kva)
        out.warnings.push_back("transformer " + rec.id + ": unknown rating");
      else if (*rec.rated_kva <= 0.0)
        throw DataError(transformers_csv + ": transformer " + rec.id + " has non-positive rating");
      auto phase = PhaseLabel::parse(cell(row, c_ph));
      if (!phase)
        throw DataError(transformers_csv + ": transformer " + rec.id + " has bad phase '" +
                        cell(row, c_ph) + "'");
      rec.phase = *phase;
      out.topology.transformers.push_back(rec);
    }
    reject_duplicates(out.topology.transformers, "transformer");
  }

  {
    CsvTable t = read_csv(meters_csv);
    std::size_t c_id = t.require("ENDPOINTID", meters_csv);
    std::size_t c_tx = t.require("XFMR", meters_csv);
    std::size_t c_lat = t.require("LAT", meters_csv);
    std::size_t c_lon = t.require("LON", meters_csv);
    std::size_t c_addr = t.require("ADDRESS", meters_csv);
    std::size_t c_ph = t.require("PHASE", meters_csv);
    std::size_t c_nom = t.require("NOMINAL_V", meters_csv);
    for (const auto& row : t.rows) {
      PremiseRecord rec;
      rec.id = cell(row, c_id);
      if (rec.id.empty()) throw DataError(meters_csv + ": row with empty ENDPOINTID");

      // lenient on premise coordinates: bad cells load as absent + flagged
      const std::string& lat_s = cell(row, c_lat);
      const std::string& lon_s = cell(row, c_lon);
      auto lat = parse_double_cell(lat_s);
      auto lon = parse_double_cell(lon_s);
      if (lat && lon && geo_valid({*lat, *lon})) {
        rec.location = GeoPoint{*lat, *lon};
      } else {
        out.premises_missing_location.push_back(rec.id);
        if (!blank(lat_s) || !blank(lon_s))
          out.warnings.push_back("premise " + rec.id + ": unparseable coordinates ('" + lat_s +
                                 "','" + lon_s + "')");
      }

      rec.address = cell(row, c_addr);
      auto phase = PhaseLabel::parse(cell(row, c_ph));
      if (!phase)
        throw DataError(meters_csv + ": premise " + rec.id + " has bad phase '" +
                        cell(row, c_ph) + "'");
      rec.phase = *phase;

      const std::string& nom_s = cell(row, c_nom);
      auto nom = parse_double_cell(nom_s);
      if (nom) {
        if (*nom <= 0.0)
          throw DataError(meters_csv + ": premise " + rec.id + " has non-positive nominal");
        rec.nominal_voltage = nom;
      } else if (!blank(nom_s)) {
        out.warnings.push_back("premise " + rec.id + ": unparseable nominal '" + nom_s + "'");
      }

      const std::string& tx = cell(row, c_tx);
      if (tx.empty()) throw DataError(meters_csv + ": premise " + rec.id + " has empty XFMR");
      out.topology.premises.push_back(rec);
      out.topology.edges[rec.id] = tx;
    }
    reject_duplicates(out.topology.premises, "premise");
  }

  for (const auto& [pid, tid] : out.topology.edges) {
    bool known = std::any_of(out.topology.transformers.begin(), out.topology.transformers.end(),
                             [&](const TransformerRecord& t) { return t.id == tid; });
    if (!known)
      throw DataError(meters_csv + ": premise " + pid + " references unknown transformer " + tid);
  }

  out.topology.finalize();
  out.topology.validate();
  std::sort(out.premises_missing_location.begin(), out.premises_missing_location.end());
  return out;
}

SeriesFrame load_series(const std::string& series_csv, std::int64_t expected_interval_s) {
  if (expected_interval_s < 1) throw ConfigError("expected interval must be positive");
  CsvTable t = read_csv(series_csv);
  std::size_t c_id = t.require("ENDPOINTID", series_csv);
  std::size_t c_ts = t.require("TIMESTAMP", series_csv);
  std::size_t c_va = t.require("VA", series_csv);
  std::size_t c_vb = t.require("VB", series_csv);
  std::size_t c_vc = t.require("VC", series_csv);
  std::size_t c_p = t.require("P_KW", series_csv);
  std::size_t c_q = t.require("Q_KVAR", series_csv);
  if (t.rows.empty()) throw DataError(series_csv + ": no data rows");

  std::vector<std::int64_t> epochs(t.rows.size());
  std::int64_t t0 = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    auto e = parse_rfc3339(cell(t.rows[i], c_ts));
    if (!e) throw DataError(series_csv + ": bad timestamp '" + cell(t.rows[i], c_ts) + "'");
    epochs[i] = *e;
    if (i == 0 || epochs[i] < t0) t0 = epochs[i];
  }

  // snap every timestamp to the grid anchored at the earliest one
  constexpr std::int64_t kSnapTolerance = 60;
  std::vector<std::size_t> slots(t.rows.size());
  std::size_t max_slot = 0;
  std::string offenders;
  int offender_count = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::int64_t delta = epochs[i] - t0;
    std::int64_t slot = (delta + expected_interval_s / 2) / expected_interval_s;
    std::int64_t residual = delta - slot * expected_interval_s;
    if (residual < -kSnapTolerance || residual > kSnapTolerance) {
      if (offender_count < 10)
        offenders += (offenders.empty() ? "" : ", ") + format_rfc3339(epochs[i]);
      ++offender_count;
      continue;
    }
    slots[i] = static_cast<std::size_t>(slot);
    max_slot = std::max(max_slot, slots[i]);
  }
  if (offender_count > 0)
    throw DataError(series_csv + ": " + std::to_string(offender_count) +
                    " timestamp(s) off the " + std::to_string(expected_interval_s) +
                    " s grid: " + offenders);

  SeriesFrame frame;
  frame.timestamps.resize(max_slot + 1);
  for (std::size_t s = 0; s <= max_slot; ++s)
    frame.timestamps[s] = t0 + static_cast<std::int64_t>(s) * expected_interval_s;

  std::map<std::string, std::vector<bool>> seen;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const std::string& id = cell(row, c_id);
    if (id.empty()) throw DataError(series_csv + ": row with empty ENDPOINTID");
    auto [it, fresh] = frame.premises.try_emplace(id);
    if (fresh) {
      it->second.va.assign(max_slot + 1, kMissing);
      it->second.vb.assign(max_slot + 1, kMissing);
      it->second.vc.assign(max_slot + 1, kMissing);
      it->second.p_kw.assign(max_slot + 1, kMissing);
      it->second.q_kvar.assign(max_slot + 1, kMissing);
      seen[id].assign(max_slot + 1, false);
    }
    std::vector<bool>& mask = seen[id];
    std::size_t s = slots[i];
    if (mask[s])
      throw DataError(series_csv + ": duplicate sample for " + id + " at " +
                      format_rfc3339(frame.timestamps[s]));
    mask[s] = true;

    auto put = [&](std::vector<double>& chan, std::size_t col, const char* what) {
      auto v = strict_opt(cell(row, col), what);
      if (v) chan[s] = *v;
    };
    put(it->second.va, c_va, "VA");
    put(it->second.vb, c_vb, "VB");
    put(it->second.vc, c_vc, "VC");
    put(it->second.p_kw, c_p, "P_KW");
    put(it->second.q_kvar, c_q, "Q_KVAR");
  }
  return frame;
}

std::vector<OutageRecord> load_outages(const std::string& outages_csv) {
  CsvTable t = read_csv(outages_csv);
  std::size_t c_id = t.require("PREMISE_ID", outages_csv);
  std::size_t c_start = t.require("START", outages_csv);
  std::size_t c_rest = t.require("RESTORED", outages_csv);
  std::vector<OutageRecord> out;
  for (const auto& row : t.rows) {
    OutageRecord rec;
    rec.premise_id = cell(row, c_id);
    if (rec.premise_id.empty()) throw DataError(outages_csv + ": row with empty PREMISE_ID");
    auto start = parse_rfc3339(cell(row, c_start));
    auto restored = parse_rfc3339(cell(row, c_rest));
    if (!start || !restored)
      throw DataError(outages_csv + ": bad instant for premise " + rec.premise_id);
    rec.start = *start;
    rec.restored = *restored;
    if (rec.restored < rec.start)
      throw DataError(outages_csv + ": premise " + rec.premise_id + " restored before start");
    out.push_back(rec);
  }
  std::sort(out.begin(), out.end(), [](const OutageRecord& a, const OutageRecord& b) {
    return std::tie(a.premise_id, a.start) < std::tie(b.premise_id, b.start);
  });
  return out;
}

void apply_outages(SeriesFrame& frame, const std::vector<OutageRecord>& outages) {
  auto blank = [](std::vector<double>& v, std::size_t t) {
    if (t < v.size()) v[t] = kMissing;
  };
  for (const auto& o : outages) {
    auto it = frame.premises.find(o.premise_id);
    if (it == frame.premises.end()) continue;
    for (std::size_t t = 0; t < frame.size(); ++t) {
      if (frame.timestamps[t] < o.start || frame.timestamps[t] >= o.restored) continue;
      blank(it->second.va, t);
      blank(it->second.vb, t);
      blank(it->second.vc, t);
      blank(it->second.p_kw, t);
      blank(it->second.q_kvar, t);
    }
  }
}

void write_series_csv(std::ostream& out, const SeriesFrame& frame) {
  write_csv_row(out, {"ENDPOINTID", "TIMESTAMP", "VA", "VB", "VC", "P_KW", "Q_KVAR"});
  auto cell = [](const std::vector<double>& v, std::size_t t) {
    return t < v.size() ? fmt_double(v[t]) : std::string();
  };
  for (const auto& [pid, ch] : frame.premises) {
    for (std::size_t t = 0; t < frame.size(); ++t) {
      write_csv_row(out, {pid, format_rfc3339(frame.timestamps[t]), cell(ch.va, t),
                          cell(ch.vb, t), cell(ch.vc, t), cell(ch.p_kw, t),
                          cell(ch.q_kvar, t)});
    }
  }
}

std::map<std::string, std::string> load_edges(const std::string& truth_csv) {
  CsvTable t = read_csv(truth_csv);
  std::size_t c_id = t.require("ENDPOINTID", truth_csv);
  std::size_t c_tx = t.require("XFMR", truth_csv);
  std::map<std::string, std::string> edges;
  for (const auto& row : t.rows) {
    const std::string& id = cell(row, c_id);
    if (id.empty()) throw DataError(truth_csv + ": row with empty ENDPOINTID");
    if (!edges.emplace(id, cell(row, c_tx)).second)
      throw DataError(truth_csv + ": duplicate premise " + id);
  }
  return edges;
}

}  // namespace gridtopo::ingest
