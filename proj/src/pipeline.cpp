#include "gridtopo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "gridtopo/csv.hpp"
#include "gridtopo/detect.hpp"
#include "gridtopo/error.hpp"
#include "gridtopo/ingest.hpp"
#include "gridtopo/parallel.hpp"
#include "gridtopo/rng.hpp"
#include "gridtopo/stats.hpp"
#include "gridtopo/timeutil.hpp"

namespace gridtopo::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

const std::vector<std::string> kStages = {"ingest",     "geocode",  "preprocess",
                                          "detect",     "reconnect", "confidence",
                                          "validate",   "refine",    "report"};

std::size_t stage_index(const std::string& name) {
  for (std::size_t i = 0; i < kStages.size(); ++i)
    if (kStages[i] == name) return i;
  throw ConfigError("unknown stage '" + name + "'");
}

double parse_back(const std::string& s) {
  return parse_double_cell(s).value_or(kMissing);
}

void write_text_file(const fs::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << body;
  if (!out) throw IoError("short write to " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

nlohmann::ordered_json topology_json(const Topology& t) {
  ordered_json j;
  j["premises"] = ordered_json::array();
  for (const auto& p : t.premises) {
    ordered_json e;
    e["id"] = p.id;
    if (p.location) {
      e["lat"] = p.location->lat;
      e["lon"] = p.location->lon;
    } else {
      e["lat"] = nullptr;
      e["lon"] = nullptr;
    }
    e["address"] = p.address;
    e["phase"] = p.phase.str();
    if (p.nominal_voltage)
      e["nominal_v"] = *p.nominal_voltage;
    else
      e["nominal_v"] = nullptr;
    j["premises"].push_back(std::move(e));
  }
  j["transformers"] = ordered_json::array();
  for (const auto& x : t.transformers) {
    ordered_json e;
    e["id"] = x.id;
    e["lat"] = x.location.lat;
    e["lon"] = x.location.lon;
    if (x.rated_kva)
      e["rated_kva"] = *x.rated_kva;
    else
      e["rated_kva"] = nullptr;
    e["phase"] = x.phase.str();
    j["transformers"].push_back(std::move(e));
  }
  j["edges"] = t.edges;
  return j;
}

Topology topology_from_json(const nlohmann::ordered_json& j) {
  Topology t;
  for (const auto& e : j.at("premises")) {
    PremiseRecord p;
    p.id = e.at("id").get<std::string>();
    if (!e.at("lat").is_null())
      p.location = GeoPoint{e.at("lat").get<double>(), e.at("lon").get<double>()};
    p.address = e.at("address").get<std::string>();
    p.phase = PhaseLabel::parse(e.at("phase").get<std::string>()).value();
    if (!e.at("nominal_v").is_null()) p.nominal_voltage = e.at("nominal_v").get<double>();
    t.premises.push_back(std::move(p));
  }
  for (const auto& e : j.at("transformers")) {
    TransformerRecord x;
    x.id = e.at("id").get<std::string>();
    x.location = GeoPoint{e.at("lat").get<double>(), e.at("lon").get<double>()};
    if (!e.at("rated_kva").is_null()) x.rated_kva = e.at("rated_kva").get<double>();
    x.phase = PhaseLabel::parse(e.at("phase").get<std::string>()).value();
    t.transformers.push_back(std::move(x));
  }
  for (const auto& [pid, tid] : j.at("edges").items())
    t.edges[pid] = tid.get<std::string>();
  t.finalize();
  return t;
}

namespace {

SeriesFrame load_series_artifact(const fs::path& path, std::int64_t interval_s) {
  CsvTable t = read_csv(path.string());
  if (t.rows.empty()) return SeriesFrame{};  // legal: everything was dropped
  return ingest::load_series(path.string(), interval_s);
}

struct Runner {
  PipelineConfig cfg;
  ingest::GeocoderClient* geocoder = nullptr;

  // working state, mutated stage by stage
  Topology topology;
  SeriesFrame raw;      // volts, outages applied
  SeriesFrame cleaned;  // per-unit
  std::map<std::string, double> nominal;
  std::map<std::string, std::string> truth;
  std::vector<std::string> input_warnings;
  std::vector<detect::OutlierFlag> flags;
  std::vector<std::string> outlier_ids;
  std::vector<reconnect::Reassignment> moves;  // actual changes only
  std::vector<confidence::RankedEntry> ranked;
  Topology updated;  // after reassignment
  validate::CapacityOutcome cap_before;
  std::vector<validate::Violation> volt_viol;
  validate::RefinementOutcome refinement;
  validate::CapacityOutcome cap_after;

  std::map<std::string, ordered_json> sections;
  std::vector<std::pair<std::string, double>> timings;

  ConstraintSet capacity_constraints() const {
    ConstraintSet cs;
    cs.v_min = cfg.v_min.value_or(1.0);
    cs.v_max = cfg.v_max.value_or(1e9);
    cs.power_factor = cfg.power_factor;
    return cs;
  }

  void stage_ingest() {
    ingest::apply_outages(raw, outages_);
    topology.validate();
    ordered_json j;
    j["premises"] = topology.premises.size();
    j["transformers"] = topology.transformers.size();
    j["series_premises"] = raw.premises.size();
    j["timesteps"] = raw.size();
    j["interval_s"] = cfg.interval_s;
    j["start"] = raw.size() ? format_rfc3339(raw.timestamps.front()) : "";
    j["end"] = raw.size() ? format_rfc3339(raw.timestamps.back()) : "";
    j["outages_applied"] = outages_.size();
    ordered_json missing = ordered_json::array();
    for (const auto& p : topology.premises)
      if (!p.location) missing.push_back(p.id);
    j["premises_missing_location"] = std::move(missing);
    j["warnings"] = input_warnings;
    sections["ingest"] = std::move(j);
  }

  void stage_geocode() {
    ordered_json j;
    if (cfg.geocoder == "none") {
      j["enabled"] = false;
      j["backend"] = "";
      j["filled"] = ordered_json::array();
      j["replaced"] = ordered_json::array();
      j["failed"] = ordered_json::array();
      sections["geocode"] = std::move(j);
      return;
    }
    if (!geocoder) throw ConfigError("geocoder '" + cfg.geocoder + "' requested but unavailable");
    ingest::RefineOutcome out = ingest::refine_locations(topology.premises, *geocoder,
                                                         cfg.max_discrepancy_m, cfg.parallelism);
    topology.premises = std::move(out.premises);
    topology.finalize();
    topology.validate();
    j["enabled"] = true;
    j["backend"] = geocoder->name();
    j["filled"] = out.filled;
    j["replaced"] = out.replaced;
    j["failed"] = out.failed;
    sections["geocode"] = std::move(j);
  }

  void stage_preprocess() {
    std::optional<ConstraintSet> band;
    if (cfg.v_min) {
      ConstraintSet cs;
      cs.v_min = *cfg.v_min;
      cs.v_max = *cfg.v_max;
      cs.power_factor = cfg.power_factor;
      band = cs;
    }
    preprocess::CleanOutcome out = preprocess::clean(topology, raw, cfg.cleaning, band);
    cleaned = std::move(out.frame);
    nominal = std::move(out.nominal);
    ordered_json j = preprocess::to_json(out.report);
    j["premises_kept"] = cleaned.premises.size();
    sections["preprocess"] = std::move(j);
  }

  void stage_detect() {
    detect::GeoFlagOutcome geo = detect::flag_geographic(topology, cfg.tau);
    detect::ElectricalFlagOutcome elec =
        detect::flag_electrical(topology, cleaned, cfg.epsilon, cfg.min_overlap);
    flags = detect::merge_flags(geo.flags, elec.flags);

    outlier_ids.clear();
    for (const auto& f : flags) outlier_ids.push_back(f.premise_id);

    std::size_t n_geo = 0, n_elec = 0, n_both = 0;
    for (const auto& f : flags) {
      if (f.reason == detect::FlagReason::geographic) ++n_geo;
      if (f.reason == detect::FlagReason::electrical) ++n_elec;
      if (f.reason == detect::FlagReason::both) ++n_both;
    }
    ordered_json j;
    j["flags"] = detect::flags_to_json(flags);
    j["geographic"] = n_geo;
    j["electrical"] = n_elec;
    j["both"] = n_both;
    j["skipped_no_geometry"] = geo.skipped;
    j["skipped_no_data"] = elec.skipped_premises;
    j["skipped_groups"] = elec.skipped_groups;
    sections["detect"] = std::move(j);
  }

  void stage_reconnect() {
    const std::size_t n = outlier_ids.size();
    std::vector<std::optional<reconnect::Reassignment>> results(n);
    std::vector<std::string> reasons(n);
    parallel_for(n, cfg.parallelism, [&](std::size_t i) {
      const std::string& pid = outlier_ids[i];
      try {
        reconnect::CandidateSet cand = reconnect::build_candidates(topology, pid, cfg.k);
        reconnect::ReconnectConfig rc;
        rc.k = cfg.k;
        rc.restarts = cfg.kmeans_restarts;
        rc.max_iter = cfg.kmeans_max_iter;
        rc.mi_bins = cfg.mi_bins;
        rc.min_overlap = cfg.min_overlap;
        rc.mi_only = cfg.mi_only;
        rc.seed = mix_seed(cfg.seed, hash_id(pid));
        results[i] = reconnect::reconnect(topology, cleaned, cand, rc);
      } catch (const Error& e) {
        reasons[i] = e.what();
      }
    });

    moves.clear();
    ordered_json confirmed = ordered_json::array();
    ordered_json unreassigned = ordered_json::array();
    for (std::size_t i = 0; i < n; ++i) {
      if (!results[i]) {
        ordered_json e;
        e["premise_id"] = outlier_ids[i];
        e["reason"] = reasons[i];
        unreassigned.push_back(std::move(e));
        continue;
      }
      if (results[i]->new_transformer == results[i]->old_transformer) {
        ordered_json e;
        e["premise_id"] = outlier_ids[i];
        e["transformer"] = results[i]->old_transformer;
        e["method"] = reconnect::method_name(results[i]->method);
        confirmed.push_back(std::move(e));
      } else {
        moves.push_back(*results[i]);
      }
    }
    ordered_json j;
    j["reassignments"] = reconnect::reassignments_to_json(moves);
    j["confirmed"] = std::move(confirmed);
    j["unreassigned"] = std::move(unreassigned);
    sections["reconnect"] = std::move(j);
  }

  void stage_confidence() {
    const std::size_t n = moves.size();
    std::vector<std::optional<confidence::ConfidenceBreakdown>> results(n);
    std::vector<std::string> reasons(n);
    confidence::FalsifyOptions fo;
    fo.aggregate = cfg.dbi_false_aggregate == "mean"
                       ? confidence::FalsifyOptions::Aggregate::mean
                       : confidence::FalsifyOptions::Aggregate::minimum;
    fo.w_dbi = cfg.w_dbi;
    fo.w_corr = cfg.w_corr;
    fo.min_overlap = cfg.min_overlap;
    parallel_for(n, cfg.parallelism, [&](std::size_t i) {
      const auto& m = moves[i];
      try {
        reconnect::CandidateSet cand =
            reconnect::build_candidates(topology, m.premise_id, cfg.k);
        std::vector<std::string> ids = cand.premises;
        ids.push_back(cand.outlier);
        reconnect::FeaturizeOutcome feats = reconnect::featurize(topology, ids, cleaned);
        results[i] = confidence::falsify(m, cand, feats.features, cleaned, topology, fo);
      } catch (const Error& e) {
        reasons[i] = e.what();
      }
    });

    std::vector<confidence::ConfidenceBreakdown> breakdowns;
    ordered_json unavailable = ordered_json::array();
    for (std::size_t i = 0; i < n; ++i) {
      if (results[i]) {
        breakdowns.push_back(std::move(*results[i]));
      } else {
        ordered_json e;
        e["premise_id"] = moves[i].premise_id;
        e["reason"] = reasons[i];
        unavailable.push_back(std::move(e));
      }
    }
    ranked = confidence::rank_report(std::move(breakdowns), cfg.review_threshold);

    ordered_json j;
    j["entries"] = confidence::confidence_to_json(ranked);
    j["review_threshold"] = fmt_double(cfg.review_threshold);
    j["unavailable"] = std::move(unavailable);
    sections["confidence"] = std::move(j);

    apply_moves();
  }

  void apply_moves() {
    updated = topology;
    // moves are already sorted by premise id (outlier order), applied in one
    // deterministic pass
    for (const auto& m : moves) updated.edges[m.premise_id] = m.new_transformer;
    updated.validate();
  }

  void stage_validate() {
    ConstraintSet cs = capacity_constraints();
    cap_before = validate::check_capacity(updated, raw, cs);
    validate::VoltageRangeConfig vr;
    vr.v_min = cfg.v_min;
    vr.v_max = cfg.v_max;
    vr.persistence = cfg.persistence;
    volt_viol = validate::check_voltage_range(raw, updated.premises, nominal, vr);

    ordered_json j;
    j["capacity_table"] = validate::capacity_table_to_json(cap_before.table);
    j["capacity_violations"] = validate::violations_to_json(cap_before.violations);
    j["voltage_violations"] = validate::violations_to_json(volt_viol);
    j["skipped_unrated"] = cap_before.skipped;
    sections["validate"] = std::move(j);
  }

  void stage_refine() {
    ConstraintSet cs = capacity_constraints();
    validate::RefineConfig rc;
    rc.k = cfg.k;
    rc.mi_bins = cfg.mi_bins;
    rc.min_overlap = cfg.min_overlap;
    refinement = validate::refine_overload(updated, raw, cs, ranked, rc);
    cap_after = validate::check_capacity(refinement.topology, raw, cs);

    ordered_json moves_j = ordered_json::array();
    for (const auto& m : refinement.moves) {
      ordered_json e;
      e["premise_id"] = m.premise_id;
      e["from"] = m.from_transformer;
      e["to"] = m.to_transformer;
      moves_j.push_back(std::move(e));
    }
    ordered_json j;
    j["moves"] = std::move(moves_j);
    j["unresolved"] = refinement.unresolved;
    j["capacity_table_after"] = validate::capacity_table_to_json(cap_after.table);
    j["capacity_violations_after"] = validate::violations_to_json(cap_after.violations);
    sections["refine"] = std::move(j);
  }

  void stage_report(RunReport& out) {
    ordered_json j;
    j["tool"] = "gridtopo";
    j["config"] = config_fingerprint(cfg);
    j["input"] = sections.at("ingest");
    j["geocode"] = sections.at("geocode");
    j["cleaning"] = sections.at("preprocess");
    j["detection"] = sections.at("detect");
    j["reconnection"] = sections.at("reconnect");
    j["confidence"] = sections.at("confidence");
    j["validation"] = sections.at("validate");
    j["refinement"] = sections.at("refine");
    j["final_edges"] = refinement.topology.edges;

    if (!truth.empty()) {
      std::size_t compared = 0, correct = 0, missing = 0;
      ordered_json mismatched = ordered_json::array();
      for (const auto& [pid, tid] : refinement.topology.edges) {
        auto it = truth.find(pid);
        if (it == truth.end()) {
          ++missing;
          continue;
        }
        ++compared;
        if (it->second == tid) {
          ++correct;
        } else {
          ordered_json e;
          e["premise_id"] = pid;
          e["assigned"] = tid;
          e["truth"] = it->second;
          mismatched.push_back(std::move(e));
        }
      }
      ordered_json acc;
      acc["premises_compared"] = compared;
      acc["correct"] = correct;
      double value = compared ? static_cast<double>(correct) / compared : 0.0;
      acc["value"] = fmt_double(value);
      acc["missing_from_truth"] = missing;
      acc["mismatched"] = std::move(mismatched);
      j["accuracy"] = std::move(acc);
      out.accuracy = value;
    } else {
      j["accuracy"] = nullptr;
    }

    std::vector<std::string> warnings = input_warnings;
    for (const auto& e : sections.at("reconnect").at("unreassigned"))
      warnings.push_back("premise " + e.at("premise_id").get<std::string>() +
                         " left in place: " + e.at("reason").get<std::string>());
    for (const auto& e : sections.at("confidence").at("unavailable"))
      warnings.push_back("no confidence for " + e.at("premise_id").get<std::string>() + ": " +
                         e.at("reason").get<std::string>());
    for (const auto& tid : refinement.unresolved)
      warnings.push_back("transformer " + tid + " still overloaded after refinement");
    j["warnings"] = warnings;

    out.canonical = std::move(j);
    out.final_topology = refinement.topology;
    out.reassignments = moves;
    out.confidence = ranked;
    out.violations_before = cap_before.violations;
    for (const auto& v : volt_viol) out.violations_before.push_back(v);
    out.violations_after = cap_after.violations;
    out.capacity_table = cap_before.table;
    out.capacity_after = cap_after.table;
    out.refinement_moves = refinement.moves;
    out.unresolved = refinement.unresolved;
    out.warnings = std::move(warnings);
  }

  void run_stage(std::size_t idx, RunReport& out) {
    auto t0 = std::chrono::steady_clock::now();
    const std::string where = "stage " + kStages[idx] + ": ";
    try {
      switch (idx) {
        case 0: stage_ingest(); break;
        case 1: stage_geocode(); break;
        case 2: stage_preprocess(); break;
        case 3: stage_detect(); break;
        case 4: stage_reconnect(); break;
        case 5: stage_confidence(); break;
        case 6: stage_validate(); break;
        case 7: stage_refine(); break;
        case 8: stage_report(out); break;
        default: throw StructuralError("no such stage");
      }
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    } catch (const SchemaError& e) {
      throw SchemaError(where + e.what());
    } catch (const DataError& e) {
      throw DataError(where + e.what());
    } catch (const StructuralError& e) {
      throw StructuralError(where + e.what());
    } catch (const UnresolvableError& e) {
      throw UnresolvableError(where + e.what());
    } catch (const IoError& e) {
      throw IoError(where + e.what());
    }
    std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    timings.emplace_back(kStages[idx], dt.count());
  }

  // everything a caller can use from a run stopped after stage `last`
  void fill_partial(RunReport& out, std::size_t last) const {
    out.reassignments = moves;
    out.confidence = ranked;
    out.violations_before = cap_before.violations;
    for (const auto& v : volt_viol) out.violations_before.push_back(v);
    out.violations_after = cap_after.violations;
    out.capacity_table = cap_before.table;
    out.capacity_after = cap_after.table;
    out.refinement_moves = refinement.moves;
    out.unresolved = refinement.unresolved;
    out.final_topology = last >= 7 ? refinement.topology : last >= 5 ? updated : topology;
    out.warnings = input_warnings;
    out.stage_seconds = timings;
  }

  std::vector<OutageRecord> outages_;
};

void restore_moves(Runner& r) {
  r.moves.clear();
  for (const auto& e : r.sections.at("reconnect").at("reassignments")) {
    reconnect::Reassignment m;
    m.premise_id = e.at("premise_id").get<std::string>();
    m.old_transformer = e.at("old_transformer").get<std::string>();
    m.new_transformer = e.at("new_transformer").get<std::string>();
    m.method = e.at("method").get<std::string>() == "kmeans"
                   ? reconnect::Method::kmeans
                   : reconnect::Method::mutual_information;
    r.moves.push_back(std::move(m));
  }
}

void restore_ranked(Runner& r) {
  r.ranked.clear();
  for (const auto& e : r.sections.at("confidence").at("entries")) {
    confidence::RankedEntry entry;
    auto& b = entry.breakdown;
    b.premise_id = e.at("premise_id").get<std::string>();
    b.old_transformer = e.at("old_transformer").get<std::string>();
    b.new_transformer = e.at("new_transformer").get<std::string>();
    b.dbi_true = parse_back(e.at("dbi_true").get<std::string>());
    b.dbi_false = parse_back(e.at("dbi_false").get<std::string>());
    b.dbi_infinite = e.at("dbi_infinite").get<bool>();
    b.corr_ours = parse_back(e.at("corr_ours").get<std::string>());
    b.corr_false = parse_back(e.at("corr_false").get<std::string>());
    b.score_dbi = parse_back(e.at("score_dbi").get<std::string>());
    b.score_corr = parse_back(e.at("score_corr").get<std::string>());
    b.level = parse_back(e.at("level").get<std::string>());
    for (const auto& t : e.at("falsified_against"))
      b.falsified_against.push_back(t.get<std::string>());
    entry.needs_review = e.at("needs_review").get<bool>();
    r.ranked.push_back(std::move(entry));
  }
}

void restore_outliers(Runner& r) {
  r.outlier_ids.clear();
  for (const auto& e : r.sections.at("detect").at("flags"))
    r.outlier_ids.push_back(e.at("premise_id").get<std::string>());
}

// rebuild everything a stage at `start` expects to find in memory
void restore_state(Runner& r, std::size_t start, const fs::path& dir) {
  if (start > 0) {
    r.topology = topology_from_json(ordered_json::parse(read_text_file(dir / "topology.json")));
    r.raw = load_series_artifact(dir / "series_raw.csv", r.cfg.interval_s);
    r.input_warnings.clear();
    for (const auto& w : r.sections.at("ingest").at("warnings"))
      r.input_warnings.push_back(w.get<std::string>());
  }
  if (start > 2) {
    r.cleaned = load_series_artifact(dir / "series_clean.csv", r.cfg.interval_s);
    ordered_json nom = ordered_json::parse(read_text_file(dir / "nominal.json"));
    for (const auto& [pid, v] : nom.items()) r.nominal[pid] = v.get<double>();
  }
  if (start > 3) restore_outliers(r);
  if (start > 4) restore_moves(r);
  if (start > 5) {
    restore_ranked(r);
    r.apply_moves();
  }
  if (start > 6) {
    ConstraintSet cs = r.capacity_constraints();
    r.cap_before = validate::check_capacity(r.updated, r.raw, cs);
    validate::VoltageRangeConfig vr;
    vr.v_min = r.cfg.v_min;
    vr.v_max = r.cfg.v_max;
    vr.persistence = r.cfg.persistence;
    r.volt_viol = validate::check_voltage_range(r.raw, r.updated.premises, r.nominal, vr);
  }
  if (start > 7) {
    r.refinement.topology = r.updated;
    for (const auto& e : r.sections.at("refine").at("moves")) {
      validate::RefinementMove m;
      m.premise_id = e.at("premise_id").get<std::string>();
      m.from_transformer = e.at("from").get<std::string>();
      m.to_transformer = e.at("to").get<std::string>();
      r.refinement.topology.edges[m.premise_id] = m.to_transformer;
      r.refinement.moves.push_back(std::move(m));
    }
    for (const auto& t : r.sections.at("refine").at("unresolved"))
      r.refinement.unresolved.push_back(t.get<std::string>());
    r.cap_after = validate::check_capacity(r.refinement.topology, r.raw,
                                           r.capacity_constraints());
  }
}

void persist_stage(const Runner& r, std::size_t idx, const fs::path& dir) {
  const std::string& stage = kStages[idx];
  if (stage == "ingest") {
    write_text_file(dir / "topology.json", topology_json(r.topology).dump());
    std::ostringstream s;
    ingest::write_series_csv(s, r.raw);
    write_text_file(dir / "series_raw.csv", s.str());
  } else if (stage == "geocode") {
    write_text_file(dir / "topology.json", topology_json(r.topology).dump());
  } else if (stage == "preprocess") {
    std::ostringstream s;
    ingest::write_series_csv(s, r.cleaned);
    write_text_file(dir / "series_clean.csv", s.str());
    ordered_json nom;
    for (const auto& [pid, v] : r.nominal) nom[pid] = v;
    write_text_file(dir / "nominal.json", nom.dump());
  } else if (stage == "detect") {
    write_text_file(dir / "flags.json", r.sections.at("detect").dump());
    std::ostringstream s;
    detect::write_flags_csv(s, r.flags);
    write_text_file(dir / "flags.csv", s.str());
  } else if (stage == "reconnect") {
    std::ostringstream s;
    reconnect::write_reassignments_csv(s, r.moves);
    write_text_file(dir / "reassignments.csv", s.str());
  } else if (stage == "confidence") {
    std::ostringstream s;
    confidence::write_confidence_csv(s, r.ranked);
    write_text_file(dir / "confidence.csv", s.str());
  } else if (stage == "validate") {
    std::ostringstream s;
    validate::write_capacity_csv(s, r.cap_before.table);
    write_text_file(dir / "capacity.csv", s.str());
  } else if (stage == "refine") {
    std::ostringstream s;
    validate::write_capacity_csv(s, r.cap_after.table);
    write_text_file(dir / "capacity_after.csv", s.str());
  }
}

void save_state(const Runner& r, std::size_t completed_through, const fs::path& dir) {
  ordered_json j;
  j["fingerprint"] = config_fingerprint(r.cfg);
  ordered_json done = ordered_json::array();
  for (std::size_t i = 0; i <= completed_through && i < kStages.size(); ++i)
    done.push_back(kStages[i]);
  j["completed"] = std::move(done);
  ordered_json secs;
  for (const auto& [name, body] : r.sections) secs[name] = body;
  j["sections"] = std::move(secs);
  write_text_file(dir / "state.json", j.dump());
}

}  // namespace

const std::vector<std::string>& stage_names() { return kStages; }

void PipelineConfig::validate() const {
  if (interval_s < 1) throw ConfigError("interval must be positive");
  if (!(tau > 1.0)) throw ConfigError("tau must exceed 1");
  if (!(epsilon > -1.0 && epsilon < 1.0)) throw ConfigError("epsilon must lie in (-1,1)");
  if (min_overlap < 2) throw ConfigError("min_overlap must be at least 2");
  if (k < 2) throw ConfigError("k must be at least 2");
  if (mi_bins < 2) throw ConfigError("mi_bins must be at least 2");
  if (kmeans_restarts == 0) throw ConfigError("kmeans_restarts must be positive");
  if (kmeans_max_iter == 0) throw ConfigError("kmeans_max_iter must be positive");
  if (w_dbi < 0.0 || w_corr < 0.0 || std::abs(w_dbi + w_corr - 1.0) > 1e-9)
    throw ConfigError("confidence weights must be non-negative and sum to 1");
  if (!(review_threshold >= 0.0 && review_threshold <= 1.0))
    throw ConfigError("review_threshold must lie in [0,1]");
  if (dbi_false_aggregate != "min" && dbi_false_aggregate != "mean")
    throw ConfigError("dbi_false_aggregate must be 'min' or 'mean'");
  if (!(power_factor > 0.0) || power_factor > 1.0)
    throw ConfigError("power_factor must lie in (0,1]");
  if (v_min.has_value() != v_max.has_value())
    throw ConfigError("voltage band needs both v_min and v_max");
  if (v_min && !(*v_min > 0.0 && *v_min < *v_max))
    throw ConfigError("voltage band requires 0 < v_min < v_max");
  if (persistence < 1) throw ConfigError("persistence must be at least 1");
  cleaning.validate();
  if (geocoder != "none" && geocoder != "fixture" && geocoder != "http")
    throw ConfigError("geocoder must be none, fixture, or http");
  if (max_discrepancy_m < 0.0) throw ConfigError("max_discrepancy_m must be >= 0");
  if (parallelism == 0) throw ConfigError("parallelism must be at least 1");
  if (!stop_after.empty()) stage_index(stop_after);
  if (!resume_from.empty()) stage_index(resume_from);
}

PipelineConfig load_config(const std::string& path) {
  ordered_json j = ordered_json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw ConfigError(path + ": not valid JSON");
  if (!j.is_object()) throw ConfigError(path + ": config must be a JSON object");

  PipelineConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "meters_csv") c.meters_csv = v.get<std::string>();
    else if (key == "transformers_csv") c.transformers_csv = v.get<std::string>();
    else if (key == "series_csv") c.series_csv = v.get<std::string>();
    else if (key == "outages_csv") c.outages_csv = v.get<std::string>();
    else if (key == "truth_csv") c.truth_csv = v.get<std::string>();
    else if (key == "interval_s") c.interval_s = v.get<std::int64_t>();
    else if (key == "tau") c.tau = v.get<double>();
    else if (key == "epsilon") c.epsilon = v.get<double>();
    else if (key == "min_overlap") c.min_overlap = v.get<std::size_t>();
    else if (key == "k") c.k = v.get<std::size_t>();
    else if (key == "mi_bins") c.mi_bins = v.get<std::size_t>();
    else if (key == "mi_only") c.mi_only = v.get<bool>();
    else if (key == "kmeans_restarts") c.kmeans_restarts = v.get<std::size_t>();
    else if (key == "kmeans_max_iter") c.kmeans_max_iter = v.get<std::size_t>();
    else if (key == "w_dbi") c.w_dbi = v.get<double>();
    else if (key == "w_corr") c.w_corr = v.get<double>();
    else if (key == "review_threshold") c.review_threshold = v.get<double>();
    else if (key == "dbi_false_aggregate") c.dbi_false_aggregate = v.get<std::string>();
    else if (key == "power_factor") c.power_factor = v.get<double>();
    else if (key == "v_min") { if (!v.is_null()) c.v_min = v.get<double>(); }
    else if (key == "v_max") { if (!v.is_null()) c.v_max = v.get<double>(); }
    else if (key == "persistence") c.persistence = v.get<std::size_t>();
    else if (key == "cleaning") {
      for (const auto& [ck, cv] : v.items()) {
        if (ck == "min_completeness") c.cleaning.min_completeness = cv.get<double>();
        else if (ck == "iqr_k") c.cleaning.iqr_k = cv.get<double>();
        else if (ck == "flatline_window") c.cleaning.flatline_window = cv.get<int>();
        else if (ck == "flatline_epsilon_pu") c.cleaning.flatline_epsilon_pu = cv.get<double>();
        else if (ck == "enable_range_screen") c.cleaning.enable_range_screen = cv.get<bool>();
        else if (ck == "enable_iqr") c.cleaning.enable_iqr = cv.get<bool>();
        else if (ck == "enable_flatline") c.cleaning.enable_flatline = cv.get<bool>();
        else throw ConfigError(path + ": unknown cleaning key '" + ck + "'");
      }
    } else if (key == "geocoder") c.geocoder = v.get<std::string>();
    else if (key == "fixture_table_csv") c.fixture_table_csv = v.get<std::string>();
    else if (key == "max_discrepancy_m") c.max_discrepancy_m = v.get<double>();
    else if (key == "http") {
      for (const auto& [hk, hv] : v.items()) {
        if (hk == "host") c.http.host = hv.get<std::string>();
        else if (hk == "port") c.http.port = hv.get<int>();
        else if (hk == "path") c.http.path = hv.get<std::string>();
        else if (hk == "api_key_env") c.http.api_key_env = hv.get<std::string>();
        else if (hk == "min_interval_s") c.http.min_interval_s = hv.get<double>();
        else if (hk == "timeout_s") c.http.timeout_s = hv.get<int>();
        else throw ConfigError(path + ": unknown http key '" + hk + "'");
      }
    } else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "parallelism") c.parallelism = v.get<std::size_t>();
    else if (key == "emit_intermediate") c.emit_intermediate = v.get<bool>();
    else if (key == "out_dir") c.out_dir = v.get<std::string>();
    else if (key == "stop_after") c.stop_after = v.get<std::string>();
    else if (key == "resume_from") c.resume_from = v.get<std::string>();
    else throw ConfigError(path + ": unknown config key '" + key + "'");
  }
  return c;
}

nlohmann::ordered_json config_fingerprint(const PipelineConfig& c) {
  ordered_json j;
  // truth_csv is left out: it only annotates the report with an accuracy
  // section and never steers the analysis
  j["meters_csv"] = c.meters_csv;
  j["transformers_csv"] = c.transformers_csv;
  j["series_csv"] = c.series_csv;
  j["outages_csv"] = c.outages_csv;
  j["interval_s"] = c.interval_s;
  j["tau"] = fmt_double(c.tau);
  j["epsilon"] = fmt_double(c.epsilon);
  j["min_overlap"] = c.min_overlap;
  j["k"] = c.k;
  j["mi_bins"] = c.mi_bins;
  j["mi_only"] = c.mi_only;
  j["kmeans_restarts"] = c.kmeans_restarts;
  j["kmeans_max_iter"] = c.kmeans_max_iter;
  j["w_dbi"] = fmt_double(c.w_dbi);
  j["w_corr"] = fmt_double(c.w_corr);
  j["review_threshold"] = fmt_double(c.review_threshold);
  j["dbi_false_aggregate"] = c.dbi_false_aggregate;
  j["power_factor"] = fmt_double(c.power_factor);
  j["v_min"] = c.v_min ? ordered_json(fmt_double(*c.v_min)) : ordered_json(nullptr);
  j["v_max"] = c.v_max ? ordered_json(fmt_double(*c.v_max)) : ordered_json(nullptr);
  j["persistence"] = c.persistence;
  ordered_json cl;
  cl["min_completeness"] = fmt_double(c.cleaning.min_completeness);
  cl["iqr_k"] = fmt_double(c.cleaning.iqr_k);
  cl["flatline_window"] = c.cleaning.flatline_window;
  cl["flatline_epsilon_pu"] = fmt_double(c.cleaning.flatline_epsilon_pu);
  cl["enable_range_screen"] = c.cleaning.enable_range_screen;
  cl["enable_iqr"] = c.cleaning.enable_iqr;
  cl["enable_flatline"] = c.cleaning.enable_flatline;
  j["cleaning"] = std::move(cl);
  j["geocoder"] = c.geocoder;
  j["fixture_table_csv"] = c.fixture_table_csv;
  j["max_discrepancy_m"] = fmt_double(c.max_discrepancy_m);
  j["seed"] = c.seed;
  return j;
}

RunReport run_on(PipelineInput input, const PipelineConfig& config,
                 ingest::GeocoderClient* geocoder) {
  config.validate();
  if (!config.resume_from.empty())
    throw ConfigError("resume_from requires a file-based run with artifacts");

  Runner r;
  r.cfg = config;
  r.geocoder = geocoder;
  r.topology = std::move(input.topology);
  r.raw = std::move(input.series);
  r.outages_ = std::move(input.outages);
  r.truth = std::move(input.truth);
  r.input_warnings = std::move(input.input_warnings);

  RunReport out;
  std::size_t stop = config.stop_after.empty() ? kStages.size() - 1
                                               : stage_index(config.stop_after);
  for (std::size_t i = 0; i < kStages.size(); ++i) {
    r.run_stage(i, out);
    if (i == stop && i + 1 < kStages.size()) {
      out.stopped_after = kStages[i];
      r.fill_partial(out, i);
      return out;
    }
  }
  out.stage_seconds = r.timings;
  return out;
}

GeocoderHandle make_geocoder(const PipelineConfig& config) {
  GeocoderHandle h;
  if (config.geocoder == "fixture") {
    if (config.fixture_table_csv.empty())
      throw ConfigError("fixture geocoder needs fixture_table_csv");
    CsvTable t = read_csv(config.fixture_table_csv);
    std::size_t c_a = t.require("ADDRESS", config.fixture_table_csv);
    std::size_t c_lat = t.require("LAT", config.fixture_table_csv);
    std::size_t c_lon = t.require("LON", config.fixture_table_csv);
    auto fixture = std::make_unique<ingest::FixtureGeocoder>();
    for (const auto& row : t.rows) {
      auto lat = parse_double_cell(row.at(c_lat));
      auto lon = parse_double_cell(row.at(c_lon));
      if (!lat || !lon)
        throw DataError(config.fixture_table_csv + ": bad coordinates for '" + row.at(c_a) + "'");
      fixture->add(row.at(c_a), GeoPoint{*lat, *lon});
    }
    h.backend = std::move(fixture);
  } else if (config.geocoder == "http") {
    h.backend = std::make_unique<ingest::HttpGeocoder>(config.http);
  }
  if (h.backend) {
    h.cache = std::make_unique<ingest::CachingGeocoder>(*h.backend);
    h.client = h.cache.get();
  }
  return h;
}

RunReport run_pipeline(const PipelineConfig& config) {
  config.validate();
  if (config.out_dir.empty()) throw ConfigError("out_dir is required for file-based runs");
  const fs::path dir(config.out_dir);
  fs::create_directories(dir);

  const bool staged = !config.stop_after.empty() || !config.resume_from.empty();
  const bool persist = staged || config.emit_intermediate;

  Runner r;
  r.cfg = config;

  GeocoderHandle geo = make_geocoder(config);
  r.geocoder = geo.client;

  std::size_t start = 0;
  if (!config.resume_from.empty()) start = stage_index(config.resume_from);
  if (start > 0) {
    ordered_json state = ordered_json::parse(read_text_file(dir / "state.json"));
    if (state.at("fingerprint") != config_fingerprint(config))
      throw ConfigError("resume config does not match the stopped run");
    std::set<std::string> completed;
    for (const auto& s : state.at("completed")) completed.insert(s.get<std::string>());
    for (std::size_t i = 0; i < start; ++i)
      if (!completed.count(kStages[i]))
        throw ConfigError("cannot resume from '" + config.resume_from + "': stage '" +
                          kStages[i] + "' has not run");
    for (const auto& [name, body] : state.at("sections").items()) r.sections[name] = body;
    restore_state(r, start, dir);
  } else {
    ingest::AssetLoad assets = ingest::load_assets(config.meters_csv, config.transformers_csv);
    r.topology = std::move(assets.topology);
    r.input_warnings = std::move(assets.warnings);
    r.raw = ingest::load_series(config.series_csv, config.interval_s);
    if (!config.outages_csv.empty()) r.outages_ = ingest::load_outages(config.outages_csv);
  }
  if (!config.truth_csv.empty()) r.truth = ingest::load_edges(config.truth_csv);

  RunReport out;
  std::size_t stop = config.stop_after.empty() ? kStages.size() - 1
                                               : stage_index(config.stop_after);
  for (std::size_t i = start; i < kStages.size(); ++i) {
    r.run_stage(i, out);
    if (persist) {
      persist_stage(r, i, dir);
      save_state(r, i, dir);
    }
    if (i == stop && i + 1 < kStages.size()) {
      out.stopped_after = kStages[i];
      r.fill_partial(out, i);
      return out;
    }
  }

  write_text_file(dir / "report.json", out.canonical.dump(2) + "\n");
  out.stage_seconds = r.timings;
  return out;
}

nlohmann::ordered_json report_json(const RunReport& report) { return report.canonical; }

std::vector<KSweepRow> k_sweep(const PipelineInput& input, PipelineConfig config,
                               const std::vector<std::size_t>& ks,
                               ingest::GeocoderClient* geocoder) {
  if (ks.empty()) throw ConfigError("k sweep needs at least one k");
  config.stop_after.clear();
  config.resume_from.clear();
  std::vector<KSweepRow> rows;
  std::vector<std::map<std::string, std::string>> finals;
  std::vector<std::set<std::string>> moved;
  for (std::size_t k : ks) {
    config.k = k;
    RunReport rep = run_on(input, config, geocoder);
    KSweepRow row;
    row.k = k;
    row.reassignments = rep.reassignments.size();
    std::set<std::string> ids;
    for (const auto& m : rep.reassignments) ids.insert(m.premise_id);
    finals.push_back(rep.final_topology.edges);
    moved.push_back(std::move(ids));
    rows.push_back(row);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::set<std::string> pool = moved[0];
    pool.insert(moved[i].begin(), moved[i].end());
    if (pool.empty()) {
      rows[i].agreement = 1.0;
      continue;
    }
    std::size_t same = 0;
    for (const auto& pid : pool) {
      auto a = finals[0].find(pid);
      auto b = finals[i].find(pid);
      if (a != finals[0].end() && b != finals[i].end() && a->second == b->second) ++same;
    }
    rows[i].agreement = static_cast<double>(same) / static_cast<double>(pool.size());
  }
  return rows;
}

}  // namespace gridtopo::pipeline
