#include "gridtopo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "json.hpp"

#include "gridtopo/csv.hpp"
#include "gridtopo/error.hpp"
#include "gridtopo/geo.hpp"
#include "gridtopo/rng.hpp"
#include "gridtopo/stats.hpp"
#include "gridtopo/timeutil.hpp"

namespace gridtopo::synth {
namespace {

constexpr double kTau = 2.0 * std::numbers::pi;
constexpr double kDegPerRad = 180.0 / std::numbers::pi;

// rng stream salts, one per generation stage
constexpr std::uint64_t kSaltLayout = 1;
constexpr std::uint64_t kSaltCorruption = 2;
constexpr std::uint64_t kSaltFeeder = 3;
constexpr std::uint64_t kSaltOutages = 4;

GeoPoint offset_point(const SynthConfig& cfg, double north_m, double east_m) {
  double deg_per_m = kDegPerRad / kEarthRadiusM;
  double lat = cfg.center_lat + north_m * deg_per_m;
  double lon = cfg.center_lon + east_m * deg_per_m / std::cos(cfg.center_lat / kDegPerRad);
  return {lat, lon};
}

std::string tx_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%04zu", i + 1);
  return buf;
}

std::string endpoint_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "E%06zu", i + 1);
  return buf;
}

// stationary unit-variance AR(1)
std::vector<double> ar1_series(Rng& rng, double phi, std::size_t n) {
  std::vector<double> x(n);
  double drive = std::sqrt(1.0 - phi * phi);
  x[0] = rng.gaussian();
  for (std::size_t t = 1; t < n; ++t) x[t] = phi * x[t - 1] + drive * rng.gaussian();
  return x;
}

double time_of_day_frac(std::int64_t epoch) {
  std::int64_t tod = ((epoch % 86400) + 86400) % 86400;
  return static_cast<double>(tod) / 86400.0;
}

// diurnal residential load shape, peaks at 18:00 UTC
double load_shape(double tau) { return 0.6 + 0.4 * std::sin(kTau * (tau - 0.5)); }

std::vector<double> group_total_kw(const SeriesFrame& frame, const std::vector<std::string>& ids) {
  std::vector<double> total(frame.size(), 0.0);
  for (const auto& id : ids) {
    const ChannelSet* ch = frame.channels(id);
    if (!ch) continue;
    for (std::size_t t = 0; t < frame.size(); ++t)
      if (!is_missing(ch->p_kw[t])) total[t] += ch->p_kw[t];
  }
  return total;
}

double peak_of(const std::vector<double>& total) {
  return total.empty() ? 0.0 : *std::max_element(total.begin(), total.end());
}

void scale_load(ChannelSet& ch, double s) {
  for (double& v : ch.p_kw) v *= s;
  for (double& v : ch.q_kvar) v *= s;
}

std::vector<std::string> members_of(const Topology& topo, const std::string& tid,
                                    const std::string& skip = {}) {
  std::vector<std::string> out;
  for (const auto& [pid, t] : topo.edges)
    if (t == tid && pid != skip) out.push_back(pid);
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_transformers < 2) throw ConfigError("need at least two transformers");
  if (premises_min < 1 || premises_max < premises_min)
    throw ConfigError("premise count range is empty");
  if (n_steps < 2) throw ConfigError("need at least two samples");
  if (step_seconds < 1) throw ConfigError("step must be positive");
  if (corruption_fraction < 0.0 || corruption_fraction >= 1.0)
    throw ConfigError("corruption fraction must lie in [0, 1)");
  if (!(inter_corr_target >= 0.0) || !(inter_corr_target < intra_corr_target) ||
      !(intra_corr_target <= 1.0))
    throw ConfigError("correlation targets must satisfy 0 <= inter < intra <= 1");
  if (!(sigma_v > 0.0)) throw ConfigError("sigma_v must be positive");
  if (!(nominal_v > 0.0)) throw ConfigError("nominal voltage must be positive");
  if (std::abs(center_lat) > 85.0 || std::abs(center_lon) > 180.0)
    throw ConfigError("window center out of range");
  if (!(grid_spacing_m > 0.0) || coord_jitter_m < 0.0 || !(cluster_radius_m > 0.0))
    throw ConfigError("bad geometry parameters");
  if (!(default_rated_kva > 0.0)) throw ConfigError("default rating must be positive");
  if (!(peak_kw_min > 0.0) || peak_kw_max < peak_kw_min)
    throw ConfigError("peak kW range is empty");
  if (!(load_power_factor > 0.0) || load_power_factor > 1.0)
    throw ConfigError("load power factor must lie in (0, 1]");
  if (!(ar_phi >= 0.0) || ar_phi >= 1.0) throw ConfigError("ar_phi must lie in [0, 1)");
  if (feeder_sin_share < 0.0 || feeder_sin_share > 1.0)
    throw ConfigError("feeder_sin_share must lie in [0, 1]");
  for (double f : {missing_fraction, missing_nominal_fraction, missing_location_fraction})
    if (f < 0.0 || f >= 1.0) throw ConfigError("fractions must lie in [0, 1)");
  if (outage_count > 0) {
    if (outage_min_steps < 1 || outage_max_steps < outage_min_steps)
      throw ConfigError("outage length range is empty");
    if (outage_max_steps > n_steps) throw ConfigError("outage longer than the series");
  }
}

SynthBundle generate(const SynthConfig& cfg) {
  cfg.validate();

  SynthBundle bundle;
  bundle.config = cfg;
  bundle.constraints = ConstraintSet::for_nominal(cfg.nominal_v);

  // --- layout ---------------------------------------------------------
  // One rng stream, drawn in a fixed order: per transformer the jitter,
  // phase and premise count, then per premise the disk offset.
  Rng layout(mix_seed(cfg.seed, kSaltLayout));
  std::size_t rows = static_cast<std::size_t>(std::lround(std::sqrt(double(cfg.n_transformers))));
  if (rows == 0) rows = 1;
  std::size_t cols = (cfg.n_transformers + rows - 1) / rows;
  double north0 = -0.5 * double(rows - 1) * cfg.grid_spacing_m;
  double east0 = -0.5 * double(cols - 1) * cfg.grid_spacing_m;

  struct PremisePlan {
    std::string id;
    std::string tx;
    GeoPoint pos;  // physical, kept even when the record hides it
    PhaseLabel phase;
  };
  std::vector<PremisePlan> plan;
  Topology truth;

  for (std::size_t i = 0; i < cfg.n_transformers; ++i) {
    double north = north0 + double(i / cols) * cfg.grid_spacing_m +
                   layout.uniform(-cfg.coord_jitter_m, cfg.coord_jitter_m);
    double east = east0 + double(i % cols) * cfg.grid_spacing_m +
                  layout.uniform(-cfg.coord_jitter_m, cfg.coord_jitter_m);
    TransformerRecord tx;
    tx.id = tx_id(i);
    tx.location = offset_point(cfg, north, east);
    tx.rated_kva = cfg.default_rated_kva;
    std::size_t phase_idx = layout.next_index(3);
    tx.phase.has_a = phase_idx == 0;
    tx.phase.has_b = phase_idx == 1;
    tx.phase.has_c = phase_idx == 2;
    truth.transformers.push_back(tx);

    std::size_t count =
        cfg.premises_min + layout.next_index(cfg.premises_max - cfg.premises_min + 1);
    for (std::size_t p = 0; p < count; ++p) {
      double angle = layout.uniform(0.0, kTau);
      double radius = cfg.cluster_radius_m * std::sqrt(layout.next_double());
      PremisePlan pp;
      pp.id = endpoint_id(plan.size());
      pp.tx = tx.id;
      pp.pos = offset_point(cfg, north + radius * std::cos(angle), east + radius * std::sin(angle));
      pp.phase = tx.phase;
      plan.push_back(pp);
    }
  }

  // --- records and physical edges --------------------------------------
  // Per-premise record quirks (hidden nominal or location) come from the
  // premise's own stream so other stages are unaffected.
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const PremisePlan& pp = plan[i];
    Rng prng(mix_seed(cfg.seed, hash_id("prm:" + pp.id)));
    bool hide_loc = prng.next_double() < cfg.missing_location_fraction;
    bool hide_nom = prng.next_double() < cfg.missing_nominal_fraction;

    PremiseRecord rec;
    rec.id = pp.id;
    if (!hide_loc) rec.location = pp.pos;
    rec.address = std::to_string(i + 1) + " Grid Ave";
    rec.phase = pp.phase;
    if (!hide_nom) rec.nominal_voltage = cfg.nominal_v;
    truth.premises.push_back(rec);
    truth.edges[pp.id] = pp.tx;
  }
  truth.finalize();
  bundle.truth = truth;
  bundle.corrupted = truth;

  // --- corruption -------------------------------------------------------
  // Rewire a fixed count of premises to one of the three transformers
  // nearest their physical location, excluding the real one.
  std::size_t n_corrupt =
      static_cast<std::size_t>(std::ceil(cfg.corruption_fraction * double(plan.size())));
  if (n_corrupt > 0) {
    Rng crng(mix_seed(cfg.seed, kSaltCorruption));
    std::vector<std::size_t> order(plan.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = 0; i < n_corrupt; ++i)
      std::swap(order[i], order[i + crng.next_index(order.size() - i)]);
    std::vector<std::size_t> chosen(order.begin(), order.begin() + n_corrupt);
    std::sort(chosen.begin(), chosen.end());

    for (std::size_t idx : chosen) {
      const PremisePlan& pp = plan[idx];
      std::vector<std::pair<double, std::string>> near;
      for (const auto& tx : truth.transformers) {
        if (tx.id == pp.tx) continue;
        near.emplace_back(geodist_m(pp.pos, tx.location), tx.id);
      }
      std::sort(near.begin(), near.end());
      std::size_t pool = std::min<std::size_t>(3, near.size());
      const std::string& target = near[crng.next_index(pool)].second;
      bundle.corrupted.edges[pp.id] = target;
      bundle.corruption_log.push_back({pp.id, pp.tx, target});
    }
  }

  // --- interval series ---------------------------------------------------
  // v_i(t) = V (1 + sigma (alpha feeder + beta own_j + gamma white_i)) with
  // every component zero-mean unit-variance, so pairwise correlations land
  // on the configured targets: alpha^2 = inter, alpha^2 + beta^2 = intra.
  double alpha = std::sqrt(cfg.inter_corr_target);
  double beta = std::sqrt(cfg.intra_corr_target - cfg.inter_corr_target);
  double gamma = std::sqrt(1.0 - cfg.intra_corr_target);
  double q_ratio = std::tan(std::acos(cfg.load_power_factor));

  SeriesFrame frame;
  frame.timestamps.resize(cfg.n_steps);
  for (std::size_t t = 0; t < cfg.n_steps; ++t)
    frame.timestamps[t] = cfg.start_epoch + std::int64_t(t) * cfg.step_seconds;

  std::vector<double> tau(cfg.n_steps);
  for (std::size_t t = 0; t < cfg.n_steps; ++t) tau[t] = time_of_day_frac(frame.timestamps[t]);

  std::vector<double> feeder(cfg.n_steps);
  {
    Rng frng(mix_seed(cfg.seed, kSaltFeeder));
    double ws = std::sqrt(cfg.feeder_sin_share);
    double wn = std::sqrt(1.0 - cfg.feeder_sin_share);
    double phase0 = frng.uniform(0.0, kTau);
    std::vector<double> ar = ar1_series(frng, cfg.ar_phi, cfg.n_steps);
    for (std::size_t t = 0; t < cfg.n_steps; ++t)
      feeder[t] = ws * std::numbers::sqrt2 * std::sin(kTau * tau[t] + phase0) + wn * ar[t];
  }

  std::map<std::string, std::vector<double>> own;
  for (const auto& tx : truth.transformers) {
    Rng orng(mix_seed(cfg.seed, hash_id("own:" + tx.id)));
    own[tx.id] = ar1_series(orng, cfg.ar_phi, cfg.n_steps);
  }

  for (const PremisePlan& pp : plan) {
    Rng prng(mix_seed(cfg.seed, hash_id("prm:" + pp.id)));
    prng.next_double();  // record-quirk draws consumed above, same order
    prng.next_double();
    double peak_kw = prng.uniform(cfg.peak_kw_min, cfg.peak_kw_max);
    const std::vector<double>& own_tx = own[pp.tx];

    ChannelSet ch;
    ch.va.assign(cfg.n_steps, kMissing);
    ch.vb.assign(cfg.n_steps, kMissing);
    ch.vc.assign(cfg.n_steps, kMissing);
    ch.p_kw.assign(cfg.n_steps, kMissing);
    ch.q_kvar.assign(cfg.n_steps, kMissing);
    std::vector<double>& volt = pp.phase.has_a ? ch.va : (pp.phase.has_b ? ch.vb : ch.vc);

    for (std::size_t t = 0; t < cfg.n_steps; ++t) {
      double z = alpha * feeder[t] + beta * own_tx[t] + gamma * prng.gaussian();
      double load_noise = prng.gaussian();
      bool drop = prng.next_double() < cfg.missing_fraction;
      if (drop) continue;
      volt[t] = cfg.nominal_v * (1.0 + cfg.sigma_v * z);
      double p = peak_kw * std::max(0.05, load_shape(tau[t]) + 0.08 * load_noise);
      ch.p_kw[t] = p;
      ch.q_kvar[t] = p * q_ratio;
    }
    frame.premises.emplace(pp.id, std::move(ch));
  }

  // --- outages ------------------------------------------------------------
  if (cfg.outage_count > 0) {
    Rng orng(mix_seed(cfg.seed, kSaltOutages));
    for (std::size_t k = 0; k < cfg.outage_count; ++k) {
      const std::string& pid = plan[orng.next_index(plan.size())].id;
      std::size_t len =
          cfg.outage_min_steps + orng.next_index(cfg.outage_max_steps - cfg.outage_min_steps + 1);
      std::size_t start = orng.next_index(cfg.n_steps - len + 1);
      ChannelSet& ch = frame.premises.at(pid);
      for (std::size_t t = start; t < start + len; ++t) {
        ch.va[t] = ch.vb[t] = ch.vc[t] = kMissing;
        ch.p_kw[t] = ch.q_kvar[t] = kMissing;
      }
      std::int64_t restored = start + len < cfg.n_steps
                                  ? frame.timestamps[start + len]
                                  : frame.timestamps.back() + cfg.step_seconds;
      bundle.outages.push_back({pid, frame.timestamps[start], restored});
    }
    std::sort(bundle.outages.begin(), bundle.outages.end(),
              [](const OutageRecord& a, const OutageRecord& b) {
                return std::tie(a.premise_id, a.start) < std::tie(b.premise_id, b.start);
              });
  }

  bundle.series = std::move(frame);
  bundle.truth.validate();
  bundle.corrupted.validate();
  return bundle;
}

SynthBundle generate_overload_scenario(const SynthConfig& cfg, const OverloadConfig& overload) {
  SynthBundle bundle = generate(cfg);
  if (overload.cases.empty()) return bundle;
  if (overload.cases.size() * 2 > cfg.n_transformers)
    throw ConfigError("too many overload cases for the transformer count");

  std::set<std::string> targets;
  for (std::size_t i = 0; i < overload.cases.size(); ++i) {
    std::size_t idx = i * cfg.n_transformers / overload.cases.size();
    targets.insert(bundle.truth.transformers[idx].id);
  }

  for (std::size_t i = 0; i < overload.cases.size(); ++i) {
    const OverloadCase& oc = overload.cases[i];
    std::size_t idx = i * cfg.n_transformers / overload.cases.size();
    const std::string target_id = bundle.truth.transformers[idx].id;
    if (!(oc.rating_kva > 0.0) || !(oc.native_peak_kw > 0.0) ||
        !(oc.target_peak_kw > oc.native_peak_kw))
      throw ConfigError("overload case requires 0 < native peak < target peak");

    for (Topology* topo : {&bundle.truth, &bundle.corrupted}) {
      auto it = std::lower_bound(
          topo->transformers.begin(), topo->transformers.end(), target_id,
          [](const TransformerRecord& r, const std::string& key) { return r.id < key; });
      it->rated_kva = oc.rating_kva;
    }
    const GeoPoint target_pos = bundle.truth.transformer(target_id)->location;

    // Undo any random corruption touching the target group so the planted
    // violation is the only discrepancy there: strangers go back to their
    // physical transformer, strayed natives come home.
    auto uncorrupt = [&](const std::string& pid) {
      bundle.corrupted.edges[pid] = bundle.truth.edges.at(pid);
      bundle.corruption_log.erase(
          std::remove_if(bundle.corruption_log.begin(), bundle.corruption_log.end(),
                         [&](const CorruptionRecord& c) { return c.premise_id == pid; }),
          bundle.corruption_log.end());
    };
    for (const auto& pid : members_of(bundle.corrupted, target_id))
      if (bundle.truth.edges.at(pid) != target_id) uncorrupt(pid);
    for (const auto& pid : members_of(bundle.truth, target_id))
      if (bundle.corrupted.edges.at(pid) != target_id) uncorrupt(pid);

    // Scale the physical group so its joint peak sits at native_peak_kw.
    std::vector<std::string> native = members_of(bundle.truth, target_id);
    double native_peak = peak_of(group_total_kw(bundle.series, native));
    if (!(native_peak > 0.0)) throw StructuralError("overload target has no load to scale");
    for (const auto& pid : native)
      scale_load(bundle.series.premises.at(pid), oc.native_peak_kw / native_peak);

    // Donor: nearest non-target transformer with an uncorrupted premise.
    std::vector<std::pair<double, std::string>> near;
    for (const auto& tx : bundle.truth.transformers) {
      if (targets.count(tx.id)) continue;
      near.emplace_back(geodist_m(target_pos, tx.location), tx.id);
    }
    std::sort(near.begin(), near.end());

    std::string moved, donor;
    for (const auto& [dist, tid] : near) {
      for (const auto& pid : members_of(bundle.truth, tid)) {
        if (bundle.corrupted.edges.at(pid) == tid) {
          moved = pid;
          donor = tid;
          break;
        }
      }
      if (!moved.empty()) break;
    }
    if (moved.empty()) throw StructuralError("no movable premise near overload target");

    bundle.corrupted.edges[moved] = target_id;
    bundle.corruption_log.push_back({moved, donor, target_id});

    // Solve the moved premise's load scale so the corrupted group peaks at
    // target_peak_kw. The peak is increasing in the scale, so bisect.
    std::vector<std::string> rest = members_of(bundle.corrupted, target_id, moved);
    std::vector<double> base = group_total_kw(bundle.series, rest);
    std::vector<double> moved_kw = group_total_kw(bundle.series, {moved});
    if (peak_of(base) >= oc.target_peak_kw)
      throw StructuralError("corrupted group already peaks past the overload target");

    auto peak_at = [&](double s) {
      double best = 0.0;
      for (std::size_t t = 0; t < base.size(); ++t)
        best = std::max(best, base[t] + s * moved_kw[t]);
      return best;
    };
    double lo = 0.0, hi = 1.0;
    while (peak_at(hi) < oc.target_peak_kw) {
      hi *= 2.0;
      if (hi > 1e9) throw StructuralError("overload scale did not converge");
    }
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      (peak_at(mid) < oc.target_peak_kw ? lo : hi) = mid;
    }
    scale_load(bundle.series.premises.at(moved), hi);

    OverloadInfo info;
    info.transformer_id = target_id;
    info.rating_kva = oc.rating_kva;
    info.peak_kw_true = peak_of(group_total_kw(bundle.series, members_of(bundle.truth, target_id)));
    info.peak_kw_corrupted =
        peak_of(group_total_kw(bundle.series, members_of(bundle.corrupted, target_id)));
    info.moved_premise = moved;
    info.donor_transformer = donor;
    bundle.overloads.push_back(info);
  }

  std::sort(bundle.corruption_log.begin(), bundle.corruption_log.end(),
            [](const CorruptionRecord& a, const CorruptionRecord& b) {
              return a.premise_id < b.premise_id;
            });
  bundle.corrupted.validate();
  return bundle;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::string opt_cell(const std::optional<double>& v) {
  return v ? fmt_double(*v) : std::string();
}

}  // namespace

void export_bundle(const SynthBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::path root(dir);
  fs::create_directories(root);

  {
    auto out = open_out(root / "meters.csv");
    write_csv_row(out, {"ENDPOINTID", "XFMR", "LAT", "LON", "ADDRESS", "PHASE", "NOMINAL_V"});
    for (const auto& p : bundle.corrupted.premises) {
      std::string lat = p.location ? fmt_double(p.location->lat) : std::string();
      std::string lon = p.location ? fmt_double(p.location->lon) : std::string();
      write_csv_row(out, {p.id, bundle.corrupted.edges.at(p.id), lat, lon, p.address,
                          p.phase.str(), opt_cell(p.nominal_voltage)});
    }
  }
  {
    auto out = open_out(root / "transformers.csv");
    write_csv_row(out, {"XFMR", "LAT", "LON", "RATED_KVA", "PHASE"});
    for (const auto& t : bundle.corrupted.transformers)
      write_csv_row(out, {t.id, fmt_double(t.location.lat), fmt_double(t.location.lon),
                          opt_cell(t.rated_kva), t.phase.str()});
  }
  {
    auto out = open_out(root / "series.csv");
    write_csv_row(out, {"ENDPOINTID", "TIMESTAMP", "VA", "VB", "VC", "P_KW", "Q_KVAR"});
    std::vector<std::string> stamps(bundle.series.size());
    for (std::size_t t = 0; t < bundle.series.size(); ++t)
      stamps[t] = format_rfc3339(bundle.series.timestamps[t]);
    for (const auto& [pid, ch] : bundle.series.premises) {
      for (std::size_t t = 0; t < bundle.series.size(); ++t) {
        write_csv_row(out, {pid, stamps[t], fmt_double(ch.va[t]), fmt_double(ch.vb[t]),
                            fmt_double(ch.vc[t]), fmt_double(ch.p_kw[t]),
                            fmt_double(ch.q_kvar[t])});
      }
    }
  }
  {
    auto out = open_out(root / "outages.csv");
    write_csv_row(out, {"PREMISE_ID", "START", "RESTORED"});
    for (const auto& o : bundle.outages)
      write_csv_row(out, {o.premise_id, format_rfc3339(o.start), format_rfc3339(o.restored)});
  }
  {
    auto out = open_out(root / "truth.csv");
    write_csv_row(out, {"ENDPOINTID", "XFMR"});
    for (const auto& [pid, tid] : bundle.truth.edges) write_csv_row(out, {pid, tid});
  }
  {
    nlohmann::ordered_json m;
    const SynthConfig& c = bundle.config;
    m["seed"] = c.seed;
    m["n_transformers"] = c.n_transformers;
    m["n_premises"] = bundle.truth.premises.size();
    m["n_steps"] = c.n_steps;
    m["step_seconds"] = c.step_seconds;
    m["start"] = format_rfc3339(c.start_epoch);
    m["nominal_v"] = c.nominal_v;
    m["intra_corr_target"] = c.intra_corr_target;
    m["inter_corr_target"] = c.inter_corr_target;
    m["corruption_fraction"] = c.corruption_fraction;
    m["constraints"] = {{"v_min", bundle.constraints.v_min},
                        {"v_max", bundle.constraints.v_max},
                        {"power_factor", bundle.constraints.power_factor}};
    m["files"] = {{"meters", "meters.csv"},
                  {"transformers", "transformers.csv"},
                  {"series", "series.csv"},
                  {"outages", "outages.csv"},
                  {"truth", "truth.csv"}};
    m["corruption"] = nlohmann::ordered_json::array();
    for (const auto& rec : bundle.corruption_log)
      m["corruption"].push_back({{"premise", rec.premise_id},
                                 {"true", rec.true_transformer},
                                 {"recorded", rec.recorded_transformer}});
    m["overloads"] = nlohmann::ordered_json::array();
    for (const auto& o : bundle.overloads)
      m["overloads"].push_back({{"transformer", o.transformer_id},
                                {"rating_kva", o.rating_kva},
                                {"peak_kw_true", o.peak_kw_true},
                                {"peak_kw_corrupted", o.peak_kw_corrupted},
                                {"moved_premise", o.moved_premise},
                                {"donor", o.donor_transformer}});
    auto out = open_out(root / "manifest.json");
    out << m.dump(2) << "\n";
  }
}

}  // namespace gridtopo::synth
