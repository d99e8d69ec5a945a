#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "gridtopo/error.hpp"
#include "gridtopo/ingest.hpp"
#include "gridtopo/stats.hpp"
#include "gridtopo/synth.hpp"

using namespace gridtopo;
using synth::SynthBundle;
using synth::SynthConfig;

namespace {

SynthConfig small() {
  SynthConfig cfg;
  cfg.seed = 7;
  cfg.n_transformers = 10;
  cfg.premises_min = 4;
  cfg.premises_max = 8;
  cfg.n_steps = 96;
  return cfg;
}

std::string series_bytes(const SeriesFrame& frame) {
  std::ostringstream out;
  ingest::write_series_csv(out, frame);
  return out.str();
}

std::filesystem::path scratch_dir(const char* tag) {
  auto dir = std::filesystem::temp_directory_path() /
             (std::string("gt_synth_") + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("same seed, same bundle") {
  SynthBundle a = synth::generate(small());
  SynthBundle b = synth::generate(small());
  CHECK(a.truth.edges == b.truth.edges);
  CHECK(a.corrupted.edges == b.corrupted.edges);
  CHECK(series_bytes(a.series) == series_bytes(b.series));
  REQUIRE(a.corruption_log.size() == b.corruption_log.size());
  for (std::size_t i = 0; i < a.corruption_log.size(); ++i)
    CHECK(a.corruption_log[i].premise_id == b.corruption_log[i].premise_id);

  SynthConfig other = small();
  other.seed = 8;
  CHECK(series_bytes(synth::generate(other).series) != series_bytes(a.series));
}

TEST_CASE("corruption log matches the topology diff") {
  SynthBundle b = synth::generate(small());
  auto diff = diff_topologies(b.truth, b.corrupted);
  REQUIRE(diff.size() == b.corruption_log.size());
  for (std::size_t i = 0; i < diff.size(); ++i) {
    CHECK(diff[i].premise_id == b.corruption_log[i].premise_id);
    CHECK(diff[i].transformer_a == b.corruption_log[i].true_transformer);
    CHECK(diff[i].transformer_b == b.corruption_log[i].recorded_transformer);
    CHECK(b.corruption_log[i].true_transformer != b.corruption_log[i].recorded_transformer);
  }

  double frac = static_cast<double>(diff.size()) / b.truth.premises.size();
  CHECK(frac > 0.1);
  // the generator takes the ceiling of the request, so at most one extra
  CHECK(frac <= 0.2 + 1.0 / static_cast<double>(b.truth.premises.size()));
}

TEST_CASE("clean config with zero corruption stays clean") {
  SynthConfig cfg = small();
  cfg.corruption_fraction = 0.0;
  SynthBundle b = synth::generate(cfg);
  CHECK(b.corruption_log.empty());
  CHECK(b.truth.edges == b.corrupted.edges);
}

TEST_CASE("group correlation structure") {
  SynthConfig cfg = small();
  cfg.n_steps = 288;
  SynthBundle b = synth::generate(cfg);
  auto groups = group_by_transformer(b.truth);

  std::vector<double> intra, inter;
  std::vector<std::string> reps;  // one premise per transformer for inter pairs
  for (const auto& [tid, members] : groups) {
    if (!members.empty()) reps.push_back(members.front());
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j) {
        auto* x = primary_voltage(*b.series.channels(members[i]));
        auto* y = primary_voltage(*b.series.channels(members[j]));
        auto r = pearson(*x, *y);
        REQUIRE(r);
        intra.push_back(r->rho);
      }
  }
  for (std::size_t i = 0; i < reps.size(); ++i)
    for (std::size_t j = i + 1; j < reps.size(); ++j) {
      auto* x = primary_voltage(*b.series.channels(reps[i]));
      auto* y = primary_voltage(*b.series.channels(reps[j]));
      auto r = pearson(*x, *y);
      REQUIRE(r);
      inter.push_back(r->rho);
    }

  double mi = mean_nonmissing(intra);
  double me = mean_nonmissing(inter);
  // Finite-sample means drift from the construction targets, so the bands
  // are generous; the ordering is the property the pipeline leans on.
  CHECK(mi > 0.85);
  CHECK(mi <= 1.0);
  CHECK(me < 0.85);
  CHECK(mi > me + 0.05);
}

TEST_CASE("missing data knobs") {
  SynthConfig cfg = small();
  cfg.missing_fraction = 0.05;
  cfg.missing_nominal_fraction = 0.3;
  cfg.missing_location_fraction = 0.25;
  SynthBundle b = synth::generate(cfg);

  std::size_t no_nominal = 0, no_location = 0;
  for (const auto& p : b.corrupted.premises) {
    if (!p.nominal_voltage) ++no_nominal;
    if (!p.location) ++no_location;
  }
  CHECK(no_nominal > 0);
  CHECK(no_location > 0);
  CHECK(no_nominal < b.corrupted.premises.size());
  CHECK(no_location < b.corrupted.premises.size());

  std::size_t holes = 0, total = 0;
  for (const auto& [id, ch] : b.series.premises) {
    const std::vector<double>* v = primary_voltage(ch);  // phase-matched channel
    if (!v) continue;
    for (double x : *v) {
      ++total;
      if (is_missing(x)) ++holes;
    }
  }
  CHECK(holes > 0);
  CHECK(static_cast<double>(holes) / total < 0.15);
}

TEST_CASE("outage windows land inside the record") {
  SynthConfig cfg = small();
  cfg.outage_count = 3;
  SynthBundle b = synth::generate(cfg);
  REQUIRE(b.outages.size() == 3);
  std::int64_t first = cfg.start_epoch;
  std::int64_t last = cfg.start_epoch + static_cast<std::int64_t>(cfg.n_steps) * cfg.step_seconds;
  for (const auto& o : b.outages) {
    CHECK(b.truth.premise(o.premise_id) != nullptr);
    CHECK(o.start >= first);
    CHECK(o.restored > o.start);
    CHECK(o.restored <= last);
  }
}

TEST_CASE("export and reload round-trips") {
  auto dir = scratch_dir("roundtrip");
  SynthConfig cfg = small();
  cfg.outage_count = 2;
  cfg.missing_nominal_fraction = 0.2;
  SynthBundle b = synth::generate(cfg);
  synth::export_bundle(b, dir.string());

  auto assets = ingest::load_assets((dir / "meters.csv").string(),
                                    (dir / "transformers.csv").string());
  CHECK(assets.topology.edges == b.corrupted.edges);
  CHECK(assets.topology.premises.size() == b.corrupted.premises.size());
  for (const auto& p : b.corrupted.premises) {
    const auto* got = assets.topology.premise(p.id);
    REQUIRE(got);
    CHECK(got->nominal_voltage.has_value() == p.nominal_voltage.has_value());
  }

  SeriesFrame frame = ingest::load_series((dir / "series.csv").string(), cfg.step_seconds);
  CHECK(series_bytes(frame) == series_bytes(b.series));

  auto truth_edges = ingest::load_edges((dir / "truth.csv").string());
  CHECK(truth_edges == b.truth.edges);

  auto outages = ingest::load_outages((dir / "outages.csv").string());
  REQUIRE(outages.size() == b.outages.size());
  for (std::size_t i = 0; i < outages.size(); ++i) {
    CHECK(outages[i].premise_id == b.outages[i].premise_id);
    CHECK(outages[i].start == b.outages[i].start);
    CHECK(outages[i].restored == b.outages[i].restored);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("overload scenario plants measurable violations") {
  SynthConfig cfg = small();
  cfg.seed = 3;
  cfg.corruption_fraction = 0.15;
  SynthBundle b = synth::generate_overload_scenario(cfg);
  REQUIRE(b.overloads.size() == 2);

  std::set<double> ratings;
  for (const auto& ov : b.overloads) {
    ratings.insert(ov.rating_kva);
    const auto* t = b.corrupted.transformer(ov.transformer_id);
    REQUIRE(t);
    CHECK(t->rated_kva == ov.rating_kva);

    double limit_kw = ov.rating_kva * b.constraints.power_factor;
    CHECK(ov.peak_kw_corrupted > limit_kw);  // records claim an overload
    CHECK(ov.peak_kw_true < limit_kw);       // the wire itself is fine
    double target = ov.rating_kva == 10.0 ? 11.32 : 13.0;
    CHECK(ov.peak_kw_corrupted == doctest::Approx(target).epsilon(1e-4));

    // the planted move is the only discrepancy on that transformer
    CHECK(b.corrupted.edges.at(ov.moved_premise) == ov.transformer_id);
    CHECK(b.truth.edges.at(ov.moved_premise) == ov.donor_transformer);
  }
  CHECK(ratings == std::set<double>{10.0, 15.0});

  // the log still matches the diff after the extra surgery
  auto diff = diff_topologies(b.truth, b.corrupted);
  REQUIRE(diff.size() == b.corruption_log.size());
  for (std::size_t i = 0; i < diff.size(); ++i)
    CHECK(diff[i].premise_id == b.corruption_log[i].premise_id);
}

TEST_CASE("overload peaks hit the requested targets") {
  SynthConfig cfg = small();
  cfg.seed = 5;
  synth::OverloadConfig oc;
  oc.cases = {{10.0, 11.32, 5.5}};
  SynthBundle b = synth::generate_overload_scenario(cfg, oc);
  REQUIRE(b.overloads.size() == 1);
  CHECK(b.overloads[0].peak_kw_corrupted == doctest::Approx(11.32).epsilon(1e-4));
  CHECK(b.overloads[0].peak_kw_true == doctest::Approx(5.5).epsilon(1e-4));
}

TEST_CASE("config validation") {
  SynthConfig cfg = small();
  cfg.corruption_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small();
  cfg.premises_min = 9;
  cfg.premises_max = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small();
  cfg.inter_corr_target = 0.97;  // above intra
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small();
  cfg.n_transformers = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(small().validate());
}
