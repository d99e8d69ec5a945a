#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gridtopo/detect.hpp"
#include "gridtopo/error.hpp"
#include "gridtopo/stats.hpp"

using namespace gridtopo;
using namespace gridtopo::detect;

namespace {

// transformers and premises strung along the equator so distances are
// proportional to longitude offsets and ratios come out exact
Topology line_topology() {
  Topology t;
  t.transformers.push_back({"T1", {0.0, 0.0}, 50.0, {}});
  t.transformers.push_back({"T2", {0.0, 0.01}, 50.0, {}});
  return t;
}

PremiseRecord at_lon(std::string id, double lon) {
  PremiseRecord p;
  p.id = std::move(id);
  p.location = GeoPoint{0.0, lon};
  return p;
}

}  // namespace

TEST_CASE("nearest transformer and ties") {
  Topology t = line_topology();
  t.finalize();
  auto near = nearest_transformer(t, GeoPoint{0.0, 0.002});
  CHECK(near.id == "T1");
  CHECK(near.dist_m == doctest::Approx(0.002 * M_PI / 180.0 * kEarthRadiusM).epsilon(1e-9));

  // dead center: both 0.005 degrees away, smaller id wins
  CHECK(nearest_transformer(t, GeoPoint{0.0, 0.005}).id == "T1");

  PremiseRecord lost;
  lost.id = "E1";
  CHECK_THROWS_AS(nearest_transformer(t, lost), UnresolvableError);

  Topology empty;
  CHECK_THROWS_AS(nearest_transformer(empty, GeoPoint{0.0, 0.0}), StructuralError);
}

TEST_CASE("geographic flags follow the distance ratio") {
  Topology t = line_topology();
  // E1 sits a tenth of the way to T2 but the records say T2: ratio 9
  t.premises = {at_lon("E1", 0.001), at_lon("E2", 0.0002)};
  t.edges = {{"E1", "T2"}, {"E2", "T1"}};  // E2 is honest, ratio 1
  t.finalize();

  auto out = flag_geographic(t, 3.0);
  REQUIRE(out.flags.size() == 1);
  const OutlierFlag& f = out.flags[0];
  CHECK(f.premise_id == "E1");
  CHECK(f.transformer == "T2");
  CHECK(f.nearest_transformer == "T1");
  CHECK(f.ratio == doctest::Approx(9.0).epsilon(1e-9));
  CHECK(f.dist_m == doctest::Approx(9.0 * f.nearest_dist_m).epsilon(1e-9));
  CHECK(f.reason == FlagReason::geographic);

  CHECK(flag_geographic(t, 10.0).flags.empty());  // same data, laxer threshold
  CHECK_THROWS_AS(flag_geographic(t, 1.0), ConfigError);
  CHECK_THROWS_AS(flag_geographic(t, 0.5), ConfigError);
}

TEST_CASE("geographic edge cases") {
  Topology t = line_topology();
  PremiseRecord on_top = at_lon("E1", 0.01);  // exactly at T2
  PremiseRecord blind;
  blind.id = "E2";
  PremiseRecord orphan = at_lon("E3", 0.0);
  t.premises = {on_top, blind, orphan};
  t.edges = {{"E1", "T1"}, {"E2", "T1"}};  // E3 has no assignment
  t.finalize();

  auto out = flag_geographic(t, 3.0);
  REQUIRE(out.flags.size() == 1);
  CHECK(out.flags[0].premise_id == "E1");
  CHECK(std::isinf(out.flags[0].ratio));  // nearest distance is zero
  CHECK(out.skipped == std::vector<std::string>{"E2", "E3"});

  // sitting on the recorded transformer is a perfect record, not a flag
  Topology honest = line_topology();
  honest.premises = {at_lon("E1", 0.01)};
  honest.edges = {{"E1", "T2"}};
  honest.finalize();
  CHECK(flag_geographic(honest, 3.0).flags.empty());
}

TEST_CASE("flag count shrinks as tau grows") {
  Topology t = line_topology();
  // ratios 2, 4, 6 against T2 at increasing offsets past it
  t.premises = {at_lon("A", 0.01 / 3.0), at_lon("B", 0.002), at_lon("C", 0.01 / 7.0)};
  t.edges = {{"A", "T2"}, {"B", "T2"}, {"C", "T2"}};
  t.finalize();

  auto count = [&](double tau) { return flag_geographic(t, tau).flags.size(); };
  CHECK(count(1.5) == 3);
  CHECK(count(3.0) == 2);
  CHECK(count(5.0) == 1);
  CHECK(count(7.0) == 0);

  auto tight = flag_geographic(t, 3.0).flags;
  auto loose = flag_geographic(t, 5.0).flags;
  for (const auto& f : loose) {
    bool present = false;
    for (const auto& g : tight) present |= g.premise_id == f.premise_id;
    CHECK(present);  // raising tau never flags anything new
  }
}

TEST_CASE("electrical flags find the stranger in the cohort") {
  Topology t = line_topology();
  t.premises = {at_lon("P1", 0.0001), at_lon("P2", 0.0002), at_lon("P3", 0.0003),
                at_lon("P4", 0.0004), at_lon("P5", 0.0098)};
  t.edges = {{"P1", "T1"}, {"P2", "T1"}, {"P3", "T1"}, {"P4", "T1"}, {"P5", "T2"}};
  t.finalize();

  SeriesFrame f;
  const int n = 32;
  for (int i = 0; i < n; ++i) f.timestamps.push_back(i * 900);
  auto& p1 = f.premises["P1"].va;
  auto& p2 = f.premises["P2"].va;
  auto& p3 = f.premises["P3"].va;
  auto& p4 = f.premises["P4"].va;
  f.premises["P5"].va.assign(n, kMissing);  // meters but no telemetry
  for (int i = 0; i < n; ++i) {
    double phase = 2.0 * M_PI * i / 16.0;
    p1.push_back(std::sin(phase));
    p2.push_back(std::sin(phase) + 0.01 * (i % 2 == 0 ? 1.0 : -1.0));
    p3.push_back(std::cos(phase));  // orthogonal over whole periods
    p4.push_back(i < 8 ? std::sin(phase) : kMissing);  // too little overlap
  }

  auto out = flag_electrical(t, f, 0.5, 16);
  REQUIRE(out.flags.size() == 1);
  CHECK(out.flags[0].premise_id == "P3");
  CHECK(out.flags[0].transformer == "T1");
  CHECK(out.flags[0].reason == FlagReason::electrical);
  CHECK(out.flags[0].nearest_transformer == "T1");  // geometry still filled in

  // P4 has data but never reaches min_overlap with anyone: not evaluable,
  // not flagged; P5's group collapses to one usable member and is skipped
  CHECK(out.skipped_premises == std::vector<std::string>{"P5"});
  CHECK(out.skipped_groups == std::vector<std::string>{"T2"});

  CHECK_THROWS_AS(flag_electrical(t, f, 1.0, 16), ConfigError);
  CHECK_THROWS_AS(flag_electrical(t, f, -1.0, 16), ConfigError);
  CHECK_THROWS_AS(flag_electrical(t, f, 0.5, 1), ConfigError);
}

TEST_CASE("merging keeps geographic numbers and upgrades the reason") {
  OutlierFlag geo;
  geo.premise_id = "E1";
  geo.transformer = "T2";
  geo.nearest_transformer = "T1";
  geo.dist_m = 900.0;
  geo.nearest_dist_m = 100.0;
  geo.ratio = 9.0;
  geo.reason = FlagReason::geographic;

  OutlierFlag elec = geo;
  elec.dist_m = elec.nearest_dist_m = elec.ratio = kMissing;
  elec.reason = FlagReason::electrical;

  OutlierFlag other;
  other.premise_id = "E5";
  other.transformer = "T1";
  other.reason = FlagReason::electrical;

  auto merged = merge_flags({geo}, {elec, other});
  REQUIRE(merged.size() == 2);
  CHECK(merged[0].premise_id == "E1");
  CHECK(merged[0].reason == FlagReason::both);
  CHECK(merged[0].ratio == 9.0);  // geographic numbers survive the merge
  CHECK(merged[1].premise_id == "E5");
  CHECK(merged[1].reason == FlagReason::electrical);

  auto geo_only = merge_flags({geo}, {});
  REQUIRE(geo_only.size() == 1);
  CHECK(geo_only[0].reason == FlagReason::geographic);
}

TEST_CASE("flag csv round-trip") {
  OutlierFlag a;
  a.premise_id = "E1";
  a.transformer = "T2";
  a.nearest_transformer = "T1";
  a.dist_m = 901.25;
  a.nearest_dist_m = 0.0;
  a.ratio = std::numeric_limits<double>::infinity();
  a.reason = FlagReason::both;

  OutlierFlag b;
  b.premise_id = "E2";
  b.transformer = "T1";
  b.dist_m = b.nearest_dist_m = b.ratio = kMissing;  // no location
  b.reason = FlagReason::electrical;

  std::ostringstream buf;
  write_flags_csv(buf, {a, b});

  auto dir = std::filesystem::temp_directory_path();
  auto path = dir / ("gt_flags_" + std::to_string(::getpid()) + ".csv");
  std::ofstream(path) << buf.str();
  auto back = read_flags_csv(path.string());
  std::filesystem::remove(path);

  REQUIRE(back.size() == 2);
  CHECK(back[0].premise_id == "E1");
  CHECK(back[0].transformer == "T2");
  CHECK(back[0].nearest_transformer == "T1");
  CHECK(back[0].dist_m == 901.25);
  CHECK(back[0].nearest_dist_m == 0.0);
  CHECK(std::isinf(back[0].ratio));
  CHECK(back[0].reason == FlagReason::both);
  CHECK(std::isnan(back[1].dist_m));
  CHECK(back[1].reason == FlagReason::electrical);

  auto j = flags_to_json({a, b});
  REQUIRE(j.size() == 2);
  CHECK(j[0]["reason"] == "both");
  CHECK(j[0]["ratio"] == "inf");
  CHECK(j[1]["dist_m"] == "");
}
