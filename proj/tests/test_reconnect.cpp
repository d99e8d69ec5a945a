#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "gridtopo/error.hpp"
#include "gridtopo/reconnect.hpp"
#include "gridtopo/stats.hpp"

using namespace gridtopo;
using namespace gridtopo::reconnect;

namespace {

PremiseRecord at_lon(std::string id, double lon) {
  PremiseRecord p;
  p.id = std::move(id);
  p.location = GeoPoint{0.0, lon};
  return p;
}

// two service clusters on the equator; X physically lives with T2's premises
// but the records put it on T1
struct Fixture {
  Topology topo;
  SeriesFrame series;

  Fixture() {
    topo.transformers.push_back({"T1", {0.0, 0.0}, 50.0, {}});
    topo.transformers.push_back({"T2", {0.0, 0.01}, 50.0, {}});
    topo.premises = {at_lon("A", 0.0001), at_lon("B", 0.0002), at_lon("C", 0.0099),
                     at_lon("D", 0.0101), at_lon("X", 0.0098)};
    topo.edges = {{"A", "T1"}, {"B", "T1"}, {"C", "T2"}, {"D", "T2"}, {"X", "T1"}};
    topo.finalize();

    const int n = 128;
    for (int i = 0; i < n; ++i) series.timestamps.push_back(i * 900);
    std::mt19937_64 g1(101), g2(202), gn(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> tiny(0.0, 0.01);
    std::vector<double> base1(n), base2(n);
    for (int i = 0; i < n; ++i) {
      base1[i] = u(g1);
      base2[i] = u(g2);
    }
    auto put = [&](const std::string& id, const std::vector<double>& base) {
      auto& va = series.premises[id].va;
      for (int i = 0; i < n; ++i) va.push_back(base[i] + tiny(gn));
    };
    put("A", base1);
    put("B", base1);
    put("C", base2);
    put("D", base2);
    put("X", base2);
  }
};

}  // namespace

TEST_CASE("candidate sets rank by distance and keep the recorded transformer") {
  Topology t;
  t.transformers.push_back({"T1", {0.0, 0.0}, 50.0, {}});
  t.transformers.push_back({"T2", {0.0, 0.01}, 50.0, {}});
  t.transformers.push_back({"T3", {0.0, 0.02}, 50.0, {}});
  t.transformers.push_back({"T4", {0.0, 0.03}, 50.0, {}});
  t.premises = {at_lon("E", 0.0005), at_lon("M2", 0.0101), at_lon("M3", 0.0199)};
  t.edges = {{"E", "T3"}, {"M2", "T2"}, {"M3", "T3"}};
  t.finalize();

  // nearest two are T1 and T2; the recorded T3 rides along
  auto c = build_candidates(t, "E", 2);
  CHECK(c.outlier == "E");
  CHECK(c.transformers == std::vector<std::string>{"T1", "T2", "T3"});
  CHECK(c.premises == std::vector<std::string>{"M2", "M3"});

  // recorded transformer already among the nearest: no extra entry
  Topology t2 = t;
  t2.edges["E"] = "T1";
  auto c2 = build_candidates(t2, "E", 2);
  CHECK(c2.transformers == std::vector<std::string>{"T1", "T2"});

  CHECK_THROWS_AS(build_candidates(t, "nope", 2), StructuralError);
  CHECK_THROWS_AS(build_candidates(t, "E", 1), ConfigError);
  CHECK_THROWS_AS(build_candidates(t, "E", 5), StructuralError);

  Topology blind = t;
  blind.premises[0].location.reset();  // E sorts first
  CHECK_THROWS_AS(build_candidates(blind, "E", 2), UnresolvableError);
}

TEST_CASE("featurize fills gaps, z-scores, and excludes the hopeless") {
  Topology t;
  t.transformers.push_back({"T1", {0.0, 0.0}, 50.0, {}});
  PremiseRecord a;
  a.id = "A";
  a.location = GeoPoint{44.0, -122.0};  // exactly representable, z-scores land on +/-1
  PremiseRecord b;
  b.id = "B";
  b.location = GeoPoint{46.0, -122.0};
  PremiseRecord lost;
  lost.id = "L";  // no location
  PremiseRecord mute;
  mute.id = "M";  // no voltage
  mute.location = GeoPoint{45.001, -122.0};
  t.premises = {a, b, lost, mute};
  t.finalize();

  SeriesFrame f;
  f.timestamps = {0, 900, 1800};
  f.premises["A"].va = {1.0, kMissing, 3.0};  // mean 2 fills the hole
  f.premises["B"].va = {3.0, 4.0, 5.0};
  f.premises["L"].va = {1.0, 1.0, 1.0};
  f.premises["M"].va = {kMissing, kMissing, kMissing};

  auto out = featurize(t, {"A", "B", "L", "M", "ghost"}, f);
  CHECK(out.excluded == std::vector<std::string>{"L", "M", "ghost"});
  REQUIRE(out.features.size() == 2);
  CHECK(out.features[0].premise_id == "A");
  REQUIRE(out.features[0].values.size() == 5);  // 3 samples + lat + lon

  // two points: every non-constant dimension z-scores to -1 / +1
  for (std::size_t d = 0; d < 4; ++d) {
    CHECK(out.features[0].values[d] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(out.features[1].values[d] == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(out.features[0].values[4] == 0.0);  // shared longitude collapses
  CHECK(out.features[1].values[4] == 0.0);
}

TEST_CASE("cluster-transformer pairing") {
  Fixture fx;
  CandidateSet c = build_candidates(fx.topo, "X", 2);
  REQUIRE(c.transformers == std::vector<std::string>{"T2", "T1"});

  auto majority = pair_cluster_transformer(fx.topo, c, {"X", "C", "D", "A"});
  CHECK(majority == "T2");  // two members beat one

  auto lonely = pair_cluster_transformer(fx.topo, c, {"X"});
  CHECK_FALSE(lonely.has_value());

  // 1-1 tie between A (T1) and C (T2); the cluster sits near T2
  auto tie = pair_cluster_transformer(fx.topo, c, {"X", "A", "C"});
  CHECK(tie == "T2");  // mean lon ~0.0066, closer to T2 at 0.01
}

TEST_CASE("mutual information guard rails") {
  std::vector<double> x = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
  std::vector<double> y = {2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0};
  double m = mutual_information(x, y, 4, 4);
  CHECK(m == mutual_information(y, x, 4, 4));
  CHECK(m > 0.0);

  std::vector<double> holey = {1.0, kMissing, 3.0, kMissing, 5.0, kMissing, 7.0, kMissing};
  CHECK_THROWS_AS(mutual_information(holey, y, 4, 5), DataError);  // 4 shared < 5
  CHECK_NOTHROW(mutual_information(holey, y, 4, 4));
}

TEST_CASE("mi reconnection follows the information") {
  Fixture fx;
  CandidateSet c = build_candidates(fx.topo, "X", 2);
  Reassignment r = reconnect_mi(fx.topo, fx.series, c, 8, 32);
  CHECK(r.premise_id == "X");
  CHECK(r.old_transformer == "T1");
  CHECK(r.new_transformer == "T2");
  CHECK(r.method == Method::mutual_information);

  // outlier with no telemetry cannot be scored
  SeriesFrame dark = fx.series;
  dark.premises["X"].va.assign(dark.size(), kMissing);
  CHECK_THROWS_AS(reconnect_mi(fx.topo, dark, c, 8, 32), UnresolvableError);

  // members with no telemetry leave nothing to compare against
  SeriesFrame mute = fx.series;
  for (const auto& id : {"A", "B", "C", "D"})
    mute.premises[id].va.assign(mute.size(), kMissing);
  CHECK_THROWS_AS(reconnect_mi(fx.topo, mute, c, 8, 32), UnresolvableError);
}

TEST_CASE("kmeans reconnection clusters the outlier home") {
  Fixture fx;
  CandidateSet c = build_candidates(fx.topo, "X", 2);
  ReconnectConfig cfg;
  cfg.mi_bins = 8;
  cfg.min_overlap = 32;
  cfg.seed = 9;

  Reassignment r = reconnect::reconnect(fx.topo, fx.series, c, cfg);
  CHECK(r.premise_id == "X");
  CHECK(r.old_transformer == "T1");
  CHECK(r.new_transformer == "T2");
  CHECK(r.method == Method::kmeans);
  CHECK(r.cluster_index < 2);

  // same call, same answer
  Reassignment again = reconnect::reconnect(fx.topo, fx.series, c, cfg);
  CHECK(again.new_transformer == r.new_transformer);
  CHECK(again.cluster_index == r.cluster_index);

  cfg.mi_only = true;
  Reassignment mi = reconnect::reconnect(fx.topo, fx.series, c, cfg);
  CHECK(mi.method == Method::mutual_information);
  CHECK(mi.new_transformer == "T2");
}

TEST_CASE("a singleton cluster falls back to mutual information") {
  Fixture fx;
  // make X's trace unlike anything else so it clusters alone
  auto& xva = fx.series.premises["X"].va;
  for (std::size_t i = 0; i < xva.size(); ++i) xva[i] = i % 2 == 0 ? 0.0 : 1000.0;

  CandidateSet c = build_candidates(fx.topo, "X", 2);
  ReconnectConfig cfg;
  cfg.mi_bins = 8;
  cfg.min_overlap = 32;
  Reassignment r = reconnect::reconnect(fx.topo, fx.series, c, cfg);
  CHECK(r.method == Method::mutual_information);
  bool known = r.new_transformer == "T1" || r.new_transformer == "T2";
  CHECK(known);
}

TEST_CASE("reassignment csv and json round-trip") {
  Reassignment a;
  a.premise_id = "E1";
  a.old_transformer = "T1";
  a.new_transformer = "T2";
  a.method = Method::kmeans;
  Reassignment b;
  b.premise_id = "E2";
  b.old_transformer = "T3";
  b.new_transformer = "T3";
  b.method = Method::mutual_information;

  std::ostringstream buf;
  write_reassignments_csv(buf, {a, b});
  auto path = std::filesystem::temp_directory_path() /
              ("gt_moves_" + std::to_string(::getpid()) + ".csv");
  std::ofstream(path) << buf.str();
  auto back = read_reassignments_csv(path.string());
  std::filesystem::remove(path);

  REQUIRE(back.size() == 2);
  CHECK(back[0].premise_id == "E1");
  CHECK(back[0].new_transformer == "T2");
  CHECK(back[0].method == Method::kmeans);
  CHECK(back[1].method == Method::mutual_information);

  auto j = reassignments_to_json({a, b});
  REQUIRE(j.size() == 2);
  CHECK(j[0]["method"] == "kmeans");
  CHECK(j[1]["old_transformer"] == "T3");

  std::ofstream(path) << "PREMISE_ID,OLD_XFMR,NEW_XFMR,METHOD\nE1,T1,T2,sorcery\n";
  CHECK_THROWS_AS(read_reassignments_csv(path.string()), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("reconnect config validation") {
  ReconnectConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.k = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.restarts = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.mi_bins = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.min_overlap = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.max_iter = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
