#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "gridtopo/error.hpp"
#include "gridtopo/model.hpp"
#include "gridtopo/stats.hpp"

using namespace gridtopo;

namespace {

Topology tiny() {
  Topology t;
  t.transformers.push_back({"T1", {45.0, -122.0}, 50.0, {}});
  t.transformers.push_back({"T2", {45.01, -122.0}, 25.0, {}});
  PremiseRecord a;
  a.id = "E1";
  a.location = GeoPoint{45.0001, -122.0};
  PremiseRecord b;
  b.id = "E2";
  b.location = GeoPoint{45.0101, -122.0};
  t.premises = {a, b};
  t.edges = {{"E1", "T1"}, {"E2", "T2"}};
  t.finalize();
  t.validate();
  return t;
}

}  // namespace

TEST_CASE("phase labels") {
  auto p = PhaseLabel::parse("AB");
  REQUIRE(p);
  CHECK(p->str() == "AB");
  CHECK(PhaseLabel::parse("abc")->str() == "ABC");
  CHECK_FALSE(PhaseLabel::parse("XD"));
  CHECK(PhaseLabel::parse("")->str() == "");  // unknown phase is allowed
}

TEST_CASE("lookups after finalize") {
  Topology t = tiny();
  REQUIRE(t.premise("E1"));
  CHECK(t.premise("E1")->id == "E1");
  CHECK(t.premise("nope") == nullptr);
  REQUIRE(t.transformer("T2"));
  CHECK(t.transformer("T2")->rated_kva == 25.0);
}

TEST_CASE("validate rejects broken wiring") {
  Topology t = tiny();
  t.edges["E1"] = "T9";
  CHECK_THROWS_AS(t.validate(), StructuralError);

  Topology dup = tiny();
  dup.premises.push_back(dup.premises[0]);
  dup.finalize();
  CHECK_THROWS_AS(dup.validate(), StructuralError);

  Topology ghost = tiny();
  ghost.edges["E9"] = "T1";  // edge for a premise that does not exist
  CHECK_THROWS_AS(ghost.validate(), StructuralError);
}

TEST_CASE("grouping includes idle transformers") {
  Topology t = tiny();
  t.transformers.push_back({"T3", {45.02, -122.0}, std::nullopt, {}});
  t.finalize();
  auto groups = group_by_transformer(t);
  REQUIRE(groups.count("T3"));
  CHECK(groups.at("T3").empty());
  CHECK(groups.at("T1") == std::vector<std::string>{"E1"});
}

TEST_CASE("diff and accuracy") {
  Topology truth = tiny();
  Topology est = truth;
  CHECK(diff_topologies(truth, est).empty());
  CHECK(topology_accuracy(truth, est) == 1.0);

  est.edges["E1"] = "T2";
  auto diff = diff_topologies(truth, est);
  REQUIRE(diff.size() == 1);
  CHECK(diff[0].premise_id == "E1");
  CHECK(diff[0].transformer_a == "T1");
  CHECK(diff[0].transformer_b == "T2");
  CHECK(topology_accuracy(truth, est) == 0.5);

  Topology bigger = est;
  PremiseRecord extra;
  extra.id = "E3";
  bigger.premises.push_back(extra);
  bigger.finalize();
  CHECK_THROWS_AS(diff_topologies(truth, bigger), StructuralError);
}

TEST_CASE("constraint validation") {
  ConstraintSet c;
  c.v_min = 228.0;
  c.v_max = 252.0;
  c.power_factor = 0.8;
  CHECK_NOTHROW(c.validate());
  c.power_factor = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.power_factor = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.power_factor = 0.8;
  c.v_max = c.v_min;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("nominal band helper") {
  ConstraintSet c = ConstraintSet::for_nominal(240.0);
  CHECK(c.v_min == doctest::Approx(228.0).epsilon(1e-12));
  CHECK(c.v_max == doctest::Approx(252.0).epsilon(1e-12));
  CHECK(c.power_factor == 0.8);
}

TEST_CASE("primary voltage channel selection") {
  ChannelSet ch;
  ch.va = {kMissing, kMissing};
  ch.vb = {1.0, 2.0};
  ch.vc = {kMissing, 3.0};
  const std::vector<double>* v = primary_voltage(ch);
  REQUIRE(v);
  CHECK(v == &ch.vb);  // phase A empty, first channel with data wins

  ch.va = {5.0, kMissing};
  CHECK(primary_voltage(ch) == &ch.va);

  ChannelSet dead;
  dead.va = {kMissing};
  CHECK(primary_voltage(dead) == nullptr);
  CHECK_FALSE(has_data(dead.va));
}

TEST_CASE("series frame channel lookup") {
  SeriesFrame f;
  f.timestamps = {0, 900};
  f.premises["E1"].va = {1.0, 2.0};
  CHECK(f.size() == 2);
  CHECK(f.channels("E1") != nullptr);
  CHECK(f.channels("E2") == nullptr);
}
