#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "gridtopo/geo.hpp"
#include "gridtopo/rng.hpp"

using namespace gridtopo;

namespace {

GeoPoint random_point(Rng& rng) {
  // uniform on the sphere so the polar caps get exercised too
  double u = rng.next_double();
  double lat = std::asin(2.0 * u - 1.0) * 180.0 / M_PI;
  double lon = rng.uniform(-180.0, 180.0);
  return {lat, lon};
}

}  // namespace

TEST_CASE("one degree along the equator") {
  double d = geodist_m({0.0, 0.0}, {0.0, 1.0});
  CHECK(d == doctest::Approx(M_PI * kEarthRadiusM / 180.0).epsilon(1e-12));
  CHECK(std::abs(d - 111195.0) <= 1.0);
}

TEST_CASE("known spans") {
  // quarter of a meridian
  CHECK(geodist_m({0.0, 0.0}, {90.0, 0.0}) ==
        doctest::Approx(M_PI * kEarthRadiusM / 2.0).epsilon(1e-9));
  // antipodes: half the circumference, no overflow or NaN
  double far = geodist_m({0.0, 0.0}, {0.0, 180.0});
  CHECK(far == doctest::Approx(M_PI * kEarthRadiusM).epsilon(1e-9));
  // longitude circles shrink with latitude
  CHECK(geodist_m({60.0, 0.0}, {60.0, 1.0}) <
        geodist_m({0.0, 0.0}, {0.0, 1.0}));
}

TEST_CASE("metric axioms on random points") {
  Rng rng(20240921);
  for (int i = 0; i < 400; ++i) {
    GeoPoint a = random_point(rng), b = random_point(rng), c = random_point(rng);
    double ab = geodist_m(a, b), ba = geodist_m(b, a);
    double ac = geodist_m(a, c), cb = geodist_m(c, b);

    CHECK(geodist_m(a, a) == 0.0);
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));  // symmetric
    // triangle inequality with relative slack for the float trig
    CHECK(ab <= ac + cb + 1e-6 * (ac + cb + 1.0));
    CHECK(ab <= M_PI * kEarthRadiusM * (1.0 + 1e-12));
  }
}

TEST_CASE("small displacements stay proportional") {
  // 1e-3 degrees of latitude anywhere is ~111.2 m
  Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    GeoPoint p = random_point(rng);
    if (std::abs(p.lat) > 89.0) continue;
    double d = geodist_m(p, {p.lat + 1e-3, p.lon});
    CHECK(d == doctest::Approx(M_PI * kEarthRadiusM / 180.0 * 1e-3).epsilon(1e-6));
  }
}

TEST_CASE("coordinate validation") {
  CHECK(geo_valid({0.0, 0.0}));
  CHECK(geo_valid({-90.0, 180.0}));
  CHECK(geo_valid({90.0, -180.0}));
  CHECK_FALSE(geo_valid({90.1, 0.0}));
  CHECK_FALSE(geo_valid({0.0, 180.5}));
  CHECK_FALSE(geo_valid({std::nan(""), 0.0}));
}
