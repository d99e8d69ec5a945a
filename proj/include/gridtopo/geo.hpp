#pragma once

namespace gridtopo {

// Mean Earth radius used by the haversine distance.
inline constexpr double kEarthRadiusM = 6371008.8;

struct GeoPoint {
  double lat = 0.0;  // decimal degrees, [-90, 90]
  double lon = 0.0;  // decimal degrees, [-180, 180]
};

bool geo_valid(const GeoPoint& p);

// Great-circle distance in meters via the haversine formula on a sphere of
// radius kEarthRadiusM. Symmetric and non-negative; well behaved at antipodes.
double geodist_m(const GeoPoint& a, const GeoPoint& b);

}  // namespace gridtopo
