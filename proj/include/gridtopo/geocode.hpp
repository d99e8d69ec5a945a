#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gridtopo/model.hpp"

namespace gridtopo::ingest {

enum class GeocodeQuality { exact, interpolated, centroid, failed };

std::string quality_name(GeocodeQuality q);

// point absent exactly when quality == failed
struct GeocodeResult {
  std::optional<GeoPoint> point;
  GeocodeQuality quality = GeocodeQuality::failed;
  std::string source;
};

class GeocoderClient {
 public:
  virtual ~GeocoderClient() = default;
  // Unresolvable addresses come back quality=failed; transport problems
  // throw IoError (retryable). Implementations must be callable from
  // multiple threads.
  virtual GeocodeResult resolve(const std::string& address) = 0;
  virtual std::string name() const = 0;
};

// Exact-match lookup table; the default offline backend for tests and CI.
class FixtureGeocoder : public GeocoderClient {
 public:
  FixtureGeocoder() = default;
  explicit FixtureGeocoder(std::map<std::string, GeoPoint> table);
  void add(const std::string& address, GeoPoint point);

  GeocodeResult resolve(const std::string& address) override;
  std::string name() const override { return "fixture"; }
  std::size_t calls() const { return calls_.load(); }

 private:
  std::map<std::string, GeoPoint> table_;
  std::atomic<std::size_t> calls_{0};
};

// Memoizes per address on top of any backend.
class CachingGeocoder : public GeocoderClient {
 public:
  explicit CachingGeocoder(GeocoderClient& inner) : inner_(inner) {}
  GeocodeResult resolve(const std::string& address) override;
  std::string name() const override { return inner_.name() + "+cache"; }

 private:
  GeocoderClient& inner_;
  std::mutex mu_;
  std::map<std::string, GeocodeResult> cache_;
};

struct HttpGeocoderConfig {
  std::string host;
  int port = 80;
  std::string path = "/search";
  std::string api_key_env;      // env var holding the key; empty = no key sent
  double min_interval_s = 0.0;  // spacing between requests (rate limit)
  int timeout_s = 10;
};

// GET {path}?address=<urlencoded>&format=json[&key=...]; expects a JSON
// object with "lat"/"lon" fields (numbers or numeric strings) and an
// optional "quality" field naming one of the GeocodeQuality values.
// Empty/absent lat-lon -> failed. Transport or HTTP-level failure -> IoError.
class HttpGeocoder : public GeocoderClient {
 public:
  explicit HttpGeocoder(HttpGeocoderConfig config);
  GeocodeResult resolve(const std::string& address) override;
  std::string name() const override { return "http"; }

 private:
  HttpGeocoderConfig config_;
  std::mutex mu_;
  std::chrono::steady_clock::time_point last_request_{};
};

// pre: non-empty address (empty -> quality=failed, never an exception)
GeocodeResult geocode(const std::string& address, GeocoderClient& client);

struct RefineOutcome {
  std::vector<PremiseRecord> premises;
  std::vector<std::string> filled;    // absent location adopted from geocode
  std::vector<std::string> replaced;  // recorded location overridden (flagged)
  std::vector<std::string> failed;    // address present but geocode failed
};

// For each premise with an address: geocode it; adopt the point when the
// record has none; replace the record when they disagree by more than
// max_discrepancy_m; otherwise keep the record. Idempotent. parallelism
// bounds concurrent client calls; output is ordered by input, so results
// do not depend on the schedule.
RefineOutcome refine_locations(const std::vector<PremiseRecord>& premises,
                               GeocoderClient& client, double max_discrepancy_m = 500.0,
                               std::size_t parallelism = 1);

}  // namespace gridtopo::ingest
