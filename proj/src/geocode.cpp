#include "gridtopo/geocode.hpp"

#include <cstdlib>
#include <thread>

#include "gridtopo/error.hpp"
#include "gridtopo/geo.hpp"
#include "gridtopo/parallel.hpp"
#include "httplib.h"
#include "json.hpp"

namespace gridtopo::ingest {
namespace {

std::string url_encode(const std::string& s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    bool safe = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
                c == '-' || c == '_' || c == '.' || c == '~';
    if (safe) {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xf];
    }
  }
  return out;
}

std::optional<double> json_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return std::nullopt;
  const auto& v = j.at(key);
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      std::size_t used = 0;
      double d = std::stod(v.get<std::string>(), &used);
      if (used == v.get<std::string>().size()) return d;
    } catch (...) {
    }
  }
  return std::nullopt;
}

GeocodeQuality parse_quality(const nlohmann::json& j) {
  if (!j.contains("quality") || !j.at("quality").is_string()) return GeocodeQuality::exact;
  const std::string q = j.at("quality").get<std::string>();
  if (q == "exact") return GeocodeQuality::exact;
  if (q == "interpolated") return GeocodeQuality::interpolated;
  if (q == "centroid") return GeocodeQuality::centroid;
  return GeocodeQuality::failed;
}

}  // namespace

std::string quality_name(GeocodeQuality q) {
  switch (q) {
    case GeocodeQuality::exact: return "exact";
    case GeocodeQuality::interpolated: return "interpolated";
    case GeocodeQuality::centroid: return "centroid";
    case GeocodeQuality::failed: return "failed";
  }
  return "failed";
}

FixtureGeocoder::FixtureGeocoder(std::map<std::string, GeoPoint> table)
    : table_(std::move(table)) {}

void FixtureGeocoder::add(const std::string& address, GeoPoint point) {
  table_[address] = point;
}

GeocodeResult FixtureGeocoder::resolve(const std::string& address) {
  calls_.fetch_add(1);
  auto it = table_.find(address);
  if (it == table_.end()) return {};
  return {it->second, GeocodeQuality::exact, name()};
}

GeocodeResult CachingGeocoder::resolve(const std::string& address) {
  {
    std::lock_guard lock(mu_);
    auto it = cache_.find(address);
    if (it != cache_.end()) return it->second;
  }
  // Resolve outside the lock so a slow backend does not serialize everything;
  // two threads may both miss and both call, the second insert is a no-op.
  GeocodeResult r = inner_.resolve(address);
  std::lock_guard lock(mu_);
  return cache_.emplace(address, std::move(r)).first->second;
}

HttpGeocoder::HttpGeocoder(HttpGeocoderConfig config) : config_(std::move(config)) {
  if (config_.host.empty()) throw ConfigError("geocoder host is required");
  if (config_.min_interval_s < 0) throw ConfigError("geocoder min interval must be >= 0");
}

GeocodeResult HttpGeocoder::resolve(const std::string& address) {
  {
    // serialize requests and honor the minimum spacing
    std::lock_guard lock(mu_);
    if (config_.min_interval_s > 0 &&
        last_request_ != std::chrono::steady_clock::time_point{}) {
      auto gate = last_request_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>(config_.min_interval_s));
      std::this_thread::sleep_until(gate);
    }
    last_request_ = std::chrono::steady_clock::now();
  }

  std::string query = config_.path + "?address=" + url_encode(address) + "&format=json";
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key && *key) query += "&key=" + url_encode(key);
  }

  httplib::Client cli(config_.host, config_.port);
  cli.set_connection_timeout(config_.timeout_s);
  cli.set_read_timeout(config_.timeout_s);
  auto res = cli.Get(query);
  if (!res)
    throw IoError("geocoder " + config_.host + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw IoError("geocoder " + config_.host + ": HTTP " + std::to_string(res->status));

  nlohmann::json body = nlohmann::json::parse(res->body, nullptr, false);
  if (body.is_discarded())
    throw IoError("geocoder " + config_.host + ": response is not JSON");
  if (body.is_array()) body = body.empty() ? nlohmann::json::object() : body.front();

  auto lat = json_number(body, "lat");
  auto lon = json_number(body, "lon");
  if (!lat || !lon) return {};
  GeoPoint p{*lat, *lon};
  if (!geo_valid(p)) return {};
  GeocodeQuality q = parse_quality(body);
  if (q == GeocodeQuality::failed) return {};
  return {p, q, name()};
}

GeocodeResult geocode(const std::string& address, GeocoderClient& client) {
  if (address.empty()) return {};
  GeocodeResult r = client.resolve(address);
  if (!r.point) {
    r.quality = GeocodeQuality::failed;
    return r;
  }
  if (r.quality == GeocodeQuality::failed) r.point.reset();
  return r;
}

RefineOutcome refine_locations(const std::vector<PremiseRecord>& premises,
                               GeocoderClient& client, double max_discrepancy_m,
                               std::size_t parallelism) {
  if (max_discrepancy_m < 0) throw ConfigError("max discrepancy must be >= 0");
  if (parallelism == 0) throw ConfigError("parallelism must be >= 1");

  std::vector<GeocodeResult> results(premises.size());
  parallel_for(premises.size(), parallelism, [&](std::size_t i) {
    if (!premises[i].address.empty()) results[i] = geocode(premises[i].address, client);
  });

  RefineOutcome out;
  out.premises = premises;
  for (std::size_t i = 0; i < premises.size(); ++i) {
    PremiseRecord& rec = out.premises[i];
    if (rec.address.empty()) continue;
    const GeocodeResult& r = results[i];
    if (!r.point) {
      out.failed.push_back(rec.id);
      continue;
    }
    if (!rec.location) {
      rec.location = r.point;
      out.filled.push_back(rec.id);
    } else if (geodist_m(*rec.location, *r.point) > max_discrepancy_m) {
      rec.location = r.point;
      out.replaced.push_back(rec.id);
    }
  }
  return out;
}

}  // namespace gridtopo::ingest
