#include "gridtopo/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "gridtopo/csv.hpp"
#include "gridtopo/stats.hpp"

namespace gridtopo::report {
namespace {

using nlohmann::ordered_json;

std::string num(double v, int digits = 2) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// sections may be absent in a stopped run; read defensively
const ordered_json* section(const ordered_json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return nullptr;
  return &*it;
}

double num_field(const ordered_json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) return std::nan("");
  if (it->is_number()) return it->get<double>();
  if (it->is_string()) {
    auto v = parse_double_cell(it->get<std::string>());
    return v ? *v : std::nan("");
  }
  return std::nan("");
}

}  // namespace

std::string render_text(const ordered_json& canonical,
                        const std::vector<std::pair<std::string, double>>& stage_seconds) {
  std::ostringstream out;
  out << "gridtopo run report\n" << "===================\n";

  if (const auto* in = section(canonical, "input")) {
    out << "input: " << in->value("premises", 0) << " premises, "
        << in->value("transformers", 0) << " transformers, " << in->value("timesteps", 0)
        << " steps at " << in->value("interval_s", 0) << " s\n";
    std::string start = in->value("start", ""), end = in->value("end", "");
    if (!start.empty()) out << "       " << start << " .. " << end << "\n";
    if (in->value("outages_applied", 0) > 0)
      out << "       " << in->value("outages_applied", 0) << " outages applied\n";
  }

  if (const auto* g = section(canonical, "geocode")) {
    if (!g->value("enabled", false)) {
      out << "geocode: disabled\n";
    } else {
      out << "geocode: backend " << g->value("backend", "?") << ", "
          << g->at("filled").size() << " filled, " << g->at("replaced").size()
          << " replaced, " << g->at("failed").size() << " failed\n";
    }
  }

  if (const auto* c = section(canonical, "cleaning")) {
    auto total = [](const ordered_json& per_premise) {
      std::size_t t = 0;
      for (const auto& [pid, n] : per_premise.items()) t += n.get<std::size_t>();
      return t;
    };
    out << "cleaning: kept " << c->value("premises_kept", 0) << " premises; dropped "
        << c->at("dropped_incomplete").size() << " incomplete, "
        << c->at("dropped_flatline").size() << " flatline; removed "
        << total(c->at("samples_removed_range")) << " range + "
        << total(c->at("samples_removed_iqr")) << " iqr samples; inferred "
        << c->at("inferred_nominal").size() << " nominals ("
        << c->at("nominal_unresolved").size() << " unresolved)\n";
  }

  if (const auto* d = section(canonical, "detection")) {
    out << "detection: " << d->at("flags").size() << " flagged (geographic "
        << d->value("geographic", 0) << ", electrical " << d->value("electrical", 0)
        << ", both " << d->value("both", 0) << ")\n";
  }

  if (const auto* r = section(canonical, "reconnection")) {
    std::size_t km = 0, mi = 0;
    for (const auto& m : r->at("reassignments"))
      (m.value("method", "") == "kmeans" ? km : mi) += 1;
    out << "reconnection: " << r->at("reassignments").size() << " moved (" << km
        << " kmeans, " << mi << " mutual_information), " << r->at("confirmed").size()
        << " confirmed in place, " << r->at("unreassigned").size() << " unresolved\n";
  }

  if (const auto* c = section(canonical, "confidence")) {
    const auto& entries = c->at("entries");
    std::size_t shown = std::min<std::size_t>(entries.size(), 10);
    out << "confidence (top " << shown << " of " << entries.size() << "):\n";
    if (shown) {
      out << "  PREMISE        OLD        NEW        LEVEL    FLAG\n";
      for (std::size_t i = 0; i < shown; ++i) {
        const auto& e = entries[i];
        char line[160];
        std::snprintf(line, sizeof(line), "  %-14s %-10s %-10s %-8s %s\n",
                      e.value("premise_id", "").c_str(),
                      e.value("old_transformer", "").c_str(),
                      e.value("new_transformer", "").c_str(),
                      num(num_field(e, "level"), 4).c_str(),
                      e.value("needs_review", false) ? "NEEDS_REVIEW" : "ok");
        out << line;
      }
    }
    std::size_t review = 0;
    for (const auto& e : entries)
      if (e.value("needs_review", false)) ++review;
    out << "  below review threshold: " << review << "\n";
  }

  if (const auto* v = section(canonical, "validation")) {
    out << "validation: " << v->at("capacity_violations").size() << " capacity, "
        << v->at("voltage_violations").size() << " voltage violations before refinement\n";
    for (const auto& e : v->at("capacity_violations")) {
      out << "  " << e.value("id", "") << "  observed " << num(num_field(e, "observed"))
          << "  limit " << num(num_field(e, "limit")) << " " << e.value("unit", "") << "\n";
    }
  }

  if (const auto* r = section(canonical, "refinement")) {
    out << "refinement: " << r->at("moves").size() << " moves, "
        << r->at("unresolved").size() << " transformers unresolved; "
        << r->at("capacity_violations_after").size() << " capacity violations remain\n";
  }

  if (const auto* a = section(canonical, "accuracy")) {
    out << "accuracy: " << num(num_field(*a, "value"), 4) << " (" << a->value("correct", 0)
        << "/" << a->value("premises_compared", 0) << " premises, "
        << a->at("mismatched").size() << " mismatched)\n";
  }

  if (const auto* w = section(canonical, "warnings")) {
    if (!w->empty()) {
      out << "warnings:\n";
      for (const auto& s : *w) out << "  - " << s.get<std::string>() << "\n";
    }
  }

  if (!stage_seconds.empty()) {
    out << "stage seconds:\n";
    double total = 0.0;
    for (const auto& [name, sec] : stage_seconds) {
      char line[96];
      std::snprintf(line, sizeof(line), "  %-12s %8.3f\n", name.c_str(), sec);
      out << line;
      total += sec;
    }
    char line[96];
    std::snprintf(line, sizeof(line), "  %-12s %8.3f\n", "total", total);
    out << line;
  }
  return out.str();
}

namespace {

struct MapScale {
  double lat0 = 0, lat1 = 0, lon0 = 0, lon1 = 0;
  double width = 800, height = 600, margin = 30;
  double aspect = 1.0;  // lon units per lat unit at this latitude

  double x(double lon) const {
    double span = (lon1 - lon0) * aspect;
    if (span <= 0) return width / 2;
    return margin + (lon - lon0) * aspect / span * (width - 2 * margin);
  }
  double y(double lat) const {
    double span = lat1 - lat0;
    if (span <= 0) return height / 2;
    return height - margin - (lat - lat0) / span * (height - 2 * margin);
  }
};

std::string pt(double v) { return num(v, 1); }

}  // namespace

std::string map_svg(const Topology& topology,
                    const std::vector<reconnect::Reassignment>& moves) {
  double lat0 = 1e9, lat1 = -1e9, lon0 = 1e9, lon1 = -1e9;
  auto grow = [&](const GeoPoint& p) {
    lat0 = std::min(lat0, p.lat);
    lat1 = std::max(lat1, p.lat);
    lon0 = std::min(lon0, p.lon);
    lon1 = std::max(lon1, p.lon);
  };
  for (const auto& t : topology.transformers) grow(t.location);
  for (const auto& p : topology.premises)
    if (p.location) grow(*p.location);

  MapScale s;
  if (lat0 > lat1) {  // nothing to draw
    lat0 = lon0 = 0;
    lat1 = lon1 = 1;
  }
  double pad_lat = std::max(1e-6, (lat1 - lat0) * 0.05);
  double pad_lon = std::max(1e-6, (lon1 - lon0) * 0.05);
  s.lat0 = lat0 - pad_lat;
  s.lat1 = lat1 + pad_lat;
  s.lon0 = lon0 - pad_lon;
  s.lon1 = lon1 + pad_lon;
  s.aspect = std::cos((lat0 + lat1) / 2 * M_PI / 180.0);
  // keep the drawn region square-ish regardless of feeder shape
  double span_x = (s.lon1 - s.lon0) * s.aspect, span_y = s.lat1 - s.lat0;
  if (span_x > 0 && span_y > 0) s.height = s.margin * 2 + (s.width - 2 * s.margin) * span_y / span_x;
  s.height = std::clamp(s.height, 200.0, 1200.0);

  std::map<std::string, const TransformerRecord*> tx;
  for (const auto& t : topology.transformers) tx[t.id] = &t;
  std::map<std::string, const PremiseRecord*> pr;
  for (const auto& p : topology.premises) pr[p.id] = &p;
  std::map<std::string, bool> moved;
  for (const auto& m : moves) moved[m.premise_id] = true;

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << pt(s.width) << "\" height=\""
    << pt(s.height) << "\" viewBox=\"0 0 " << pt(s.width) << " " << pt(s.height) << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << pt(s.margin) << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">"
    << "feeder map: " << topology.premises.size() << " premises, "
    << topology.transformers.size() << " transformers, " << moves.size()
    << " reassigned</text>\n";

  // reassignment lines beneath the markers
  for (const auto& m : moves) {
    auto p = pr.find(m.premise_id);
    if (p == pr.end() || !p->second->location) continue;
    auto to = tx.find(m.new_transformer);
    if (to != tx.end()) {
      o << "<line x1=\"" << pt(s.x(p->second->location->lon)) << "\" y1=\""
        << pt(s.y(p->second->location->lat)) << "\" x2=\"" << pt(s.x(to->second->location.lon))
        << "\" y2=\"" << pt(s.y(to->second->location.lat))
        << "\" stroke=\"#2a9d2a\" stroke-width=\"1\"/>\n";
    }
    auto from = tx.find(m.old_transformer);
    if (from != tx.end()) {
      o << "<line x1=\"" << pt(s.x(p->second->location->lon)) << "\" y1=\""
        << pt(s.y(p->second->location->lat)) << "\" x2=\"" << pt(s.x(from->second->location.lon))
        << "\" y2=\"" << pt(s.y(from->second->location.lat))
        << "\" stroke=\"#cc3333\" stroke-width=\"0.7\" stroke-dasharray=\"3 2\"/>\n";
    }
  }

  for (const auto& p : topology.premises) {
    if (!p.location) continue;
    bool hot = moved.count(p.id) > 0;
    o << "<circle cx=\"" << pt(s.x(p.location->lon)) << "\" cy=\"" << pt(s.y(p.location->lat))
      << "\" r=\"" << (hot ? "3" : "1.8") << "\" fill=\"" << (hot ? "#cc3333" : "#4878b0")
      << "\"/>\n";
  }
  for (const auto& t : topology.transformers) {
    double cx = s.x(t.location.lon), cy = s.y(t.location.lat);
    o << "<rect x=\"" << pt(cx - 3.5) << "\" y=\"" << pt(cy - 3.5)
      << "\" width=\"7\" height=\"7\" fill=\"#222222\"/>\n";
  }

  // legend
  double ly = s.height - 12;
  o << "<circle cx=\"" << pt(s.margin) << "\" cy=\"" << pt(ly) << "\" r=\"1.8\" fill=\"#4878b0\"/>"
    << "<text x=\"" << pt(s.margin + 6) << "\" y=\"" << pt(ly + 4)
    << "\" font-family=\"sans-serif\" font-size=\"11\">premise</text>\n";
  o << "<circle cx=\"" << pt(s.margin + 80) << "\" cy=\"" << pt(ly) << "\" r=\"3\" fill=\"#cc3333\"/>"
    << "<text x=\"" << pt(s.margin + 86) << "\" y=\"" << pt(ly + 4)
    << "\" font-family=\"sans-serif\" font-size=\"11\">reassigned</text>\n";
  o << "<rect x=\"" << pt(s.margin + 170) << "\" y=\"" << pt(ly - 3.5)
    << "\" width=\"7\" height=\"7\" fill=\"#222222\"/>"
    << "<text x=\"" << pt(s.margin + 182) << "\" y=\"" << pt(ly + 4)
    << "\" font-family=\"sans-serif\" font-size=\"11\">transformer</text>\n";
  o << "</svg>\n";
  return o.str();
}

std::string voltage_svg(const SeriesFrame& frame, const std::vector<std::string>& premise_ids,
                        std::size_t max_series) {
  static const char* kPalette[] = {"#4878b0", "#d1702c", "#4f9d4f", "#c34444",
                                   "#8064a8", "#8c6d59", "#d783be", "#7f7f7f",
                                   "#b2b234", "#3fb8c9", "#204060", "#804020"};
  const double width = 900, height = 320, ml = 56, mr = 160, mt = 28, mb = 28;

  std::vector<std::pair<std::string, std::vector<double>>> series;
  for (const auto& id : premise_ids) {
    if (series.size() >= max_series) break;
    const ChannelSet* ch = frame.channels(id);
    if (!ch || frame.size() == 0) continue;
    const std::vector<double>* v = primary_voltage(*ch);
    if (!v) continue;
    series.emplace_back(id, *v);
  }

  double lo = 1e300, hi = -1e300;
  for (const auto& [id, vals] : series)
    for (double v : vals)
      if (!std::isnan(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  if (lo > hi) {
    lo = 0;
    hi = 1;
  }
  double pad = std::max(1e-9, (hi - lo) * 0.05);
  lo -= pad;
  hi += pad;

  const std::size_t n = frame.size();
  auto x = [&](std::size_t i) {
    return n > 1 ? ml + static_cast<double>(i) / (n - 1) * (width - ml - mr) : ml;
  };
  auto y = [&](double v) { return height - mb - (v - lo) / (hi - lo) * (height - mt - mb); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << pt(width) << "\" height=\""
    << pt(height) << "\" viewBox=\"0 0 " << pt(width) << " " << pt(height) << "\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << pt(ml) << "\" y=\"16\" font-family=\"sans-serif\" font-size=\"13\">"
    << "voltage overlay: " << series.size() << " premises, " << n << " samples</text>\n";
  o << "<line x1=\"" << pt(ml) << "\" y1=\"" << pt(mt) << "\" x2=\"" << pt(ml) << "\" y2=\""
    << pt(height - mb) << "\" stroke=\"#999\"/>\n";
  o << "<line x1=\"" << pt(ml) << "\" y1=\"" << pt(height - mb) << "\" x2=\""
    << pt(width - mr) << "\" y2=\"" << pt(height - mb) << "\" stroke=\"#999\"/>\n";
  o << "<text x=\"4\" y=\"" << pt(y(hi - pad) + 4)
    << "\" font-family=\"sans-serif\" font-size=\"10\">" << num(hi - pad, 3) << "</text>\n";
  o << "<text x=\"4\" y=\"" << pt(y(lo + pad) + 4)
    << "\" font-family=\"sans-serif\" font-size=\"10\">" << num(lo + pad, 3) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& vals = series[si].second;
    const char* color = kPalette[si % 12];
    std::ostringstream pts;
    bool open = false;
    auto flush = [&]() {
      if (open) {
        o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" points=\""
          << pts.str() << "\"/>\n";
        pts.str("");
        open = false;
      }
    };
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (std::isnan(vals[i])) {
        flush();
        continue;
      }
      if (open) pts << " ";
      pts << pt(x(i)) << "," << pt(y(vals[i]));
      open = true;
    }
    flush();
    double ly = mt + 14.0 * static_cast<double>(si);
    o << "<rect x=\"" << pt(width - mr + 10) << "\" y=\"" << pt(ly) << "\" width=\"10\" height=\"3\""
      << " fill=\"" << color << "\"/>\n";
    o << "<text x=\"" << pt(width - mr + 26) << "\" y=\"" << pt(ly + 5)
      << "\" font-family=\"sans-serif\" font-size=\"10\">" << series[si].first << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace gridtopo::report
