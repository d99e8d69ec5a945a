#include "gridtopo/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "gridtopo/error.hpp"

namespace gridtopo {

std::string PhaseLabel::str() const {
  std::string out;
  if (has_a) out += 'A';
  if (has_b) out += 'B';
  if (has_c) out += 'C';
  return out;
}

std::optional<PhaseLabel> PhaseLabel::parse(const std::string& text) {
  PhaseLabel label;
  for (char c : text) {
    switch (c) {
      case 'A': case 'a': label.has_a = true; break;
      case 'B': case 'b': label.has_b = true; break;
      case 'C': case 'c': label.has_c = true; break;
      case ' ': break;
      default: return std::nullopt;
    }
  }
  return label;
}

namespace {

template <typename Rec>
const Rec* find_by_id(const std::vector<Rec>& records, const std::string& id) {
  auto it = std::lower_bound(records.begin(), records.end(), id,
                             [](const Rec& r, const std::string& key) { return r.id < key; });
  if (it == records.end() || it->id != id) return nullptr;
  return &*it;
}

}  // namespace

const PremiseRecord* Topology::premise(const std::string& id) const {
  return find_by_id(premises, id);
}

const TransformerRecord* Topology::transformer(const std::string& id) const {
  return find_by_id(transformers, id);
}

void Topology::finalize() {
  std::sort(premises.begin(), premises.end(),
            [](const PremiseRecord& a, const PremiseRecord& b) { return a.id < b.id; });
  std::sort(transformers.begin(), transformers.end(),
            [](const TransformerRecord& a, const TransformerRecord& b) { return a.id < b.id; });
}

void Topology::validate() const {
  for (std::size_t i = 1; i < premises.size(); ++i) {
    if (premises[i - 1].id == premises[i].id)
      throw StructuralError("duplicate premise id: " + premises[i].id);
    if (premises[i - 1].id > premises[i].id)
      throw StructuralError("premises not sorted; call finalize()");
  }
  for (std::size_t i = 1; i < transformers.size(); ++i) {
    if (transformers[i - 1].id == transformers[i].id)
      throw StructuralError("duplicate transformer id: " + transformers[i].id);
    if (transformers[i - 1].id > transformers[i].id)
      throw StructuralError("transformers not sorted; call finalize()");
  }
  for (const auto& p : premises) {
    if (p.id.empty()) throw StructuralError("premise with empty id");
    if (p.location && !geo_valid(*p.location))
      throw StructuralError("premise " + p.id + ": coordinates out of range");
    if (p.nominal_voltage && *p.nominal_voltage <= 0.0)
      throw StructuralError("premise " + p.id + ": non-positive nominal voltage");
  }
  for (const auto& t : transformers) {
    if (t.id.empty()) throw StructuralError("transformer with empty id");
    if (!geo_valid(t.location))
      throw StructuralError("transformer " + t.id + ": coordinates out of range");
    if (t.rated_kva && *t.rated_kva <= 0.0)
      throw StructuralError("transformer " + t.id + ": non-positive rating");
  }
  for (const auto& [pid, tid] : edges) {
    if (!premise(pid)) throw StructuralError("edge references unknown premise " + pid);
    if (!transformer(tid))
      throw StructuralError("edge " + pid + " references unknown transformer " + tid);
  }
}

const ChannelSet* SeriesFrame::channels(const std::string& premise_id) const {
  auto it = premises.find(premise_id);
  return it == premises.end() ? nullptr : &it->second;
}

bool has_data(const std::vector<double>& channel) {
  return std::any_of(channel.begin(), channel.end(), [](double v) { return !is_missing(v); });
}

const std::vector<double>* primary_voltage(const ChannelSet& ch) {
  if (has_data(ch.va)) return &ch.va;
  if (has_data(ch.vb)) return &ch.vb;
  if (has_data(ch.vc)) return &ch.vc;
  return nullptr;
}

ConstraintSet ConstraintSet::for_nominal(double v_nom, double power_factor) {
  ConstraintSet cs;
  cs.v_min = 0.95 * v_nom;
  cs.v_max = 1.05 * v_nom;
  cs.power_factor = power_factor;
  cs.validate();
  return cs;
}

void ConstraintSet::validate() const {
  if (!(v_min > 0.0) || !(v_max > v_min))
    throw ConfigError("voltage band requires 0 < v_min < v_max");
  if (!(power_factor > 0.0) || power_factor > 1.0)
    throw ConfigError("power factor must lie in (0, 1]");
  for (const auto& [id, kva] : rated_kva_override)
    if (!(kva > 0.0)) throw ConfigError("rating override for " + id + " must be positive");
}

std::map<std::string, std::vector<std::string>> group_by_transformer(const Topology& topology) {
  std::map<std::string, std::vector<std::string>> groups;
  for (const auto& t : topology.transformers) groups[t.id];
  for (const auto& [pid, tid] : topology.edges) groups[tid].push_back(pid);
  return groups;  // map iteration gives sorted members for free
}

std::vector<EdgeDiff> diff_topologies(const Topology& a, const Topology& b) {
  std::set<std::string> ids_a, ids_b;
  for (const auto& p : a.premises) ids_a.insert(p.id);
  for (const auto& p : b.premises) ids_b.insert(p.id);
  if (ids_a != ids_b) {
    std::ostringstream msg;
    msg << "premise sets differ:";
    for (const auto& id : ids_a)
      if (!ids_b.count(id)) msg << " -" << id;
    for (const auto& id : ids_b)
      if (!ids_a.count(id)) msg << " +" << id;
    throw StructuralError(msg.str());
  }
  std::vector<EdgeDiff> out;
  for (const auto& id : ids_a) {
    auto ita = a.edges.find(id);
    auto itb = b.edges.find(id);
    std::string ta = ita == a.edges.end() ? std::string() : ita->second;
    std::string tb = itb == b.edges.end() ? std::string() : itb->second;
    if (ta != tb) out.push_back({id, ta, tb});
  }
  return out;
}

double topology_accuracy(const Topology& truth, const Topology& estimate) {
  if (truth.premises.empty()) throw StructuralError("accuracy undefined for empty topology");
  auto diff = diff_topologies(truth, estimate);
  return 1.0 - static_cast<double>(diff.size()) / static_cast<double>(truth.premises.size());
}

}  // namespace gridtopo
