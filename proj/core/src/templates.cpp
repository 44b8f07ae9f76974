#include "pulsegate/templates.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace pulsegate {

const std::set<GroupKey>& default_fusion_groups() {
  static const std::set<GroupKey> groups = {GroupKey::mobile, GroupKey::inactive,
                                            GroupKey::short_text};
  return groups;
}

EventTemplate build_template(const BinnedSeries& series,
                             std::span<const GroundTruthEvent> events, int window_s,
                             GroupKey group, BaselineMode baseline) {
  if (window_s < 1) throw std::invalid_argument("build_template: window_s must be >= 1");
  if (series.bin_width_ms != 1000)
    throw std::invalid_argument("build_template: series must use 1 s bins");
  if (events.empty()) throw std::invalid_argument("build_template: no events");

  EventTemplate t;
  t.group = group;
  t.window_s = window_s;
  t.values.assign(static_cast<std::size_t>(window_s), 0.0);
  for (const GroundTruthEvent& e : events) {
    const std::int64_t offset = e.ts_ms - series.start_ms;
    if (offset < 0) throw std::runtime_error("build_template: event precedes series start");
    const std::int64_t first_bin = offset / 1000;
    if (first_bin + window_s > static_cast<std::int64_t>(series.size()))
      throw std::runtime_error("build_template: insufficient data after event at ts " +
                               std::to_string(e.ts_ms));
    double pre_mean = 0.0;
    if (baseline == BaselineMode::subtract_pre_event_mean) {
      // mean rate over up to window_s bins immediately before the event
      const std::int64_t pre_lo = std::max<std::int64_t>(0, first_bin - window_s);
      for (std::int64_t b = pre_lo; b < first_bin; ++b)
        pre_mean += series.counts[static_cast<std::size_t>(b)];
      if (first_bin > pre_lo) pre_mean /= static_cast<double>(first_bin - pre_lo);
    }
    for (int k = 0; k < window_s; ++k)
      t.values[static_cast<std::size_t>(k)] +=
          std::max(0.0, series.counts[static_cast<std::size_t>(first_bin + k)] - pre_mean);
  }
  const double n = static_cast<double>(events.size());
  for (double& v : t.values) v /= n;
  t.n_events = static_cast<int>(events.size());
  return t;
}

TemplateSet build_template_set(const std::map<GroupKey, BinnedSeries>& group_streams,
                               std::span<const GroundTruthEvent> events, int window_s,
                               const std::set<GroupKey>& groups, BaselineMode baseline) {
  if (groups.empty()) throw std::invalid_argument("build_template_set: empty group set");
  TemplateSet set;
  set.window_s = window_s;
  for (GroupKey g : groups) {
    const auto it = group_streams.find(g);
    if (it == group_streams.end())
      throw std::invalid_argument("build_template_set: missing sub-stream for group " +
                                  std::string(to_string(g)));
    try {
      set.per_group[g] = build_template(it->second, events, window_s, g, baseline);
    } catch (const std::exception& e) {
      throw std::runtime_error("build_template_set: group " + std::string(to_string(g)) + ": " +
                               e.what());
    }
  }
  return set;
}

EventTemplate normalize_template(const EventTemplate& t, TemplateScaling mode) {
  if (mode == TemplateScaling::raw) return t;
  double energy = 0.0;
  for (double v : t.values) energy += v * v;
  if (energy <= 0.0)
    throw std::invalid_argument("normalize_template: zero template in unit_energy mode");
  const double scale = 1.0 / std::sqrt(energy);
  EventTemplate out = t;
  for (double& v : out.values) v *= scale;
  return out;
}

EventTemplate merge_templates(const EventTemplate& a, const EventTemplate& b) {
  if (a.window_s != b.window_s)
    throw std::invalid_argument("merge_templates: window mismatch");
  if (a.group != b.group) throw std::invalid_argument("merge_templates: group mismatch");
  EventTemplate out = a;
  const double na = a.n_events, nb = b.n_events;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = (a.values[i] * na + b.values[i] * nb) / (na + nb);
  out.n_events = a.n_events + b.n_events;
  return out;
}

TemplateSet merge_template_sets(std::span<const TemplateSet> sets) {
  if (sets.empty()) throw std::invalid_argument("merge_template_sets: empty input");
  TemplateSet out = sets.front();
  for (std::size_t i = 1; i < sets.size(); ++i) {
    const TemplateSet& s = sets[i];
    if (s.window_s != out.window_s)
      throw std::invalid_argument("merge_template_sets: window mismatch");
    for (auto& [g, t] : out.per_group) {
      const auto it = s.per_group.find(g);
      if (it == s.per_group.end())
        throw std::invalid_argument("merge_template_sets: group set mismatch");
      t = merge_templates(t, it->second);
    }
    out.built_from.insert(out.built_from.end(), s.built_from.begin(), s.built_from.end());
  }
  return out;
}

std::string TemplateSet::to_json_string() const {
  nlohmann::ordered_json j;
  j["window_s"] = window_s;
  nlohmann::ordered_json groups = nlohmann::ordered_json::object();
  for (const auto& [g, t] : per_group) {
    nlohmann::ordered_json tj;
    tj["values"] = t.values;
    tj["n_events"] = t.n_events;
    groups[std::string(to_string(g))] = std::move(tj);
  }
  j["groups"] = std::move(groups);
  j["built_from"] = built_from;
  return j.dump(2) + "\n";
}

TemplateSet TemplateSet::from_json_string(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  TemplateSet set;
  set.window_s = j.at("window_s").get<int>();
  for (const auto& [name, tj] : j.at("groups").items()) {
    const auto g = group_from_string(name);
    if (!g) throw std::runtime_error("template set: unknown group " + name);
    EventTemplate t;
    t.group = *g;
    t.window_s = set.window_s;
    t.values = tj.at("values").get<std::vector<double>>();
    t.n_events = tj.at("n_events").get<int>();
    if (static_cast<int>(t.values.size()) != set.window_s)
      throw std::runtime_error("template set: values length != window_s for group " + name);
    set.per_group[*g] = std::move(t);
  }
  if (j.contains("built_from")) set.built_from = j["built_from"].get<std::vector<std::string>>();
  return set;
}

void TemplateSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("template set: cannot write " + path.string());
  out << to_json_string();
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("template set: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

}  // namespace pulsegate
