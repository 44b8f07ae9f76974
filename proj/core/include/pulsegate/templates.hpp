#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pulsegate/model.hpp"

namespace pulsegate {

enum class TemplateScaling { raw, unit_energy };

/// Per-group event templates sharing one window, plus provenance.
struct TemplateSet {
  int window_s = 0;
  std::map<GroupKey, EventTemplate> per_group;
  std::vector<std::string> built_from;  // game identifiers

  std::string to_json_string() const;
  static TemplateSet from_json_string(const std::string& json_text);
  void save(const std::filesystem::path& path) const;
  static TemplateSet load(const std::filesystem::path& path);
};

/// The three sub-streams fused by default: the highest-rate device group and
/// the two low-delay groups.
const std::set<GroupKey>& default_fusion_groups();

/// Templates default to raw post-event rates; the experimental alternative
/// subtracts each event's pre-event mean rate (floored at zero, since
/// templates are non-negative).
enum class BaselineMode { keep, subtract_pre_event_mean };

/// Averages the window_s bins following each event. Every event needs
/// window_s full bins of data after it.
EventTemplate build_template(const BinnedSeries& series,
                             std::span<const GroundTruthEvent> events, int window_s,
                             GroupKey group = GroupKey::all,
                             BaselineMode baseline = BaselineMode::keep);

/// One template per requested group, built from that group's sub-stream.
TemplateSet build_template_set(const std::map<GroupKey, BinnedSeries>& group_streams,
                               std::span<const GroundTruthEvent> events, int window_s,
                               const std::set<GroupKey>& groups = default_fusion_groups(),
                               BaselineMode baseline = BaselineMode::keep);

/// raw is the identity; unit_energy rescales so sum(values^2) == 1.
EventTemplate normalize_template(const EventTemplate& t, TemplateScaling mode);

/// n-weighted elementwise mean; equals the template built from the union of
/// the two underlying event sets.
EventTemplate merge_templates(const EventTemplate& a, const EventTemplate& b);

/// Merges per-game template sets (same window, same groups) across games.
TemplateSet merge_template_sets(std::span<const TemplateSet> sets);

}  // namespace pulsegate
