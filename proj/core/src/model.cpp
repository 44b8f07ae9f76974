#include "pulsegate/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace pulsegate {

namespace {

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

void validate_message(const Message& m) {
  if (m.ts_ms < 0) throw std::invalid_argument("message: ts_ms must be >= 0");
  if (m.user_id.empty()) throw std::invalid_argument("message: user_id must be non-empty");
  if (m.text.empty() || is_blank(m.text))
    throw std::invalid_argument("message: text must be non-blank");
  if (m.text.size() > kMaxTextBytes)
    throw std::invalid_argument("message: text exceeds 560 bytes");
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::touchdown: return "touchdown";
    case EventKind::field_goal: return "field_goal";
    case EventKind::other: return "other";
  }
  return "other";
}

std::string GroundTruthEvent::kind_string() const {
  if (kind == EventKind::other && !label.empty()) return label;
  return std::string(to_string(kind));
}

GroundTruthEvent make_truth_event(std::int64_t ts_ms, std::string_view kind_str) {
  GroundTruthEvent e;
  e.ts_ms = ts_ms;
  if (kind_str == "touchdown") {
    e.kind = EventKind::touchdown;
  } else if (kind_str == "field_goal") {
    e.kind = EventKind::field_goal;
  } else {
    e.kind = EventKind::other;
    e.label = std::string(kind_str);
  }
  return e;
}

std::string_view to_string(GroupKey g) {
  switch (g) {
    case GroupKey::all: return "all";
    case GroupKey::mobile: return "mobile";
    case GroupKey::non_mobile: return "non_mobile";
    case GroupKey::active: return "active";
    case GroupKey::inactive: return "inactive";
    case GroupKey::short_text: return "short";
    case GroupKey::long_text: return "long";
  }
  return "all";
}

std::optional<GroupKey> group_from_string(std::string_view s) {
  for (GroupKey g : kAllGroups)
    if (to_string(g) == s) return g;
  return std::nullopt;
}

std::string_view to_string(DetectionRule r) {
  switch (r) {
    case DetectionRule::single: return "single";
    case DetectionRule::max: return "max";
    case DetectionRule::mean: return "mean";
    case DetectionRule::product: return "product";
    case DetectionRule::delay: return "delay";
    case DetectionRule::temperature: return "temperature";
  }
  return "single";
}

std::optional<DetectionRule> rule_from_string(std::string_view s) {
  for (DetectionRule r : {DetectionRule::single, DetectionRule::max, DetectionRule::mean,
                          DetectionRule::product, DetectionRule::delay, DetectionRule::temperature})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

BinnedSeries bin_messages(std::span<const Message> msgs, std::int64_t start_ms,
                          std::int64_t end_ms, std::int64_t bin_width_ms) {
  if (end_ms < start_ms) throw std::invalid_argument("bin_messages: end_ms < start_ms");
  if (bin_width_ms <= 0) throw std::invalid_argument("bin_messages: bin_width_ms must be > 0");

  BinnedSeries out;
  out.start_ms = start_ms;
  out.bin_width_ms = bin_width_ms;
  const std::int64_t span = end_ms - start_ms;
  const std::size_t n_bins = static_cast<std::size_t>((span + bin_width_ms - 1) / bin_width_ms);
  out.counts.assign(n_bins, 0.0);
  for (const Message& m : msgs) {
    if (m.ts_ms < start_ms || m.ts_ms >= end_ms) continue;
    out.counts[static_cast<std::size_t>((m.ts_ms - start_ms) / bin_width_ms)] += 1.0;
  }
  return out;
}

}  // namespace pulsegate
