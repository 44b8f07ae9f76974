#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace pulsegate {

/// One time-stamped short text post with user and client-source metadata.
struct Message {
  std::int64_t ts_ms = 0;
  std::string user_id;
  std::string client;
  std::string text;

  bool operator==(const Message&) const = default;
};

/// Upper bound on Message::text, in bytes.
inline constexpr std::size_t kMaxTextBytes = 560;

/// Throws std::invalid_argument if the message violates its invariants
/// (ts_ms >= 0, non-empty user id, non-blank text, text size cap).
void validate_message(const Message& m);

enum class EventKind { touchdown, field_goal, other };

std::string_view to_string(EventKind k);

/// A physical-world event with a known wall-clock time.
struct GroundTruthEvent {
  std::int64_t ts_ms = 0;
  EventKind kind = EventKind::touchdown;
  std::string label;  // only used when kind == other

  std::string kind_string() const;
  bool operator==(const GroundTruthEvent&) const = default;
};

GroundTruthEvent make_truth_event(std::int64_t ts_ms, std::string_view kind_str);

/// Adjacent events in one game are never closer than this (5 minutes).
inline constexpr std::int64_t kMinEventSeparationMs = 300'000;

/// Per-bin counts of keyword-matching messages for one sub-stream.
/// Bins are half-open intervals [start + i*w, start + (i+1)*w).
struct BinnedSeries {
  std::int64_t start_ms = 0;
  std::int64_t bin_width_ms = 1000;
  std::vector<double> counts;

  std::size_t size() const { return counts.size(); }
  std::int64_t bin_start_ms(std::size_t i) const {
    return start_ms + static_cast<std::int64_t>(i) * bin_width_ms;
  }
  std::int64_t bin_end_ms(std::size_t i) const {
    return bin_start_ms(i) + bin_width_ms;
  }
  std::int64_t end_ms() const {
    return start_ms + static_cast<std::int64_t>(counts.size()) * bin_width_ms;
  }
};

/// User-group sub-stream identity. "all" is the undivided stream; the other
/// six cover the device, activeness and message-length axes.
enum class GroupKey {
  all,
  mobile,
  non_mobile,
  active,
  inactive,
  short_text,
  long_text,
};

inline constexpr std::array<GroupKey, 7> kAllGroups = {
    GroupKey::all,      GroupKey::mobile,     GroupKey::non_mobile,
    GroupKey::active,   GroupKey::inactive,   GroupKey::short_text,
    GroupKey::long_text,
};

std::string_view to_string(GroupKey g);
std::optional<GroupKey> group_from_string(std::string_view s);

/// Expected post-rate curve over the window following an event, for one group.
struct EventTemplate {
  GroupKey group = GroupKey::all;
  int window_s = 0;
  std::vector<double> values;  // values[k] = expected msgs/sec k seconds after an event
  int n_events = 0;
};

/// Which combination rule produced a detection.
enum class DetectionRule { single, max, mean, product, delay, temperature };

std::string_view to_string(DetectionRule r);
std::optional<DetectionRule> rule_from_string(std::string_view s);

/// A declared event: the bin boundary where the fused score crossed the
/// threshold, the score at the crossing, and the rule that fired.
struct Detection {
  std::int64_t ts_ms = 0;
  double score = 0.0;
  DetectionRule rule = DetectionRule::single;
  std::string kind = "touchdown";

  bool operator==(const Detection&) const = default;
};

/// Counts messages into half-open 1-bin intervals over [start_ms, end_ms).
/// Messages outside the range are ignored; input order does not matter.
BinnedSeries bin_messages(std::span<const Message> msgs, std::int64_t start_ms,
                          std::int64_t end_ms, std::int64_t bin_width_ms = 1000);

}  // namespace pulsegate
