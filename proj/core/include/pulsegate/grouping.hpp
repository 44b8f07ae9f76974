#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pulsegate/model.hpp"

namespace pulsegate {

enum class DeviceClass { mobile, non_mobile, ambiguous };

std::string_view to_string(DeviceClass d);

/// Marker substrings used to classify a posting client. Clients matching both
/// lists (or neither) are ambiguous and excluded from the device sub-streams.
struct MarkerConfig {
  std::vector<std::string> mobile;
  std::vector<std::string> non_mobile;

  static MarkerConfig defaults();
  static MarkerConfig from_json_string(const std::string& json_text);
  static MarkerConfig load(const std::filesystem::path& path);
  std::string to_json_string() const;
};

DeviceClass classify_device(std::string_view client, const MarkerConfig& markers);

/// Running per-user post counts since game start. A user is active when their
/// count so far strictly exceeds the average count over users seen so far.
class ActivityState {
 public:
  bool is_active(const std::string& user_id) const;
  void record_post(const std::string& user_id);

  std::int64_t total_posts() const { return total_; }
  std::size_t distinct_users() const { return posts_.size(); }

 private:
  std::unordered_map<std::string, std::int64_t> posts_;
  std::int64_t total_ = 0;
};

/// Running word-count average. A message is long when its word count strictly
/// exceeds the average so far; the first message of a game is short.
class LengthState {
 public:
  static int word_count(std::string_view text);

  bool is_long(std::string_view text) const;
  void record(std::string_view text);

  std::int64_t total_words() const { return total_words_; }
  std::int64_t total_messages() const { return total_msgs_; }

 private:
  std::int64_t total_words_ = 0;
  std::int64_t total_msgs_ = 0;
};

/// Group memberships of one message along the three axes of user diversity.
/// Device may be absent (ambiguous client); the other two axes always bind.
struct GroupMembership {
  DeviceClass device = DeviceClass::ambiguous;
  bool active = false;
  bool long_text = false;

  bool in(GroupKey g) const;
};

/// Stream-order classifier. Classification always uses the state excluding the
/// current message, then advances the running averages. Single writer per game.
class GroupClassifier {
 public:
  explicit GroupClassifier(MarkerConfig markers = MarkerConfig::defaults());

  GroupMembership classify(const Message& m);

  const ActivityState& activity() const { return activity_; }
  const LengthState& length() const { return length_; }

 private:
  MarkerConfig markers_;
  ActivityState activity_;
  LengthState length_;
};

/// Partitions a time-sorted stream into the seven group sub-streams.
std::map<GroupKey, std::vector<Message>> split_streams(
    std::span<const Message> msgs, const MarkerConfig& markers = MarkerConfig::defaults());

/// Same partition, but binned directly (no per-group message copies).
std::map<GroupKey, BinnedSeries> split_and_bin(
    std::span<const Message> msgs, std::int64_t start_ms, std::int64_t end_ms,
    std::int64_t bin_width_ms = 1000, const MarkerConfig& markers = MarkerConfig::defaults());

}  // namespace pulsegate
