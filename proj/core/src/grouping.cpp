#include "pulsegate/grouping.hpp"

#include <cctype>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace pulsegate {

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool contains_any(const std::string& haystack, const std::vector<std::string>& needles) {
  for (const auto& n : needles)
    if (!n.empty() && haystack.find(n) != std::string::npos) return true;
  return false;
}

void check_sorted(std::span<const Message> msgs, const char* who) {
  for (std::size_t i = 1; i < msgs.size(); ++i)
    if (msgs[i].ts_ms < msgs[i - 1].ts_ms)
      throw std::invalid_argument(std::string(who) + ": input not sorted by ts_ms");
}

}  // namespace

std::string_view to_string(DeviceClass d) {
  switch (d) {
    case DeviceClass::mobile: return "mobile";
    case DeviceClass::non_mobile: return "non_mobile";
    case DeviceClass::ambiguous: return "ambiguous";
  }
  return "ambiguous";
}

MarkerConfig MarkerConfig::defaults() {
  MarkerConfig m;
  m.mobile = {"iphone", "ipad", "blackberry", "android", "htc", "moto", "txt", "mobile web"};
  m.non_mobile = {"web", "desktop", "mac", "chrome", "firefox", "safari"};
  return m;
}

MarkerConfig MarkerConfig::from_json_string(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  MarkerConfig m;
  for (const auto& s : j.at("mobile")) m.mobile.push_back(to_lower(s.get<std::string>()));
  for (const auto& s : j.at("non_mobile")) m.non_mobile.push_back(to_lower(s.get<std::string>()));
  return m;
}

MarkerConfig MarkerConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("markers: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

std::string MarkerConfig::to_json_string() const {
  nlohmann::ordered_json j;
  j["mobile"] = mobile;
  j["non_mobile"] = non_mobile;
  return j.dump(2) + "\n";
}

DeviceClass classify_device(std::string_view client, const MarkerConfig& markers) {
  const std::string lowered = to_lower(client);
  const bool m = contains_any(lowered, markers.mobile);
  const bool n = contains_any(lowered, markers.non_mobile);
  if (m && !n) return DeviceClass::mobile;
  if (n && !m) return DeviceClass::non_mobile;
  return DeviceClass::ambiguous;
}

bool ActivityState::is_active(const std::string& user_id) const {
  if (posts_.empty()) return false;
  const auto it = posts_.find(user_id);
  const std::int64_t count = it == posts_.end() ? 0 : it->second;
  // strictly more than the average over users seen so far
  return static_cast<double>(count) >
         static_cast<double>(total_) / static_cast<double>(posts_.size());
}

void ActivityState::record_post(const std::string& user_id) {
  ++posts_[user_id];
  ++total_;
}

int LengthState::word_count(std::string_view text) {
  int words = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++words;
    }
  }
  return words;
}

bool LengthState::is_long(std::string_view text) const {
  if (total_msgs_ == 0) return false;
  return static_cast<double>(word_count(text)) >
         static_cast<double>(total_words_) / static_cast<double>(total_msgs_);
}

void LengthState::record(std::string_view text) {
  total_words_ += word_count(text);
  ++total_msgs_;
}

bool GroupMembership::in(GroupKey g) const {
  switch (g) {
    case GroupKey::all: return true;
    case GroupKey::mobile: return device == DeviceClass::mobile;
    case GroupKey::non_mobile: return device == DeviceClass::non_mobile;
    case GroupKey::active: return active;
    case GroupKey::inactive: return !active;
    case GroupKey::short_text: return !long_text;
    case GroupKey::long_text: return long_text;
  }
  return false;
}

GroupClassifier::GroupClassifier(MarkerConfig markers) : markers_(std::move(markers)) {}

GroupMembership GroupClassifier::classify(const Message& m) {
  GroupMembership out;
  out.device = classify_device(m.client, markers_);
  out.active = activity_.is_active(m.user_id);
  out.long_text = length_.is_long(m.text);
  activity_.record_post(m.user_id);
  length_.record(m.text);
  return out;
}

std::map<GroupKey, std::vector<Message>> split_streams(std::span<const Message> msgs,
                                                       const MarkerConfig& markers) {
  check_sorted(msgs, "split_streams");
  std::map<GroupKey, std::vector<Message>> out;
  for (GroupKey g : kAllGroups) out[g];
  GroupClassifier classifier(markers);
  for (const Message& m : msgs) {
    const GroupMembership membership = classifier.classify(m);
    for (GroupKey g : kAllGroups)
      if (membership.in(g)) out[g].push_back(m);
  }
  return out;
}

std::map<GroupKey, BinnedSeries> split_and_bin(std::span<const Message> msgs,
                                               std::int64_t start_ms, std::int64_t end_ms,
                                               std::int64_t bin_width_ms,
                                               const MarkerConfig& markers) {
  check_sorted(msgs, "split_and_bin");
  if (end_ms < start_ms) throw std::invalid_argument("split_and_bin: end_ms < start_ms");
  if (bin_width_ms <= 0) throw std::invalid_argument("split_and_bin: bin_width_ms must be > 0");

  const std::size_t n_bins =
      static_cast<std::size_t>((end_ms - start_ms + bin_width_ms - 1) / bin_width_ms);
  std::map<GroupKey, BinnedSeries> out;
  for (GroupKey g : kAllGroups) {
    out[g].start_ms = start_ms;
    out[g].bin_width_ms = bin_width_ms;
    out[g].counts.assign(n_bins, 0.0);
  }
  GroupClassifier classifier(markers);
  for (const Message& m : msgs) {
    const GroupMembership membership = classifier.classify(m);
    if (m.ts_ms < start_ms || m.ts_ms >= end_ms) continue;  // state still advances
    const std::size_t bin = static_cast<std::size_t>((m.ts_ms - start_ms) / bin_width_ms);
    for (GroupKey g : kAllGroups)
      if (membership.in(g)) out[g].counts[bin] += 1.0;
  }
  return out;
}

}  // namespace pulsegate
