#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pulsegate/model.hpp"

namespace pulsegate {

enum class MatchMode { word_boundary, substring };

/// Case-insensitive keyword match over message text. Substring mode is the
/// default so that stretched variants ("touchdownnnnn") still hit; word
/// boundary mode treats any non-alphanumeric byte as a separator.
class KeywordFilter {
 public:
  explicit KeywordFilter(std::vector<std::string> keywords,
                         MatchMode mode = MatchMode::substring);

  bool matches(std::string_view text) const;
  MatchMode mode() const { return mode_; }
  const std::vector<std::string>& keywords() const { return keywords_; }

 private:
  std::vector<std::string> keywords_;  // stored lowercase
  MatchMode mode_;
};

/// Per-second sampling cap; nullopt means uncapped.
struct RateCap {
  std::optional<int> max_per_second;
};

struct ParseResult {
  std::vector<Message> messages;
  std::size_t skipped = 0;  // malformed lines, counted but never fatal
};

/// Reads NDJSON messages ({"ts_ms":..,"user_id":..,"client":..,"text":..}),
/// one object per line, in file order. Malformed lines are skipped.
ParseResult parse_stream(std::istream& in);
ParseResult parse_stream_file(const std::filesystem::path& path);

/// NDJSON serialization (LF-terminated, fixed key order).
std::string to_ndjson_line(const Message& m);
std::string to_ndjson_line(const GroundTruthEvent& e);
std::string to_ndjson_line(const Detection& d);

/// Ground-truth file: NDJSON {"ts_ms": int, "kind": str}. Validates ordering
/// and the 5-minute minimum event separation.
std::vector<GroundTruthEvent> parse_truth(std::istream& in);
std::vector<GroundTruthEvent> load_truth_file(const std::filesystem::path& path);

/// Keeps exactly the messages whose text matches the filter.
std::vector<Message> filter_messages(std::span<const Message> msgs, const KeywordFilter& f);

/// Within each absolute epoch second, keeps at most max_per_second messages
/// (earliest first). Input must be sorted by ts_ms.
std::vector<Message> apply_rate_cap(std::span<const Message> msgs, const RateCap& cap);

/// Delivers messages to sink with wall delays equal to timestamp gaps divided
/// by speed. An infinite speed delivers immediately. The producer runs on its
/// own thread behind a bounded in-order queue; the sink runs on the calling
/// thread and its exceptions propagate.
void replay(std::span<const Message> msgs, double speed,
            const std::function<void(const Message&)>& sink,
            std::size_t queue_capacity = 1024);

/// Live-mode stand-in for a platform streaming API: accepts one TCP
/// connection and feeds NDJSON messages to the sink in arrival order.
/// Malformed lines are skipped and counted, as in parse_stream.
class LineServer {
 public:
  /// Binds and listens; port 0 picks a free port.
  explicit LineServer(const std::string& host, int port);
  ~LineServer();

  LineServer(const LineServer&) = delete;
  LineServer& operator=(const LineServer&) = delete;

  int port() const { return port_; }

  /// Blocks until a client connects, then streams messages to the sink until
  /// the peer closes. Returns the number of skipped (malformed) lines.
  std::size_t serve(const std::function<void(const Message&)>& sink);

 private:
  int listen_fd_ = -1;
  int port_ = 0;
};

}  // namespace pulsegate
