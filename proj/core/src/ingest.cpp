#include "pulsegate/ingest.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace pulsegate {

namespace {

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

}  // namespace

KeywordFilter::KeywordFilter(std::vector<std::string> keywords, MatchMode mode) : mode_(mode) {
  if (keywords.empty()) throw std::invalid_argument("keyword filter: empty keyword set");
  keywords_.reserve(keywords.size());
  for (auto& k : keywords) {
    if (k.empty()) throw std::invalid_argument("keyword filter: empty keyword");
    keywords_.push_back(to_lower(k));
  }
}

bool KeywordFilter::matches(std::string_view text) const {
  const std::string lowered = to_lower(text);
  if (mode_ == MatchMode::substring) {
    for (const auto& k : keywords_)
      if (lowered.find(k) != std::string::npos) return true;
    return false;
  }
  // word_boundary: compare each maximal alphanumeric run against the keywords
  std::size_t i = 0;
  while (i < lowered.size()) {
    while (i < lowered.size() && !is_word_char(static_cast<unsigned char>(lowered[i]))) ++i;
    std::size_t j = i;
    while (j < lowered.size() && is_word_char(static_cast<unsigned char>(lowered[j]))) ++j;
    if (j > i) {
      std::string_view token(lowered.data() + i, j - i);
      for (const auto& k : keywords_)
        if (token == k) return true;
    }
    i = j;
  }
  return false;
}

ParseResult parse_stream(std::istream& in) {
  if (in.bad()) throw std::runtime_error("parse_stream: unreadable source");
  ParseResult out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      ++out.skipped;
      continue;
    }
    try {
      Message m;
      m.ts_ms = j.at("ts_ms").get<std::int64_t>();
      m.user_id = j.at("user_id").get<std::string>();
      m.client = j.value("client", std::string{});
      m.text = j.at("text").get<std::string>();
      validate_message(m);
      out.messages.push_back(std::move(m));
    } catch (const std::exception&) {
      ++out.skipped;
    }
  }
  return out;
}

ParseResult parse_stream_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_stream: cannot open " + path.string());
  return parse_stream(in);
}

std::string to_ndjson_line(const Message& m) {
  nlohmann::ordered_json j;
  j["ts_ms"] = m.ts_ms;
  j["user_id"] = m.user_id;
  j["client"] = m.client;
  j["text"] = m.text;
  return j.dump() + "\n";
}

std::string to_ndjson_line(const GroundTruthEvent& e) {
  nlohmann::ordered_json j;
  j["ts_ms"] = e.ts_ms;
  j["kind"] = e.kind_string();
  return j.dump() + "\n";
}

std::string to_ndjson_line(const Detection& d) {
  nlohmann::ordered_json j;
  j["ts_ms"] = d.ts_ms;
  j["score"] = d.score;
  j["rule"] = std::string(to_string(d.rule));
  j["kind"] = d.kind;
  return j.dump() + "\n";
}

std::vector<GroundTruthEvent> parse_truth(std::istream& in) {
  if (in.bad()) throw std::runtime_error("parse_truth: unreadable source");
  std::vector<GroundTruthEvent> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("ts_ms") || !j.contains("kind"))
      throw std::runtime_error("parse_truth: malformed line " + std::to_string(line_no));
    out.push_back(make_truth_event(j["ts_ms"].get<std::int64_t>(),
                                   j["kind"].get<std::string>()));
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].ts_ms - out[i - 1].ts_ms < kMinEventSeparationMs)
      throw std::runtime_error("parse_truth: events closer than 5 minutes");
  }
  return out;
}

std::vector<GroundTruthEvent> load_truth_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_truth: cannot open " + path.string());
  return parse_truth(in);
}

std::vector<Message> filter_messages(std::span<const Message> msgs, const KeywordFilter& f) {
  std::vector<Message> out;
  for (const Message& m : msgs)
    if (f.matches(m.text)) out.push_back(m);
  return out;
}

std::vector<Message> apply_rate_cap(std::span<const Message> msgs, const RateCap& cap) {
  if (cap.max_per_second && *cap.max_per_second < 1)
    throw std::invalid_argument("rate cap: max_per_second must be >= 1");
  for (std::size_t i = 1; i < msgs.size(); ++i)
    if (msgs[i].ts_ms < msgs[i - 1].ts_ms)
      throw std::invalid_argument("rate cap: input not sorted by ts_ms");
  if (!cap.max_per_second) return {msgs.begin(), msgs.end()};

  std::vector<Message> out;
  out.reserve(msgs.size());
  std::int64_t current_second = 0;
  int in_second = 0;
  bool have_second = false;
  for (const Message& m : msgs) {
    const std::int64_t sec = m.ts_ms / 1000;  // aligned to absolute epoch seconds
    if (!have_second || sec != current_second) {
      current_second = sec;
      in_second = 0;
      have_second = true;
    }
    if (in_second < *cap.max_per_second) {
      out.push_back(m);
      ++in_second;
    }
  }
  return out;
}

namespace {

// Bounded in-order queue between the replay producer and the consuming sink.
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(Message m) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return q_.size() < capacity_ || closed_; });
    if (closed_) return;
    q_.push_back(std::move(m));
    not_empty_.notify_one();
  }

  std::optional<Message> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return !q_.empty() || done_ || closed_; });
    if (q_.empty()) return std::nullopt;
    Message m = std::move(q_.front());
    q_.pop_front();
    not_full_.notify_one();
    return m;
  }

  void finish() {
    std::lock_guard lock(mu_);
    done_ = true;
    not_empty_.notify_all();
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
  std::deque<Message> q_;
  std::size_t capacity_;
  bool done_ = false;
  bool closed_ = false;
};

}  // namespace

LineServer::LineServer(const std::string& host, int port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("line server: cannot create socket");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw std::runtime_error("line server: bad host " + host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 1) != 0) {
    ::close(listen_fd_);
    throw std::runtime_error("line server: cannot bind " + host + ":" + std::to_string(port));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

LineServer::~LineServer() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

std::size_t LineServer::serve(const std::function<void(const Message&)>& sink) {
  const int conn = ::accept(listen_fd_, nullptr, nullptr);
  if (conn < 0) throw std::runtime_error("line server: accept failed");
  std::size_t skipped = 0;
  std::string buffer;
  char chunk[4096];
  auto consume_line = [&](const std::string& line) {
    if (line.empty()) return;
    std::istringstream one(line);
    ParseResult r = parse_stream(one);
    if (r.messages.size() == 1) {
      sink(r.messages.front());
    } else {
      ++skipped;
    }
  };
  for (;;) {
    const ssize_t n = ::read(conn, chunk, sizeof(chunk));
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t pos;
    while ((pos = buffer.find('\n')) != std::string::npos) {
      consume_line(buffer.substr(0, pos));
      buffer.erase(0, pos + 1);
    }
  }
  consume_line(buffer);  // unterminated trailing line
  ::close(conn);
  return skipped;
}

void replay(std::span<const Message> msgs, double speed,
            const std::function<void(const Message&)>& sink, std::size_t queue_capacity) {
  if (!(speed > 0.0)) throw std::invalid_argument("replay: speed must be > 0");
  for (std::size_t i = 1; i < msgs.size(); ++i)
    if (msgs[i].ts_ms < msgs[i - 1].ts_ms)
      throw std::invalid_argument("replay: input not sorted by ts_ms");

  const bool paced = std::isfinite(speed);
  BoundedQueue queue(queue_capacity == 0 ? 1 : queue_capacity);

  std::thread producer([&] {
    using clock = std::chrono::steady_clock;
    const auto wall_start = clock::now();
    const std::int64_t t0 = msgs.empty() ? 0 : msgs.front().ts_ms;
    for (const Message& m : msgs) {
      if (paced) {
        const double elapsed_ms = static_cast<double>(m.ts_ms - t0) / speed;
        std::this_thread::sleep_until(
            wall_start + std::chrono::microseconds(static_cast<std::int64_t>(elapsed_ms * 1000.0)));
      }
      queue.push(m);
    }
    queue.finish();
  });

  std::exception_ptr sink_error;
  while (auto m = queue.pop()) {
    try {
      sink(*m);
    } catch (...) {
      sink_error = std::current_exception();
      queue.close();
      break;
    }
  }
  producer.join();
  if (sink_error) std::rethrow_exception(sink_error);
}

}  // namespace pulsegate
