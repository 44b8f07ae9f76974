#include "doctest.h"

#include <random>

#include "pulsegate/grouping.hpp"

using namespace pulsegate;

TEST_CASE("classify_device: marker hits and the ambiguous bucket") {
  const auto markers = MarkerConfig::defaults();
  CHECK(classify_device("Twitter for iPhone", markers) == DeviceClass::mobile);
  CHECK(classify_device("txt", markers) == DeviceClass::mobile);
  CHECK(classify_device("web", markers) == DeviceClass::non_mobile);
  CHECK(classify_device("Seesmic Desktop", markers) == DeviceClass::non_mobile);
  CHECK(classify_device("TweetDeck", markers) == DeviceClass::ambiguous);
  // hits in both lists stay ambiguous
  CHECK(classify_device("Mobile Web", markers) == DeviceClass::ambiguous);
}

TEST_CASE("classify_activity: strictly above the per-poster average") {
  ActivityState s;
  // two posters: u1 has 3 posts, u2 has 2 -> average 2.5
  for (int i = 0; i < 3; ++i) s.record_post("u1");
  for (int i = 0; i < 2; ++i) s.record_post("u2");
  CHECK(s.is_active("u1"));       // 3 > 2.5
  CHECK(!s.is_active("u2"));      // 2 < 2.5
  CHECK(!s.is_active("fresh"));   // 0 posts
}

TEST_CASE("classify_activity: degenerate and tie cases are inactive") {
  ActivityState s;
  CHECK(!s.is_active("u1"));  // empty state
  s.record_post("u1");
  s.record_post("u2");
  CHECK(!s.is_active("u1"));  // exactly equal to the average
}

TEST_CASE("classify_length: strictly above the running word average") {
  LengthState s;
  CHECK(!s.is_long("first message of the game"));  // degenerate: short
  // seed the average near 9.3: totals 28 words over 3 messages
  s.record("one two three four five six seven eight nine ten");
  s.record("one two three four five six seven eight nine");
  s.record("a b c d e f g h i");
  CHECK(!s.is_long("one two three four five"));  // 5 <= 9.33
  CHECK(s.is_long("w w w w w w w w w w w w w"));  // 13 > 9.33
}

TEST_CASE("word_count: maximal whitespace-separated tokens") {
  CHECK(LengthState::word_count("") == 0);
  CHECK(LengthState::word_count("   ") == 0);
  CHECK(LengthState::word_count("TD!") == 1);
  CHECK(LengthState::word_count("  go   team\tgo \n") == 3);
}

TEST_CASE("split_streams: empty input yields seven empty streams") {
  const auto split = split_streams({});
  CHECK(split.size() == 7);
  for (const auto& [g, msgs] : split) CHECK(msgs.empty());
}

TEST_CASE("split_streams: first message lands in the degenerate groups") {
  const std::vector<Message> msgs = {{0, "u1", "Twitter for Android", "what a play td wow"}};
  const auto split = split_streams(msgs);
  CHECK(split.at(GroupKey::all).size() == 1);
  CHECK(split.at(GroupKey::mobile).size() == 1);
  CHECK(split.at(GroupKey::non_mobile).empty());
  CHECK(split.at(GroupKey::inactive).size() == 1);
  CHECK(split.at(GroupKey::active).empty());
  CHECK(split.at(GroupKey::short_text).size() == 1);
  CHECK(split.at(GroupKey::long_text).empty());
}

TEST_CASE("split_streams: unsorted input is an error") {
  const std::vector<Message> msgs = {{1000, "u", "web", "td"}, {0, "u", "web", "td"}};
  CHECK_THROWS_AS(split_streams(msgs), std::invalid_argument);
}

namespace {

// Independent step-through of the two running-average rules, kept deliberately
// naive so it can arbitrate the production classifier.
struct NaiveOracle {
  std::map<std::string, int> posts;
  int total_posts = 0;
  long words = 0;
  int n = 0;

  bool active(const std::string& user) const {
    if (posts.empty()) return false;
    const auto it = posts.find(user);
    const double count = it == posts.end() ? 0.0 : it->second;
    return count > static_cast<double>(total_posts) / static_cast<double>(posts.size());
  }
  bool long_text(int wc) const {
    if (n == 0) return false;
    return wc > static_cast<double>(words) / n;
  }
  void advance(const std::string& user, int wc) {
    ++posts[user];
    ++total_posts;
    words += wc;
    ++n;
  }
};

}  // namespace

TEST_CASE("split_streams: twenty-message fixture matches a hand-stepped oracle") {
  // deterministic fixture with repeat posters and varied word counts
  std::vector<Message> msgs;
  const char* clients[] = {"Twitter for iPhone", "web", "TweetDeck"};
  for (int i = 0; i < 20; ++i) {
    Message m;
    m.ts_ms = i * 500;
    m.user_id = "u" + std::to_string(i % 5);
    m.client = clients[i % 3];
    m.text = "td";
    for (int w = 0; w < (i * 7) % 11; ++w) m.text += " word";
    msgs.push_back(std::move(m));
  }

  NaiveOracle oracle;
  std::map<GroupKey, std::size_t> expected;
  for (GroupKey g : kAllGroups) expected[g] = 0;
  for (int i = 0; i < 20; ++i) {
    const Message& m = msgs[static_cast<std::size_t>(i)];
    ++expected[GroupKey::all];
    if (i % 3 == 0) ++expected[GroupKey::mobile];
    if (i % 3 == 1) ++expected[GroupKey::non_mobile];
    const int wc = LengthState::word_count(m.text);
    ++expected[oracle.active(m.user_id) ? GroupKey::active : GroupKey::inactive];
    ++expected[oracle.long_text(wc) ? GroupKey::long_text : GroupKey::short_text];
    oracle.advance(m.user_id, wc);
  }

  const auto split = split_streams(msgs);
  for (GroupKey g : kAllGroups) CHECK(split.at(g).size() == expected.at(g));
}

TEST_CASE("split_streams: partition size invariants and determinism") {
  std::mt19937 rng(13);
  std::vector<Message> msgs;
  std::int64_t t = 0;
  for (int i = 0; i < 500; ++i) {
    t += static_cast<std::int64_t>(rng() % 800);
    Message m;
    m.ts_ms = t;
    m.user_id = "u" + std::to_string(rng() % 40);
    const int pick = static_cast<int>(rng() % 4);
    m.client = pick == 0   ? "Twitter for iPhone"
               : pick == 1 ? "web"
               : pick == 2 ? "HootSuite"
                           : "txt";
    m.text = "td";
    for (unsigned w = 0; w < rng() % 15; ++w) m.text += " go";
    msgs.push_back(std::move(m));
  }
  const auto split = split_streams(msgs);
  const std::size_t all = split.at(GroupKey::all).size();
  CHECK(all == msgs.size());
  CHECK(split.at(GroupKey::mobile).size() + split.at(GroupKey::non_mobile).size() <= all);
  CHECK(split.at(GroupKey::active).size() + split.at(GroupKey::inactive).size() == all);
  CHECK(split.at(GroupKey::short_text).size() + split.at(GroupKey::long_text).size() == all);

  const auto again = split_streams(msgs);
  for (GroupKey g : kAllGroups) CHECK(again.at(g) == split.at(g));
}

TEST_CASE("split_and_bin agrees with split_streams plus bin_messages") {
  std::mt19937 rng(17);
  std::vector<Message> msgs;
  std::int64_t t = 0;
  for (int i = 0; i < 300; ++i) {
    t += static_cast<std::int64_t>(rng() % 900);
    msgs.push_back({t, "u" + std::to_string(rng() % 25),
                    (rng() % 2) ? "web" : "Twitter for Android", "td go team"});
  }
  const std::int64_t end = t + 1000;
  const auto split = split_streams(msgs);
  const auto binned = split_and_bin(msgs, 0, end);
  for (GroupKey g : kAllGroups)
    CHECK(binned.at(g).counts == bin_messages(split.at(g), 0, end).counts);
}

TEST_CASE("marker config JSON round-trip") {
  const auto m = MarkerConfig::defaults();
  const auto back = MarkerConfig::from_json_string(m.to_json_string());
  CHECK(back.mobile == m.mobile);
  CHECK(back.non_mobile == m.non_mobile);
}
