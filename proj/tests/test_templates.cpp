#include "doctest.h"

#include <random>

#include "pulsegate/templates.hpp"

using namespace pulsegate;

namespace {

BinnedSeries series_of(std::vector<double> counts) {
  BinnedSeries s;
  s.start_ms = 0;
  s.bin_width_ms = 1000;
  s.counts = std::move(counts);
  return s;
}

GroundTruthEvent event_at(std::int64_t ts_ms) { return {ts_ms, EventKind::touchdown, {}}; }

}  // namespace

TEST_CASE("build_template: single event copies the post-event segment") {
  const auto s = series_of({5, 0, 1, 3, 9});
  const std::vector<GroundTruthEvent> events = {event_at(1000)};
  const auto t = build_template(s, events, 3);
  CHECK(t.values == std::vector<double>{0, 1, 3});
  CHECK(t.n_events == 1);
}

TEST_CASE("build_template: elementwise mean over events") {
  // post-event counts [0,2,4] and [2,2,2], 400 s apart
  std::vector<double> counts(440, 0.0);
  counts[10] = 0; counts[11] = 2; counts[12] = 4;
  counts[410] = 2; counts[411] = 2; counts[412] = 2;
  const auto s = series_of(std::move(counts));
  const std::vector<GroundTruthEvent> events = {event_at(10'000), event_at(410'000)};
  const auto t = build_template(s, events, 3);
  CHECK(t.values == std::vector<double>{1, 2, 3});
  CHECK(t.n_events == 2);
}

TEST_CASE("build_template: identical post-event segments are returned exactly") {
  std::vector<double> counts(800, 0.5);
  for (int base : {100, 500})
    for (int k = 0; k < 5; ++k) counts[static_cast<std::size_t>(base + k)] = 3.0 + k;
  const auto s = series_of(std::move(counts));
  const std::vector<GroundTruthEvent> events = {event_at(100'000), event_at(500'000)};
  const auto t = build_template(s, events, 5);
  CHECK(t.values == std::vector<double>{3, 4, 5, 6, 7});
}

TEST_CASE("build_template: optional pre-event baseline subtraction") {
  // constant floor of 2 plus a small post-event bump
  std::vector<double> counts(200, 2.0);
  counts[100] = 2;
  counts[101] = 5;
  counts[102] = 8;
  const auto s = series_of(std::move(counts));
  const std::vector<GroundTruthEvent> events = {event_at(100'000)};

  const auto raw = build_template(s, events, 3);
  CHECK(raw.values == std::vector<double>{2, 5, 8});

  const auto flat = build_template(s, events, 3, GroupKey::all,
                                   BaselineMode::subtract_pre_event_mean);
  CHECK(flat.values == std::vector<double>{0, 3, 6});
  for (double v : flat.values) CHECK(v >= 0.0);  // floored, never negative
}

TEST_CASE("build_template: errors") {
  const auto s = series_of({1, 2, 3});
  CHECK_THROWS_AS(build_template(s, {}, 3), std::invalid_argument);
  const std::vector<GroundTruthEvent> late = {event_at(2000)};
  CHECK_THROWS_AS(build_template(s, late, 3), std::runtime_error);  // runs off the series
  const std::vector<GroundTruthEvent> early = {event_at(0)};
  CHECK_NOTHROW(build_template(s, early, 3));
  CHECK_THROWS_AS(build_template(s, early, 0), std::invalid_argument);
}

TEST_CASE("build_template_set: singleton group set") {
  std::map<GroupKey, BinnedSeries> streams;
  streams[GroupKey::all] = series_of({0, 1, 2, 3});
  const std::vector<GroundTruthEvent> events = {event_at(0)};
  const auto set = build_template_set(streams, events, 3, {GroupKey::all});
  CHECK(set.per_group.size() == 1);
  CHECK(set.per_group.at(GroupKey::all).values == std::vector<double>{0, 1, 2});
}

TEST_CASE("build_template_set: missing sub-stream is a group-annotated error") {
  std::map<GroupKey, BinnedSeries> streams;
  streams[GroupKey::all] = series_of({0, 1, 2, 3});
  const std::vector<GroundTruthEvent> events = {event_at(0)};
  CHECK_THROWS_WITH_AS(build_template_set(streams, events, 3, {GroupKey::mobile}),
                       doctest::Contains("mobile"), std::invalid_argument);
}

TEST_CASE("normalize_template: raw is identity, unit_energy is the 3-4-5 case") {
  EventTemplate t;
  t.window_s = 2;
  t.values = {3, 4};
  t.n_events = 1;
  CHECK(normalize_template(t, TemplateScaling::raw).values == t.values);
  const auto unit = normalize_template(t, TemplateScaling::unit_energy);
  CHECK(unit.values[0] == doctest::Approx(0.6));
  CHECK(unit.values[1] == doctest::Approx(0.8));
  const auto twice = normalize_template(unit, TemplateScaling::unit_energy);
  CHECK(twice.values[0] == doctest::Approx(unit.values[0]));
  CHECK(twice.values[1] == doctest::Approx(unit.values[1]));
}

TEST_CASE("normalize_template: zero template cannot be unit-scaled") {
  EventTemplate t;
  t.window_s = 3;
  t.values = {0, 0, 0};
  t.n_events = 1;
  CHECK_THROWS_AS(normalize_template(t, TemplateScaling::unit_energy), std::invalid_argument);
}

TEST_CASE("merge_templates: union of event sets equals the n-weighted mean") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    // one long series with events split into two sub-sets
    const int n_events = 3 + static_cast<int>(rng() % 5);
    std::vector<double> counts(static_cast<std::size_t>(n_events) * 400 + 50, 0.0);
    for (double& c : counts) c = static_cast<double>(rng() % 7);
    const auto s = series_of(counts);
    std::vector<GroundTruthEvent> all_events, first, second;
    for (int e = 0; e < n_events; ++e) {
      const auto ev = event_at(static_cast<std::int64_t>(e) * 400'000);
      all_events.push_back(ev);
      (e % 2 == 0 ? first : second).push_back(ev);
    }
    if (first.empty() || second.empty()) continue;
    const int w = 10;
    const auto whole = build_template(s, all_events, w);
    const auto merged = merge_templates(build_template(s, first, w), build_template(s, second, w));
    REQUIRE(merged.values.size() == whole.values.size());
    for (std::size_t i = 0; i < whole.values.size(); ++i)
      CHECK(merged.values[i] == doctest::Approx(whole.values[i]).epsilon(1e-12));
    CHECK(merged.n_events == whole.n_events);
  }
}

TEST_CASE("template set JSON persistence round-trips") {
  std::map<GroupKey, BinnedSeries> streams;
  streams[GroupKey::mobile] = series_of({0, 1, 2, 3, 1});
  streams[GroupKey::inactive] = series_of({1, 1, 2, 0, 0});
  streams[GroupKey::short_text] = series_of({2, 4, 2, 1, 0});
  const std::vector<GroundTruthEvent> events = {event_at(0)};
  const auto set = build_template_set(streams, events, 4);
  const auto back = TemplateSet::from_json_string(set.to_json_string());
  CHECK(back.window_s == set.window_s);
  REQUIRE(back.per_group.size() == set.per_group.size());
  for (const auto& [g, t] : set.per_group) {
    CHECK(back.per_group.at(g).values == t.values);
    CHECK(back.per_group.at(g).n_events == t.n_events);
  }
}

TEST_CASE("template values are non-negative with length window_s") {
  std::mt19937 rng(29);
  std::vector<double> counts(2000, 0.0);
  for (double& c : counts) c = static_cast<double>(rng() % 12);
  const auto s = series_of(counts);
  const std::vector<GroundTruthEvent> events = {event_at(100'000), event_at(900'000)};
  for (int w : {1, 7, 30, 120}) {
    const auto t = build_template(s, events, w);
    CHECK(t.values.size() == static_cast<std::size_t>(w));
    for (double v : t.values) CHECK(v >= 0.0);
  }
}
