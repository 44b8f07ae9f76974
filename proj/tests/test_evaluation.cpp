#include "doctest.h"

#include <random>

#include "pulsegate/evaluation.hpp"
#include "pulsegate/synth.hpp"

using namespace pulsegate;

namespace {

Detection det_at(std::int64_t ts_ms) { return {ts_ms, 10.0, DetectionRule::mean, "touchdown"}; }
GroundTruthEvent event_at(std::int64_t ts_ms) { return {ts_ms, EventKind::touchdown, {}}; }

}  // namespace

TEST_CASE("match_detections: single pair with its delay") {
  const std::vector<Detection> dets = {det_at(45'000)};
  const std::vector<GroundTruthEvent> truth = {event_at(0)};
  const auto r = match_detections(dets, truth);
  CHECK(r.tp == 1);
  CHECK(r.fp == 0);
  CHECK(r.fn == 0);
  REQUIRE(r.delays_s.size() == 1);
  CHECK(r.delays_s[0] == 45.0);
}

TEST_CASE("match_detections: detections never match future events") {
  const std::vector<Detection> dets = {det_at(0)};
  const std::vector<GroundTruthEvent> truth = {event_at(10'000)};
  const auto r = match_detections(dets, truth);
  CHECK(r.tp == 0);
  CHECK(r.fp == 1);
  CHECK(r.fn == 1);
}

TEST_CASE("match_detections: greedy chronological hand oracle") {
  const std::vector<Detection> dets = {det_at(40'000), det_at(70'000), det_at(450'000)};
  const std::vector<GroundTruthEvent> truth = {event_at(0), event_at(400'000)};
  const auto r = match_detections(dets, truth);
  CHECK(r.tp == 2);
  CHECK(r.fp == 1);
  CHECK(r.fn == 0);
  CHECK(r.delays_s == std::vector<double>{40.0, 50.0});
}

TEST_CASE("match_detections: beyond the match window is a miss") {
  const std::vector<Detection> dets = {det_at(200'000)};
  const std::vector<GroundTruthEvent> truth = {event_at(0)};
  MatchPolicy policy;
  policy.match_window_s = 180;
  const auto r = match_detections(dets, truth, policy);
  CHECK(r.tp == 0);
  CHECK(r.fp == 1);
  CHECK(r.fn == 1);
}

TEST_CASE("match_detections: tp + fn always equals the event count") {
  std::mt19937 rng(67);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<GroundTruthEvent> truth;
    std::int64_t t = 0;
    const int n_events = static_cast<int>(rng() % 8);
    for (int e = 0; e < n_events; ++e) {
      t += 300'000 + static_cast<std::int64_t>(rng() % 400'000);
      truth.push_back(event_at(t));
    }
    std::vector<Detection> dets;
    std::int64_t d = 0;
    const int n_dets = static_cast<int>(rng() % 12);
    for (int i = 0; i < n_dets; ++i) {
      d += static_cast<std::int64_t>(rng() % 500'000);
      dets.push_back(det_at(d));
    }
    const auto r = match_detections(dets, truth);
    CHECK(r.tp + r.fn == n_events);
    CHECK(r.tp + r.fp == n_dets);
    CHECK(static_cast<int>(r.delays_s.size()) == r.tp);
  }
}

TEST_CASE("match_detections: unsorted inputs are errors") {
  const std::vector<Detection> dets = {det_at(5000), det_at(0)};
  const std::vector<GroundTruthEvent> truth = {event_at(0)};
  CHECK_THROWS_AS(match_detections(dets, truth), std::invalid_argument);
}

namespace {

// Tiny two-game corpus built directly from generated games (no files).
PreparedCorpus tiny_corpus(std::uint64_t seed, int n_games, int duration_s = 3600) {
  PreparedCorpus out;
  for (int i = 0; i < n_games; ++i) {
    GameScript script;
    script.duration_s = duration_s;
    script.seed = seed;  // identical seed -> identical games
    script.n_events_override = 3;
    GeneratedGame g = generate_game(script, PopulationConfig{}, ResponseKernel{});
    PreparedGame p;
    p.id = "g" + std::to_string(i);
    p.start_ms = 0;
    p.end_ms = static_cast<std::int64_t>(duration_s) * 1000;
    p.series = split_and_bin(g.messages, 0, p.end_ms);
    p.truth = g.truth;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

TEST_CASE("roc: saturation at both ends of the threshold ladder") {
  // hand-built trace: two true bumps (100) at the events, three spurious
  // bumps (50) elsewhere, all separated by more than the refractory window
  PreparedGame game;
  game.id = "g";
  game.truth = {event_at(600'000), event_at(1'800'000)};
  std::vector<ScorePoint> fused;
  for (int sec = 30; sec < 3600; ++sec) {
    double score = 0.0;
    if (sec == 640 || sec == 1840) score = 100.0;
    if (sec == 200 || sec == 1200 || sec == 2500) score = 50.0;
    fused.push_back({sec * 1000LL, score});
  }
  const std::vector<ScoredGame> traces = {{game.id, fused, &game}};

  DetectorConfig base;
  const std::vector<double> thresholds = {40.0, 150.0};
  const auto points = roc_from_traces(traces, thresholds, MatchPolicy{}, base);
  REQUIRE(points.size() == 2);
  CHECK(points[0].tpr == 1.0);  // low threshold: every bump fires
  CHECK(points[0].fp == 3);
  CHECK(points[0].fpr == doctest::Approx(0.6));
  CHECK(points[1].tp == 0);     // threshold above everything: silence
  CHECK(points[1].fp == 0);
  CHECK(points[1].fpr == 0.0);  // defined as 0 when nothing is declared
}

TEST_CASE("roc: tpr and fp are non-increasing above the saturation knee") {
  // Below the background band the refractory clock never expires and the
  // detector degenerates to one detection per game, so monotonicity only
  // holds from the best operating point upward.
  const auto corpus = tiny_corpus(123, 2);
  const auto templates = corpus_templates(corpus, 30, {GroupKey::all});
  const auto traces =
      score_corpus(corpus, templates, FusionRule::single(GroupKey::all), {GroupKey::all});
  DetectorConfig base;
  base.rule = FusionRule::single(GroupKey::all);
  const auto thresholds = default_thresholds(traces, 24);
  const auto points = roc_from_traces(traces, thresholds, MatchPolicy{}, base);
  std::size_t knee = 0;
  for (std::size_t i = 1; i < points.size(); ++i)
    if (points[i].tpr > points[knee].tpr) knee = i;
  for (std::size_t i = knee + 1; i < points.size(); ++i) {
    CHECK(points[i].tpr <= points[i - 1].tpr + 1e-12);
    CHECK(points[i].fp <= points[i - 1].fp);
  }
}

TEST_CASE("roc_auc: anchored envelope area") {
  std::vector<RocPoint> points(2);
  points[0].threshold = 1;
  points[0].fpr = 0.5;
  points[0].tpr = 1.0;
  points[1].threshold = 2;
  points[1].fpr = 0.0;
  points[1].tpr = 0.5;
  // envelope: (0,0) -> (0,0.5) -> (0.5,1) -> (1,1)
  CHECK(roc_auc(points) == doctest::Approx(0.875));
}

TEST_CASE("sweep: oversized window is flagged, not fatal") {
  const auto corpus = tiny_corpus(7, 2, 1800);
  SweepGrid grid;
  grid.window_values = {30, 100'000};
  grid.threshold_values = {5.0};
  const auto rows = sweep(corpus, grid, FusionRule::single(GroupKey::all), {GroupKey::all});
  bool saw_degenerate = false, saw_normal = false;
  for (const auto& row : rows) {
    if (row.window_s == 100'000) {
      CHECK(row.degenerate);
      saw_degenerate = true;
    }
    if (row.window_s == 30) {
      CHECK(!row.degenerate);
      saw_normal = true;
    }
  }
  CHECK(saw_degenerate);
  CHECK(saw_normal);
}

TEST_CASE("sweep: pareto rows are mutually non-dominating") {
  const auto corpus = tiny_corpus(55, 2);
  SweepGrid grid;
  grid.window_values = {15, 30};
  const auto rows = sweep(corpus, grid, FusionRule::single(GroupKey::all), {GroupKey::all});
  std::vector<SweepRow> frontier;
  for (const auto& r : rows)
    if (r.pareto) frontier.push_back(r);
  REQUIRE(!frontier.empty());
  for (const auto& a : frontier)
    for (const auto& b : frontier) {
      if (&a == &b) continue;
      const bool dominates = b.tpr >= a.tpr && b.fpr <= a.fpr &&
                             b.mean_delay_s <= a.mean_delay_s &&
                             (b.tpr > a.tpr || b.fpr < a.fpr || b.mean_delay_s < a.mean_delay_s);
      CHECK(!dominates);
    }
}

TEST_CASE("loocv: two identical games give identical folds and a pooled aggregate") {
  const auto corpus = tiny_corpus(31, 2);
  const auto report = loocv(corpus, {15, 30}, FusionRule::single(GroupKey::all), {GroupKey::all});
  REQUIRE(report.folds.size() == 2);
  CHECK(report.folds[0].window_s == report.folds[1].window_s);
  CHECK(report.folds[0].threshold == report.folds[1].threshold);
  CHECK(report.folds[0].result.tp == report.folds[1].result.tp);
  CHECK(report.aggregate.tp == report.folds[0].result.tp + report.folds[1].result.tp);
  CHECK(report.aggregate.fp == report.folds[0].result.fp + report.folds[1].result.fp);
  CHECK(report.aggregate.fn == report.folds[0].result.fn + report.folds[1].result.fn);
  CHECK(report.aggregate.tp + report.aggregate.fn == 6);  // 3 events per game
}

TEST_CASE("loocv: refuses a single-game corpus") {
  const auto corpus = tiny_corpus(31, 1);
  CHECK_THROWS_AS(loocv(corpus, {30}, FusionRule::single(GroupKey::all), {GroupKey::all}),
                  std::invalid_argument);
}

TEST_CASE("eval report json carries the headline numbers") {
  EvalReport report;
  MatchResult r;
  r.tp = 2;
  r.fp = 1;
  r.fn = 0;
  r.delays_s = {40.0, 50.0};
  report.add("game_01", r);
  CHECK(report.tpr() == doctest::Approx(1.0));
  CHECK(report.fpr() == doctest::Approx(1.0 / 3.0));
  CHECK(report.mean_delay_s() == doctest::Approx(45.0));
  CHECK(report.delay_share_within(40.0) == doctest::Approx(0.5));
  const auto json = report.to_json_string();
  CHECK(json.find("\"tp\": 2") != std::string::npos);
  CHECK(json.find("game_01") != std::string::npos);
}
