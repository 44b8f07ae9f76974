#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pulsegate/corpus.hpp"
#include "pulsegate/detection.hpp"
#include "pulsegate/grouping.hpp"
#include "pulsegate/model.hpp"
#include "pulsegate/templates.hpp"

namespace pulsegate {

/// Detection-to-event matching rule: a detection matches the earliest
/// unmatched event no more than match_window_s before it. One-to-one.
struct MatchPolicy {
  int match_window_s = 180;
  bool one_to_one = true;
};

struct MatchResult {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  std::vector<double> delays_s;

  double tpr() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
  // Fraction of declared detections that match no event. Event detection has
  // no countable negative population, so this is a precision complement, not
  // a classical per-negative rate.
  double fpr() const { return tp + fp == 0 ? 0.0 : static_cast<double>(fp) / (tp + fp); }
  double mean_delay_s() const;
};

/// Greedy chronological matching; both inputs must be time-sorted.
MatchResult match_detections(std::span<const Detection> dets,
                             std::span<const GroundTruthEvent> truth,
                             const MatchPolicy& policy = {});

struct EvalReport {
  int tp = 0, fp = 0, fn = 0;
  std::vector<double> delays_s;
  std::map<std::string, MatchResult> per_game;

  double tpr() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
  double fpr() const { return tp + fp == 0 ? 0.0 : static_cast<double>(fp) / (tp + fp); }
  double mean_delay_s() const;
  double delay_share_within(double seconds) const;
  double max_delay_s() const;
  void add(const std::string& game_id, const MatchResult& r);

  std::string to_json_string() const;
};

/// One game with its per-group binned series, ready for detection runs.
struct PreparedGame {
  std::string id;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  std::map<GroupKey, BinnedSeries> series;
  std::vector<GroundTruthEvent> truth;
};

using PreparedCorpus = std::vector<PreparedGame>;

/// Splits and bins every game once; all seven groups are prepared so any rule
/// can run without another pass over the messages.
PreparedCorpus prepare_corpus(const Corpus& corpus,
                              const MarkerConfig& markers = MarkerConfig::defaults());

/// Per-game templates at one window, merged n-weighted across games.
TemplateSet corpus_templates(const PreparedCorpus& corpus, int window_s,
                             const std::set<GroupKey>& groups,
                             std::optional<std::size_t> skip_game = std::nullopt,
                             BaselineMode baseline = BaselineMode::keep);

/// Fused score trace per game for one rule/window configuration.
struct ScoredGame {
  std::string id;
  std::vector<ScorePoint> fused;
  const PreparedGame* game = nullptr;
};

std::vector<ScoredGame> score_corpus(const PreparedCorpus& corpus, const TemplateSet& templates,
                                     const FusionRule& rule, const std::set<GroupKey>& groups,
                                     TemplateScaling scaling = TemplateScaling::raw,
                                     std::optional<std::size_t> only_game = std::nullopt,
                                     std::optional<std::size_t> skip_game = std::nullopt);

struct RocPoint {
  double threshold = 0.0;
  int tp = 0, fp = 0, fn = 0;
  double tpr = 0.0, fpr = 0.0;
};

/// Re-thresholds precomputed traces; one pooled (tpr, fpr) point per threshold.
std::vector<RocPoint> roc_from_traces(const std::vector<ScoredGame>& traces,
                                      std::span<const double> thresholds,
                                      const MatchPolicy& policy, const DetectorConfig& base_cfg);

/// Log-spaced threshold ladder spanning the interesting part of the traces.
std::vector<double> default_thresholds(const std::vector<ScoredGame>& traces, int count = 64);

/// Area under the (fpr, tpr) curve, anchored at (0,0) and extended flat to
/// fpr = 1. A comparison metric between rules, not a classical ROC AUC.
double roc_auc(std::span<const RocPoint> points);

struct SweepGrid {
  std::vector<int> window_values;
  std::vector<double> threshold_values;  // empty = derive per window from the traces
};

struct SweepRow {
  int window_s = 0;
  double threshold = 0.0;
  int tp = 0, fp = 0, fn = 0;
  double tpr = 0.0, fpr = 0.0;
  double mean_delay_s = 0.0;
  bool degenerate = false;  // window did not fit the data after some event
  bool pareto = false;
};

/// Full Cartesian (window x threshold) evaluation over the corpus, with the
/// Pareto frontier over (tpr, -fpr, -mean_delay) marked.
std::vector<SweepRow> sweep(const PreparedCorpus& corpus, const SweepGrid& grid,
                            const FusionRule& rule,
                            const std::set<GroupKey>& groups = default_fusion_groups(),
                            const MatchPolicy& policy = {},
                            const DetectorConfig& base_cfg = {});

std::string sweep_to_csv(std::span<const SweepRow> rows);

struct LoocvFold {
  std::string held_out;
  int window_s = 0;
  double threshold = 0.0;
  MatchResult result;
};

struct LoocvReport {
  EvalReport aggregate;
  std::vector<LoocvFold> folds;
  std::string rule;

  std::string to_json_string() const;
};

/// Leave-one-out cross-validation: per fold, templates and (window, threshold)
/// are fitted on the training games (maximize tpr, tie-break lower fpr, then
/// lower mean delay) and evaluated on the held-out game.
LoocvReport loocv(const PreparedCorpus& corpus, const std::vector<int>& windows,
                  const FusionRule& rule,
                  const std::set<GroupKey>& groups = default_fusion_groups(),
                  const MatchPolicy& policy = {}, const DetectorConfig& base_cfg = {},
                  int n_thresholds = 64);

/// ROC for the temperature baseline, sweeping the percentage-increase
/// threshold with the volume gate fixed.
std::vector<RocPoint> temperature_roc(const PreparedCorpus& corpus, const TemperatureConfig& cfg,
                                      std::span<const double> pct_thresholds,
                                      const MatchPolicy& policy = {});

std::vector<double> temperature_default_thresholds(const PreparedCorpus& corpus,
                                                   const TemperatureConfig& cfg, int count = 48);

std::string roc_to_csv(std::span<const RocPoint> points);

}  // namespace pulsegate
