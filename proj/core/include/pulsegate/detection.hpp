#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pulsegate/model.hpp"
#include "pulsegate/templates.hpp"

namespace pulsegate {

/// Matched filter for one group: the time-reversed event template. Templates
/// are real-valued count rates, so the conjugate in the textbook form is a
/// no-op and the sliding correlation below is the convolution with H.
struct MatchedFilter {
  EventTemplate tpl;
  TemplateScaling normalization = TemplateScaling::raw;

  /// Template values after normalization (what the correlation uses).
  std::vector<double> taps() const;
};

struct ScorePoint {
  std::int64_t ts_ms = 0;  // bin-end boundary
  double score = 0.0;

  bool operator==(const ScorePoint&) const = default;
};

/// Correlates the stream with the template: for each bin n >= W-1,
/// m[n] = sum_k x[n-W+1+k] * V[k]. Output timestamps are bin-end boundaries;
/// output length is len(x) - W + 1.
std::vector<ScorePoint> filter_output(const BinnedSeries& x, const MatchedFilter& f);

/// Pointwise combination of per-group filter outputs.
struct FusionRule {
  DetectionRule kind = DetectionRule::mean;
  GroupKey group = GroupKey::all;  // only used by kind == single

  static FusionRule single(GroupKey g) { return {DetectionRule::single, g}; }
  static FusionRule max() { return {DetectionRule::max, GroupKey::all}; }
  static FusionRule mean() { return {DetectionRule::mean, GroupKey::all}; }
  static FusionRule product() { return {DetectionRule::product, GroupKey::all}; }
  static FusionRule delay() { return {DetectionRule::delay, GroupKey::all}; }

  std::string to_string() const;
  static FusionRule parse(std::string_view s);

  /// The sub-streams this rule consumes given the configured group set.
  std::set<GroupKey> required_groups(const std::set<GroupKey>& configured) const;
};

/// max / mean / product run over exactly the configured group set; delay is
/// (m_inactive + m_short) / 2; single passes one group's scores through.
std::vector<ScorePoint> fuse(const std::map<GroupKey, std::vector<ScorePoint>>& scores,
                             const FusionRule& rule, const std::set<GroupKey>& groups);

struct DetectorConfig {
  int window_s = 30;
  double threshold = 8.0;
  int refractory_s = 300;
  FusionRule rule = FusionRule::mean();
  std::set<GroupKey> groups = default_fusion_groups();
  TemplateScaling scaling = TemplateScaling::raw;
  std::string kind = "touchdown";
};

/// Thresholds a fused score trace. A detection fires the first instant the
/// score reaches the threshold; a supra-threshold instant within refractory_s
/// of the last supra-threshold instant is attributed to the same event and
/// restarts the refractory clock (continuous excitement extends the event).
std::vector<Detection> detect(std::span<const ScorePoint> fused, const DetectorConfig& cfg);

/// Full offline pipeline over per-group binned series: per-group matched
/// filters, fusion, threshold + refractory.
std::vector<Detection> detect_offline(const std::map<GroupKey, BinnedSeries>& series,
                                      const TemplateSet& templates, const DetectorConfig& cfg);

/// Incremental detector fed one aligned 1-second bin per group at a time.
/// Emits exactly what the offline pipeline emits on the same bins; per-bin
/// cost is O(W) per group.
class StreamingDetector {
 public:
  StreamingDetector(const TemplateSet& templates, DetectorConfig cfg);

  /// bin_start_ms must advance by exactly one bin per call. counts must hold
  /// every required group.
  std::optional<Detection> push_bin(std::int64_t bin_start_ms,
                                    const std::map<GroupKey, double>& counts);

  const std::vector<GroupKey>& required_groups() const { return group_order_; }
  const DetectorConfig& config() const { return cfg_; }

 private:
  struct Channel {
    GroupKey group;
    std::vector<double> taps;
    std::vector<double> ring;  // last W bins, ring[head_] is the oldest
  };

  DetectorConfig cfg_;
  std::vector<GroupKey> group_order_;
  std::vector<Channel> channels_;
  std::size_t head_ = 0;
  std::size_t filled_ = 0;
  std::int64_t next_expected_ms_ = 0;
  bool started_ = false;
  std::int64_t last_supra_ms_ = 0;
  bool has_supra_ = false;
};

/// Variable-window baseline: grow the window from min to max; declare an
/// event when both the relative volume increase and the absolute volume in
/// the window clear their thresholds.
struct TemperatureConfig {
  int min_window_s = 10;
  int max_window_s = 60;
  double pct_increase_threshold = 1.2;
  double volume_threshold = 26.0;
  int refractory_s = 300;
  std::string kind = "touchdown";
};

/// Best percentage increase achievable at each bin over the window range
/// (volume-gated); -inf where no window qualifies. Thresholding this trace at
/// pct_increase_threshold reproduces temperature_detect.
std::vector<ScorePoint> temperature_scores(const BinnedSeries& x, const TemperatureConfig& cfg);

std::vector<Detection> temperature_detect(const BinnedSeries& x, const TemperatureConfig& cfg);

}  // namespace pulsegate
