#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "pulsegate/detection.hpp"
#include "pulsegate/grouping.hpp"
#include "pulsegate/model.hpp"
#include "pulsegate/templates.hpp"

namespace pulsegate {

/// Drives the streaming detector from a time-ordered message feed: classifies
/// each message in stream order, accumulates per-second per-group counts, and
/// hands every completed bin to the detector. Emits exactly what the batch
/// pipeline (split_and_bin + detect_offline) emits over the same time range.
class StreamingPipeline {
 public:
  StreamingPipeline(const TemplateSet& templates, DetectorConfig cfg,
                    MarkerConfig markers = MarkerConfig::defaults(), std::int64_t start_ms = 0);

  /// Feed one message (non-decreasing ts_ms). Returns detections fired by
  /// bins that completed strictly before this message's second.
  std::vector<Detection> feed(const Message& m);

  /// Completes and scores every bin up to end_ms (exclusive).
  std::vector<Detection> flush(std::int64_t end_ms);

  /// Total messages per completed bin (the posting-volume trend), observable
  /// through the on_bin hook.
  std::function<void(std::int64_t bin_start_ms, std::int64_t volume)> on_bin;
  std::function<void(const Detection&)> on_detection;

  const std::vector<Detection>& detections() const { return detections_; }

 private:
  void close_bins_until(std::int64_t ts_ms, std::vector<Detection>& out);

  GroupClassifier classifier_;
  StreamingDetector detector_;
  std::int64_t bin_start_ms_;
  std::int64_t last_ts_ms_;
  std::map<GroupKey, double> pending_;
  std::int64_t pending_volume_ = 0;
  std::vector<Detection> detections_;
};

}  // namespace pulsegate
