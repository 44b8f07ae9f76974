#include "pulsegate/pipeline.hpp"

#include <limits>
#include <stdexcept>

namespace pulsegate {

StreamingPipeline::StreamingPipeline(const TemplateSet& templates, DetectorConfig cfg,
                                     MarkerConfig markers, std::int64_t start_ms)
    : classifier_(std::move(markers)),
      detector_(templates, std::move(cfg)),
      bin_start_ms_(start_ms),
      last_ts_ms_(std::numeric_limits<std::int64_t>::min()) {
  for (GroupKey g : detector_.required_groups()) pending_[g] = 0.0;
}

void StreamingPipeline::close_bins_until(std::int64_t ts_ms, std::vector<Detection>& out) {
  while (bin_start_ms_ + 1000 <= ts_ms) {
    if (auto det = detector_.push_bin(bin_start_ms_, pending_)) {
      detections_.push_back(*det);
      out.push_back(*det);
      if (on_detection) on_detection(*det);
    }
    if (on_bin) on_bin(bin_start_ms_, pending_volume_);
    for (auto& [g, c] : pending_) c = 0.0;
    pending_volume_ = 0;
    bin_start_ms_ += 1000;
  }
}

std::vector<Detection> StreamingPipeline::feed(const Message& m) {
  if (m.ts_ms < last_ts_ms_)
    throw std::invalid_argument("streaming pipeline: messages must arrive in time order");
  last_ts_ms_ = m.ts_ms;

  std::vector<Detection> fired;
  close_bins_until(m.ts_ms, fired);

  // classification state always advances, even for pre-window messages
  const GroupMembership membership = classifier_.classify(m);
  if (m.ts_ms >= bin_start_ms_) {
    for (auto& [g, c] : pending_)
      if (membership.in(g)) c += 1.0;
    ++pending_volume_;
  }
  return fired;
}

std::vector<Detection> StreamingPipeline::flush(std::int64_t end_ms) {
  std::vector<Detection> fired;
  close_bins_until(end_ms, fired);
  return fired;
}

}  // namespace pulsegate
