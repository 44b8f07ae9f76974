#include "pulsegate/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace pulsegate {

std::vector<double> MatchedFilter::taps() const {
  return normalize_template(tpl, normalization).values;
}

std::vector<ScorePoint> filter_output(const BinnedSeries& x, const MatchedFilter& f) {
  if (x.bin_width_ms != 1000)
    throw std::invalid_argument("filter_output: series must use 1 s bins");
  const std::vector<double> v = f.taps();
  const std::size_t w = v.size();
  if (w < 1) throw std::invalid_argument("filter_output: empty template");
  if (x.size() < w) throw std::invalid_argument("filter_output: series shorter than window");

  std::vector<ScorePoint> out;
  out.reserve(x.size() - w + 1);
  for (std::size_t n = w - 1; n < x.size(); ++n) {
    double m = 0.0;
    const double* base = x.counts.data() + (n - w + 1);
    for (std::size_t k = 0; k < w; ++k) m += base[k] * v[k];
    out.push_back({x.bin_end_ms(n), m});
  }
  return out;
}

std::string FusionRule::to_string() const {
  if (kind == DetectionRule::single)
    return "single:" + std::string(pulsegate::to_string(group));
  return std::string(pulsegate::to_string(kind));
}

FusionRule FusionRule::parse(std::string_view s) {
  if (s.rfind("single", 0) == 0) {
    GroupKey g = GroupKey::all;
    if (const auto colon = s.find(':'); colon != std::string_view::npos) {
      const auto parsed = group_from_string(s.substr(colon + 1));
      if (!parsed) throw std::invalid_argument("fusion rule: unknown group in " + std::string(s));
      g = *parsed;
    }
    return single(g);
  }
  const auto r = rule_from_string(s);
  if (!r || *r == DetectionRule::temperature)
    throw std::invalid_argument("fusion rule: unknown rule " + std::string(s));
  return {*r, GroupKey::all};
}

std::set<GroupKey> FusionRule::required_groups(const std::set<GroupKey>& configured) const {
  switch (kind) {
    case DetectionRule::single: return {group};
    case DetectionRule::delay: return {GroupKey::inactive, GroupKey::short_text};
    default: return configured;
  }
}

namespace {

void check_alignment(const std::map<GroupKey, std::vector<ScorePoint>>& scores) {
  const auto& first = scores.begin()->second;
  for (const auto& [g, seq] : scores) {
    if (seq.size() != first.size())
      throw std::invalid_argument("fuse: misaligned series (length mismatch for group " +
                                  std::string(to_string(g)) + ")");
    if (!seq.empty() && (seq.front().ts_ms != first.front().ts_ms ||
                         seq.back().ts_ms != first.back().ts_ms))
      throw std::invalid_argument("fuse: misaligned series (timestamp mismatch for group " +
                                  std::string(to_string(g)) + ")");
  }
}

}  // namespace

std::vector<ScorePoint> fuse(const std::map<GroupKey, std::vector<ScorePoint>>& scores,
                             const FusionRule& rule, const std::set<GroupKey>& groups) {
  if (scores.empty()) throw std::invalid_argument("fuse: no score sequences");
  check_alignment(scores);

  if (rule.kind == DetectionRule::single) {
    const auto it = scores.find(rule.group);
    if (it == scores.end())
      throw std::invalid_argument("fuse: wrong group set (missing " +
                                  std::string(to_string(rule.group)) + ")");
    return it->second;
  }

  const std::set<GroupKey> required = rule.required_groups(groups);
  std::set<GroupKey> present;
  for (const auto& [g, seq] : scores) present.insert(g);
  if (present != required) throw std::invalid_argument("fuse: wrong group set for rule");

  const std::size_t n = scores.begin()->second.size();
  std::vector<ScorePoint> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].ts_ms = scores.begin()->second[i].ts_ms;

  switch (rule.kind) {
    case DetectionRule::max:
      for (std::size_t i = 0; i < n; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (const auto& [g, seq] : scores) m = std::max(m, seq[i].score);
        out[i].score = m;
      }
      break;
    case DetectionRule::mean:
      for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (const auto& [g, seq] : scores) s += seq[i].score;
        out[i].score = s / static_cast<double>(scores.size());
      }
      break;
    case DetectionRule::product:
      for (std::size_t i = 0; i < n; ++i) {
        double p = 1.0;
        for (const auto& [g, seq] : scores) p *= seq[i].score;
        out[i].score = p;
      }
      break;
    case DetectionRule::delay: {
      const auto& inactive = scores.at(GroupKey::inactive);
      const auto& short_text = scores.at(GroupKey::short_text);
      for (std::size_t i = 0; i < n; ++i)
        out[i].score = 0.5 * (inactive[i].score + short_text[i].score);
      break;
    }
    default:
      throw std::invalid_argument("fuse: unsupported rule");
  }
  return out;
}

std::vector<Detection> detect(std::span<const ScorePoint> fused, const DetectorConfig& cfg) {
  for (std::size_t i = 1; i < fused.size(); ++i)
    if (fused[i].ts_ms < fused[i - 1].ts_ms)
      throw std::invalid_argument("detect: scores not time-sorted");

  const std::int64_t refractory_ms = static_cast<std::int64_t>(cfg.refractory_s) * 1000;
  std::vector<Detection> out;
  bool has_supra = false;
  std::int64_t last_supra_ms = 0;
  for (const ScorePoint& p : fused) {
    if (p.score < cfg.threshold) continue;
    if (!has_supra || p.ts_ms - last_supra_ms >= refractory_ms)
      out.push_back({p.ts_ms, p.score, cfg.rule.kind, cfg.kind});
    has_supra = true;
    last_supra_ms = p.ts_ms;  // suppressed instants extend the same event
  }
  return out;
}

namespace {

std::map<GroupKey, std::vector<ScorePoint>> per_group_scores(
    const std::map<GroupKey, BinnedSeries>& series, const TemplateSet& templates,
    const std::set<GroupKey>& needed, TemplateScaling scaling) {
  std::map<GroupKey, std::vector<ScorePoint>> scores;
  for (GroupKey g : needed) {
    const auto s = series.find(g);
    if (s == series.end())
      throw std::invalid_argument("detect: missing series for group " +
                                  std::string(to_string(g)));
    const auto t = templates.per_group.find(g);
    if (t == templates.per_group.end())
      throw std::invalid_argument("detect: missing template for group " +
                                  std::string(to_string(g)));
    scores[g] = filter_output(s->second, MatchedFilter{t->second, scaling});
  }
  return scores;
}

}  // namespace

std::vector<Detection> detect_offline(const std::map<GroupKey, BinnedSeries>& series,
                                      const TemplateSet& templates, const DetectorConfig& cfg) {
  const std::set<GroupKey> needed = cfg.rule.required_groups(cfg.groups);
  const auto scores = per_group_scores(series, templates, needed, cfg.scaling);
  return detect(fuse(scores, cfg.rule, needed), cfg);
}

StreamingDetector::StreamingDetector(const TemplateSet& templates, DetectorConfig cfg)
    : cfg_(std::move(cfg)) {
  const std::set<GroupKey> needed = cfg_.rule.required_groups(cfg_.groups);
  for (GroupKey g : needed) {
    const auto it = templates.per_group.find(g);
    if (it == templates.per_group.end())
      throw std::invalid_argument("streaming detector: missing template for group " +
                                  std::string(to_string(g)));
    Channel ch;
    ch.group = g;
    ch.taps = normalize_template(it->second, cfg_.scaling).values;
    if (ch.taps.empty()) throw std::invalid_argument("streaming detector: empty template");
    ch.ring.assign(ch.taps.size(), 0.0);
    group_order_.push_back(g);
    channels_.push_back(std::move(ch));
  }
}

std::optional<Detection> StreamingDetector::push_bin(std::int64_t bin_start_ms,
                                                     const std::map<GroupKey, double>& counts) {
  if (started_ && bin_start_ms != next_expected_ms_)
    throw std::invalid_argument("streaming detector: bins must arrive in order, one per second");
  started_ = true;
  next_expected_ms_ = bin_start_ms + 1000;

  const std::size_t w = channels_.front().taps.size();
  for (Channel& ch : channels_) {
    const auto it = counts.find(ch.group);
    if (it == counts.end())
      throw std::invalid_argument("streaming detector: missing bin for group " +
                                  std::string(to_string(ch.group)));
    ch.ring[head_] = it->second;
  }
  head_ = (head_ + 1) % w;
  if (filled_ < w) {
    ++filled_;
    if (filled_ < w) return std::nullopt;
  }

  // Per-channel sliding dot product, oldest bin first, matching the offline
  // summation order bit for bit.
  double fused_score = 0.0;
  {
    std::vector<double> channel_scores;
    channel_scores.reserve(channels_.size());
    for (const Channel& ch : channels_) {
      double m = 0.0;
      for (std::size_t k = 0; k < w; ++k) m += ch.ring[(head_ + k) % w] * ch.taps[k];
      channel_scores.push_back(m);
    }
    switch (cfg_.rule.kind) {
      case DetectionRule::single:
        fused_score = channel_scores.front();
        break;
      case DetectionRule::max:
        fused_score = *std::max_element(channel_scores.begin(), channel_scores.end());
        break;
      case DetectionRule::mean: {
        double s = 0.0;
        for (double v : channel_scores) s += v;
        fused_score = s / static_cast<double>(channel_scores.size());
        break;
      }
      case DetectionRule::product: {
        double p = 1.0;
        for (double v : channel_scores) p *= v;
        fused_score = p;
        break;
      }
      case DetectionRule::delay:
        fused_score = 0.5 * (channel_scores[0] + channel_scores[1]);
        break;
      default:
        throw std::invalid_argument("streaming detector: unsupported rule");
    }
  }

  const std::int64_t ts = bin_start_ms + 1000;  // bin-end boundary
  if (fused_score < cfg_.threshold) return std::nullopt;
  const std::int64_t refractory_ms = static_cast<std::int64_t>(cfg_.refractory_s) * 1000;
  std::optional<Detection> det;
  if (!has_supra_ || ts - last_supra_ms_ >= refractory_ms)
    det = Detection{ts, fused_score, cfg_.rule.kind, cfg_.kind};
  has_supra_ = true;
  last_supra_ms_ = ts;
  return det;
}

std::vector<ScorePoint> temperature_scores(const BinnedSeries& x, const TemperatureConfig& cfg) {
  if (cfg.min_window_s < 1 || cfg.min_window_s > cfg.max_window_s)
    throw std::invalid_argument("temperature: require 1 <= min_window <= max_window");
  if (x.bin_width_ms != 1000)
    throw std::invalid_argument("temperature: series must use 1 s bins");

  std::vector<double> prefix(x.size() + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) prefix[i + 1] = prefix[i] + x.counts[i];

  std::vector<ScorePoint> out;
  out.reserve(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    double best = -std::numeric_limits<double>::infinity();
    for (int w = cfg.min_window_s; w <= cfg.max_window_s; ++w) {
      const std::int64_t lo = static_cast<std::int64_t>(n) - 2 * w + 1;
      if (lo < 0) break;  // larger windows reach even further back
      const double cur = prefix[n + 1] - prefix[n + 1 - w];
      const double prev = prefix[n + 1 - w] - prefix[n + 1 - 2 * w];
      if (prev > 0.0 && cur >= cfg.volume_threshold)
        best = std::max(best, (cur - prev) / prev);
    }
    out.push_back({x.bin_end_ms(n), best});
  }
  return out;
}

std::vector<Detection> temperature_detect(const BinnedSeries& x, const TemperatureConfig& cfg) {
  DetectorConfig dc;
  dc.threshold = cfg.pct_increase_threshold;
  dc.refractory_s = cfg.refractory_s;
  dc.rule = FusionRule{DetectionRule::temperature, GroupKey::all};
  dc.kind = cfg.kind;
  return detect(temperature_scores(x, cfg), dc);
}

}  // namespace pulsegate
