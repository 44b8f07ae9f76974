#include "pulsegate/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace pulsegate {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> v) {
  if (v.empty()) return kNaN;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

void check_sorted_dets(std::span<const Detection> dets) {
  for (std::size_t i = 1; i < dets.size(); ++i)
    if (dets[i].ts_ms < dets[i - 1].ts_ms)
      throw std::invalid_argument("match_detections: detections not time-sorted");
}

void check_sorted_truth(std::span<const GroundTruthEvent> truth) {
  for (std::size_t i = 1; i < truth.size(); ++i)
    if (truth[i].ts_ms < truth[i - 1].ts_ms)
      throw std::invalid_argument("match_detections: events not time-sorted");
}

}  // namespace

double MatchResult::mean_delay_s() const { return mean_of(delays_s); }

MatchResult match_detections(std::span<const Detection> dets,
                             std::span<const GroundTruthEvent> truth,
                             const MatchPolicy& policy) {
  if (policy.match_window_s < 1)
    throw std::invalid_argument("match policy: match_window_s must be >= 1");
  check_sorted_dets(dets);
  check_sorted_truth(truth);

  const std::int64_t window_ms = static_cast<std::int64_t>(policy.match_window_s) * 1000;
  std::vector<bool> matched(truth.size(), false);
  MatchResult r;
  std::size_t first_candidate = 0;
  for (const Detection& d : dets) {
    // events more than the window before this detection can never match again
    while (first_candidate < truth.size() && d.ts_ms - truth[first_candidate].ts_ms > window_ms)
      ++first_candidate;
    bool hit = false;
    for (std::size_t e = first_candidate; e < truth.size() && truth[e].ts_ms <= d.ts_ms; ++e) {
      if (matched[e]) continue;
      const std::int64_t delay_ms = d.ts_ms - truth[e].ts_ms;
      if (delay_ms > window_ms) continue;  // stale unmatched event, keep scanning
      matched[e] = true;
      ++r.tp;
      r.delays_s.push_back(static_cast<double>(delay_ms) / 1000.0);
      hit = true;
      break;
    }
    if (!hit) ++r.fp;
  }
  for (bool m : matched)
    if (!m) ++r.fn;
  return r;
}

double EvalReport::mean_delay_s() const { return mean_of(delays_s); }

double EvalReport::delay_share_within(double seconds) const {
  if (delays_s.empty()) return 0.0;
  std::size_t n = 0;
  for (double d : delays_s)
    if (d <= seconds) ++n;
  return static_cast<double>(n) / static_cast<double>(delays_s.size());
}

double EvalReport::max_delay_s() const {
  double m = 0.0;
  for (double d : delays_s) m = std::max(m, d);
  return m;
}

void EvalReport::add(const std::string& game_id, const MatchResult& r) {
  tp += r.tp;
  fp += r.fp;
  fn += r.fn;
  delays_s.insert(delays_s.end(), r.delays_s.begin(), r.delays_s.end());
  per_game[game_id] = r;
}

std::string EvalReport::to_json_string() const {
  nlohmann::ordered_json j;
  j["tp"] = tp;
  j["fp"] = fp;
  j["fn"] = fn;
  j["tpr"] = tpr();
  j["fpr"] = fpr();
  j["mean_delay_s"] = delays_s.empty() ? 0.0 : mean_delay_s();
  j["delays_s"] = delays_s;
  nlohmann::ordered_json pg = nlohmann::ordered_json::object();
  for (const auto& [id, r] : per_game) {
    nlohmann::ordered_json g;
    g["tp"] = r.tp;
    g["fp"] = r.fp;
    g["fn"] = r.fn;
    g["tpr"] = r.tpr();
    g["fpr"] = r.fpr();
    g["delays_s"] = r.delays_s;
    pg[id] = std::move(g);
  }
  j["per_game"] = std::move(pg);
  return j.dump(2) + "\n";
}

PreparedCorpus prepare_corpus(const Corpus& corpus, const MarkerConfig& markers) {
  PreparedCorpus out;
  out.reserve(corpus.games.size());
  for (const GameData& g : corpus.games) {
    PreparedGame p;
    p.id = g.id;
    p.start_ms = 0;
    p.end_ms = static_cast<std::int64_t>(g.duration_s) * 1000;
    p.series = split_and_bin(g.messages, p.start_ms, p.end_ms, 1000, markers);
    p.truth = g.truth;
    out.push_back(std::move(p));
  }
  return out;
}

TemplateSet corpus_templates(const PreparedCorpus& corpus, int window_s,
                             const std::set<GroupKey>& groups,
                             std::optional<std::size_t> skip_game, BaselineMode baseline) {
  std::vector<TemplateSet> sets;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (skip_game && *skip_game == i) continue;
    if (corpus[i].truth.empty()) continue;
    TemplateSet s =
        build_template_set(corpus[i].series, corpus[i].truth, window_s, groups, baseline);
    s.built_from = {corpus[i].id};
    sets.push_back(std::move(s));
  }
  if (sets.empty()) throw std::runtime_error("corpus_templates: no games with events");
  return merge_template_sets(sets);
}

std::vector<ScoredGame> score_corpus(const PreparedCorpus& corpus, const TemplateSet& templates,
                                     const FusionRule& rule, const std::set<GroupKey>& groups,
                                     TemplateScaling scaling,
                                     std::optional<std::size_t> only_game,
                                     std::optional<std::size_t> skip_game) {
  const std::set<GroupKey> needed = rule.required_groups(groups);
  std::vector<ScoredGame> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (only_game && *only_game != i) continue;
    if (skip_game && *skip_game == i) continue;
    std::map<GroupKey, std::vector<ScorePoint>> scores;
    for (GroupKey g : needed) {
      const auto t = templates.per_group.find(g);
      if (t == templates.per_group.end())
        throw std::invalid_argument("score_corpus: missing template for group " +
                                    std::string(to_string(g)));
      scores[g] = filter_output(corpus[i].series.at(g), MatchedFilter{t->second, scaling});
    }
    out.push_back({corpus[i].id, fuse(scores, rule, needed), &corpus[i]});
  }
  return out;
}

std::vector<RocPoint> roc_from_traces(const std::vector<ScoredGame>& traces,
                                      std::span<const double> thresholds,
                                      const MatchPolicy& policy, const DetectorConfig& base_cfg) {
  std::vector<RocPoint> out;
  out.reserve(thresholds.size());
  for (double threshold : thresholds) {
    DetectorConfig cfg = base_cfg;
    cfg.threshold = threshold;
    RocPoint p;
    p.threshold = threshold;
    for (const ScoredGame& t : traces) {
      const auto dets = detect(t.fused, cfg);
      const MatchResult r = match_detections(dets, t.game->truth, policy);
      p.tp += r.tp;
      p.fp += r.fp;
      p.fn += r.fn;
    }
    p.tpr = p.tp + p.fn == 0 ? 0.0 : static_cast<double>(p.tp) / (p.tp + p.fn);
    p.fpr = p.tp + p.fp == 0 ? 0.0 : static_cast<double>(p.fp) / (p.tp + p.fp);
    out.push_back(p);
  }
  return out;
}

std::vector<double> default_thresholds(const std::vector<ScoredGame>& traces, int count) {
  std::vector<double> scores;
  for (const ScoredGame& t : traces)
    for (const ScorePoint& p : t.fused)
      if (std::isfinite(p.score)) scores.push_back(p.score);
  if (scores.empty() || count < 1) return {1.0};
  std::sort(scores.begin(), scores.end());
  const double max_score = scores.back();
  // Span from the middle of the background band to just above the maximum.
  // Rungs below the background ceiling saturate the detector and are never
  // selected, so the ladder only needs to bracket the informative region.
  double lo = scores[static_cast<std::size_t>(0.50 * (scores.size() - 1))];
  if (lo <= 0.0) {
    // product-rule traces are zero-heavy; start from the smallest positive score
    const auto it = std::upper_bound(scores.begin(), scores.end(), 0.0);
    lo = it == scores.end() ? 1.0 : *it;
  }
  double hi = max_score * 1.02;
  if (!(hi > lo)) return {lo};
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  const double log_lo = std::log(lo), log_hi = std::log(hi);
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    out.push_back(std::exp(log_lo + f * (log_hi - log_lo)));
  }
  return out;
}

double roc_auc(std::span<const RocPoint> points) {
  std::vector<std::pair<double, double>> pts;  // (fpr, tpr)
  pts.emplace_back(0.0, 0.0);
  for (const RocPoint& p : points) pts.emplace_back(p.fpr, p.tpr);
  std::sort(pts.begin(), pts.end());
  // non-decreasing upper envelope, extended flat to fpr = 1
  double best = 0.0;
  for (auto& [f, t] : pts) {
    best = std::max(best, t);
    t = best;
  }
  pts.emplace_back(1.0, best);
  double area = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    area += (pts[i].first - pts[i - 1].first) * 0.5 * (pts[i].second + pts[i - 1].second);
  return area;
}

std::vector<SweepRow> sweep(const PreparedCorpus& corpus, const SweepGrid& grid,
                            const FusionRule& rule, const std::set<GroupKey>& groups,
                            const MatchPolicy& policy, const DetectorConfig& base_cfg) {
  if (grid.window_values.empty()) throw std::invalid_argument("sweep: empty window grid");
  std::vector<SweepRow> rows;
  const std::set<GroupKey> needed = rule.required_groups(groups);
  for (int w : grid.window_values) {
    TemplateSet templates;
    bool degenerate = false;
    try {
      templates = corpus_templates(corpus, w, needed);
    } catch (const std::exception&) {
      degenerate = true;  // window runs off the data after some event
    }
    if (degenerate) {
      SweepRow row;
      row.window_s = w;
      row.threshold = kNaN;
      row.tpr = row.fpr = row.mean_delay_s = kNaN;
      row.degenerate = true;
      rows.push_back(row);
      continue;
    }
    const auto traces = score_corpus(corpus, templates, rule, groups, base_cfg.scaling);
    const std::vector<double> thresholds = grid.threshold_values.empty()
                                               ? default_thresholds(traces)
                                               : grid.threshold_values;
    for (double threshold : thresholds) {
      DetectorConfig cfg = base_cfg;
      cfg.rule = rule;
      cfg.window_s = w;
      cfg.threshold = threshold;
      SweepRow row;
      row.window_s = w;
      row.threshold = threshold;
      std::vector<double> delays;
      for (const ScoredGame& t : traces) {
        const auto dets = detect(t.fused, cfg);
        const MatchResult r = match_detections(dets, t.game->truth, policy);
        row.tp += r.tp;
        row.fp += r.fp;
        row.fn += r.fn;
        delays.insert(delays.end(), r.delays_s.begin(), r.delays_s.end());
      }
      row.tpr = row.tp + row.fn == 0 ? 0.0 : static_cast<double>(row.tp) / (row.tp + row.fn);
      row.fpr = row.tp + row.fp == 0 ? 0.0 : static_cast<double>(row.fp) / (row.tp + row.fp);
      row.mean_delay_s = mean_of(delays);
      rows.push_back(row);
    }
  }

  // Pareto frontier over (tpr up, fpr down, mean delay down)
  auto delay_key = [](const SweepRow& r) {
    return std::isnan(r.mean_delay_s) ? std::numeric_limits<double>::infinity() : r.mean_delay_s;
  };
  for (SweepRow& a : rows) {
    if (a.degenerate) continue;
    bool dominated = false;
    for (const SweepRow& b : rows) {
      if (&a == &b || b.degenerate) continue;
      const bool geq = b.tpr >= a.tpr && b.fpr <= a.fpr && delay_key(b) <= delay_key(a);
      const bool strict = b.tpr > a.tpr || b.fpr < a.fpr || delay_key(b) < delay_key(a);
      if (geq && strict) {
        dominated = true;
        break;
      }
    }
    a.pareto = !dominated;
  }
  return rows;
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "window_s,threshold,tp,fp,fn,tpr,fpr,mean_delay_s,degenerate,pareto\n";
  for (const SweepRow& r : rows) {
    out << r.window_s << ',' << r.threshold << ',' << r.tp << ',' << r.fp << ',' << r.fn << ','
        << r.tpr << ',' << r.fpr << ',' << r.mean_delay_s << ',' << (r.degenerate ? 1 : 0) << ','
        << (r.pareto ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string LoocvReport::to_json_string() const {
  nlohmann::ordered_json j;
  j["rule"] = rule;
  j["aggregate"] = nlohmann::ordered_json::parse(aggregate.to_json_string());
  nlohmann::ordered_json fs = nlohmann::ordered_json::array();
  for (const LoocvFold& f : folds) {
    nlohmann::ordered_json fj;
    fj["held_out"] = f.held_out;
    fj["window_s"] = f.window_s;
    fj["threshold"] = f.threshold;
    fj["tp"] = f.result.tp;
    fj["fp"] = f.result.fp;
    fj["fn"] = f.result.fn;
    fj["delays_s"] = f.result.delays_s;
    fs.push_back(std::move(fj));
  }
  j["folds"] = std::move(fs);
  return j.dump(2) + "\n";
}

LoocvReport loocv(const PreparedCorpus& corpus, const std::vector<int>& windows,
                  const FusionRule& rule, const std::set<GroupKey>& groups,
                  const MatchPolicy& policy, const DetectorConfig& base_cfg, int n_thresholds) {
  if (corpus.size() < 2) throw std::invalid_argument("loocv: need at least 2 games");
  if (windows.empty()) throw std::invalid_argument("loocv: empty window grid");

  LoocvReport report;
  report.rule = rule.to_string();

  struct Candidate {
    int window_s = 0;
    double threshold = 0.0;
    double tpr = -1.0, fpr = 2.0, delay = std::numeric_limits<double>::infinity();
  };

  for (std::size_t fold = 0; fold < corpus.size(); ++fold) {
    Candidate best;
    TemplateSet best_templates;
    for (int w : windows) {
      TemplateSet templates;
      try {
        templates = corpus_templates(corpus, w, rule.required_groups(groups), fold);
      } catch (const std::exception&) {
        continue;  // window does not fit the training data
      }
      const auto traces =
          score_corpus(corpus, templates, rule, groups, base_cfg.scaling, std::nullopt, fold);
      const auto thresholds = default_thresholds(traces, n_thresholds);
      for (double threshold : thresholds) {
        DetectorConfig cfg = base_cfg;
        cfg.rule = rule;
        cfg.window_s = w;
        cfg.threshold = threshold;
        int tp = 0, fp = 0, fn = 0;
        std::vector<double> delays;
        for (const ScoredGame& t : traces) {
          const auto dets = detect(t.fused, cfg);
          const MatchResult r = match_detections(dets, t.game->truth, policy);
          tp += r.tp;
          fp += r.fp;
          fn += r.fn;
          delays.insert(delays.end(), r.delays_s.begin(), r.delays_s.end());
        }
        Candidate c;
        c.window_s = w;
        c.threshold = threshold;
        c.tpr = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
        c.fpr = tp + fp == 0 ? 0.0 : static_cast<double>(fp) / (tp + fp);
        const double md = mean_of(delays);
        c.delay = std::isnan(md) ? std::numeric_limits<double>::infinity() : md;
        // maximize tpr; tie-break lower fpr, then lower mean delay, then the
        // shorter window, then the higher (more conservative) threshold
        const bool better =
            c.tpr > best.tpr ||
            (c.tpr == best.tpr &&
             (c.fpr < best.fpr ||
              (c.fpr == best.fpr &&
               (c.delay < best.delay ||
                (c.delay == best.delay &&
                 (c.window_s < best.window_s ||
                  (c.window_s == best.window_s && c.threshold > best.threshold)))))));
        if (better) {
          best = c;
          best_templates = templates;
        }
      }
    }
    if (best.tpr < 0.0) throw std::runtime_error("loocv: no feasible window for fold " +
                                                 corpus[fold].id);

    DetectorConfig cfg = base_cfg;
    cfg.rule = rule;
    cfg.window_s = best.window_s;
    cfg.threshold = best.threshold;
    const auto test_trace =
        score_corpus(corpus, best_templates, rule, groups, base_cfg.scaling, fold);
    const auto dets = detect(test_trace.front().fused, cfg);
    const MatchResult r = match_detections(dets, corpus[fold].truth, policy);
    report.aggregate.add(corpus[fold].id, r);
    report.folds.push_back({corpus[fold].id, best.window_s, best.threshold, r});
  }
  return report;
}

std::vector<RocPoint> temperature_roc(const PreparedCorpus& corpus, const TemperatureConfig& cfg,
                                      std::span<const double> pct_thresholds,
                                      const MatchPolicy& policy) {
  std::vector<RocPoint> out;
  std::vector<std::vector<ScorePoint>> traces;
  traces.reserve(corpus.size());
  for (const PreparedGame& g : corpus)
    traces.push_back(temperature_scores(g.series.at(GroupKey::all), cfg));
  for (double threshold : pct_thresholds) {
    TemperatureConfig tc = cfg;
    tc.pct_increase_threshold = threshold;
    DetectorConfig dc;
    dc.threshold = threshold;
    dc.refractory_s = cfg.refractory_s;
    dc.rule = FusionRule{DetectionRule::temperature, GroupKey::all};
    dc.kind = cfg.kind;
    RocPoint p;
    p.threshold = threshold;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto dets = detect(traces[i], dc);
      const MatchResult r = match_detections(dets, corpus[i].truth, policy);
      p.tp += r.tp;
      p.fp += r.fp;
      p.fn += r.fn;
    }
    p.tpr = p.tp + p.fn == 0 ? 0.0 : static_cast<double>(p.tp) / (p.tp + p.fn);
    p.fpr = p.tp + p.fp == 0 ? 0.0 : static_cast<double>(p.fp) / (p.tp + p.fp);
    out.push_back(p);
  }
  return out;
}

std::vector<double> temperature_default_thresholds(const PreparedCorpus& corpus,
                                                   const TemperatureConfig& cfg, int count) {
  std::vector<ScoredGame> fake;
  std::vector<std::vector<ScorePoint>> traces;
  for (const PreparedGame& g : corpus) {
    traces.push_back(temperature_scores(g.series.at(GroupKey::all), cfg));
    fake.push_back({g.id, traces.back(), &g});
  }
  return default_thresholds(fake, count);
}

std::string roc_to_csv(std::span<const RocPoint> points) {
  std::ostringstream out;
  out << "threshold,tp,fp,fn,tpr,fpr\n";
  for (const RocPoint& p : points)
    out << p.threshold << ',' << p.tp << ',' << p.fp << ',' << p.fn << ',' << p.tpr << ','
        << p.fpr << '\n';
  return out.str();
}

}  // namespace pulsegate
