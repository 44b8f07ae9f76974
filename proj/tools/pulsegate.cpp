// pulsegate: one binary for the whole pipeline - synthetic corpus generation,
// ingest/replay, template building, offline and streaming detection, parameter
// sweeps, ROC/LOOCV evaluation, generator calibration, and the HTTP service.

#include <atomic>
#include <csignal>
#include <memory>
#include <mutex>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "pulsegate/corpus.hpp"
#include "pulsegate/detection.hpp"
#include "pulsegate/evaluation.hpp"
#include "pulsegate/grouping.hpp"
#include "pulsegate/ingest.hpp"
#include "pulsegate/model.hpp"
#include "pulsegate/pipeline.hpp"
#include "pulsegate/service.hpp"
#include "pulsegate/synth.hpp"
#include "pulsegate/templates.hpp"

using namespace pulsegate;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

std::set<GroupKey> parse_groups(const std::string& csv) {
  std::set<GroupKey> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto g = group_from_string(item);
    if (!g) throw std::invalid_argument("unknown group: " + item);
    out.insert(*g);
  }
  if (out.empty()) throw std::invalid_argument("empty group set");
  return out;
}

std::vector<std::string> parse_keywords(const std::string& csv,
                                        const std::string& keywords_file) {
  std::vector<std::string> out;
  if (!keywords_file.empty()) {
    std::ifstream in(keywords_file);
    if (!in) throw std::runtime_error("cannot open keywords file: " + keywords_file);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) out.push_back(line);
  } else {
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) out.push_back(item);
  }
  return out;
}

MarkerConfig markers_from(const std::string& path) {
  return path.empty() ? MarkerConfig::defaults() : MarkerConfig::load(path);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

void echo_config(const nlohmann::ordered_json& j) { std::cout << j.dump() << "\n"; }

double parse_speed(const std::string& s) {
  if (s == "inf" || s == "infinity" || s == "max") return std::numeric_limits<double>::infinity();
  const double v = std::stod(s);
  if (!(v > 0.0)) throw std::invalid_argument("speed must be > 0");
  return v;
}

std::vector<Message> read_messages(const std::string& source) {
  ParseResult parsed;
  if (source == "-") {
    parsed = parse_stream(std::cin);
  } else {
    parsed = parse_stream_file(source);
  }
  if (parsed.skipped > 0)
    std::cerr << "note: skipped " << parsed.skipped << " malformed line(s)\n";
  return std::move(parsed.messages);
}

struct IngestOptions {
  std::string keywords = "touchdown,td";
  std::string keywords_file;
  std::string match_mode = "substring";
  int cap = 0;  // 0 = uncapped
  std::string markers_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--keywords", keywords, "comma-separated keyword list");
    cmd->add_option("--keywords-file", keywords_file, "file with one keyword per line");
    cmd->add_option("--match-mode", match_mode, "substring|word_boundary")
        ->check(CLI::IsMember({"substring", "word_boundary"}));
    cmd->add_option("--cap", cap, "per-second sampling cap (0 = uncapped)");
    cmd->add_option("--markers", markers_path, "markers.json for device classification");
  }

  std::vector<Message> run(std::vector<Message> msgs) const {
    const KeywordFilter filter(parse_keywords(keywords, keywords_file),
                               match_mode == "substring" ? MatchMode::substring
                                                         : MatchMode::word_boundary);
    msgs = filter_messages(msgs, filter);
    if (cap > 0) msgs = apply_rate_cap(msgs, RateCap{cap});
    return msgs;
  }
};

// Bin range covering every message, aligned to whole seconds.
std::pair<std::int64_t, std::int64_t> bin_range(const std::vector<Message>& msgs) {
  if (msgs.empty()) return {0, 0};
  std::int64_t lo = msgs.front().ts_ms, hi = msgs.front().ts_ms;
  for (const Message& m : msgs) {
    lo = std::min(lo, m.ts_ms);
    hi = std::max(hi, m.ts_ms);
  }
  return {(lo / 1000) * 1000, (hi / 1000 + 1) * 1000};
}

int cmd_generate(int games, std::uint64_t seed, const std::string& out_dir,
                 const std::string& config_path) {
  CorpusConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw std::runtime_error("cannot open config: " + config_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    cfg = corpus_config_from_json(text);
  }
  cfg.n_games = games;
  cfg.seed = seed;

  nlohmann::ordered_json echo = nlohmann::ordered_json::parse(corpus_config_to_json(cfg));
  echo["command"] = "generate";
  echo["out"] = out_dir;
  echo_config(echo);

  generate_corpus(out_dir, cfg);
  const Corpus corpus = Corpus::load(out_dir);
  std::size_t messages = 0;
  for (const auto& g : corpus.games) messages += g.messages.size();
  std::cout << "generated " << corpus.games.size() << " games, " << corpus.total_events()
            << " events, " << messages << " messages -> " << out_dir << "\n";
  return kExitOk;
}

int cmd_templates(const std::string& corpus_dir, int window, const std::string& groups_csv,
                  const std::string& markers_path, const std::string& out_path,
                  bool subtract_baseline) {
  const auto groups = parse_groups(groups_csv);
  nlohmann::ordered_json echo;
  echo["command"] = "templates";
  echo["corpus"] = corpus_dir;
  echo["window_s"] = window;
  echo["groups"] = groups_csv;
  echo["subtract_baseline"] = subtract_baseline;
  echo["out"] = out_path;
  echo_config(echo);

  const Corpus corpus = Corpus::load(corpus_dir);
  const auto prepared = prepare_corpus(corpus, markers_from(markers_path));
  TemplateSet set = corpus_templates(
      prepared, window, groups, std::nullopt,
      subtract_baseline ? BaselineMode::subtract_pre_event_mean : BaselineMode::keep);
  set.save(out_path);
  std::cout << "built " << set.per_group.size() << " template(s) over window " << window
            << " s from " << corpus.games.size() << " games -> " << out_path << "\n";
  return kExitOk;
}

DetectorConfig detector_config_for(const std::string& rule_str, double threshold,
                                   int refractory_s, const std::string& groups_csv,
                                   const std::string& kind) {
  DetectorConfig cfg;
  cfg.rule = FusionRule::parse(rule_str);
  cfg.threshold = threshold;
  cfg.refractory_s = refractory_s;
  cfg.groups = parse_groups(groups_csv);
  cfg.kind = kind;
  return cfg;
}

int cmd_detect(const std::string& source, const std::string& templates_path,
               const std::string& rule_str, double threshold, int window, int refractory_s,
               const std::string& groups_csv, const IngestOptions& ingest,
               const std::string& out_path) {
  nlohmann::ordered_json echo;
  echo["command"] = "detect";
  echo["stream"] = source;
  echo["templates"] = templates_path;
  echo["rule"] = rule_str;
  echo["threshold"] = threshold;
  echo["window_s"] = window;
  echo["refractory_s"] = refractory_s;
  echo["groups"] = groups_csv;
  echo_config(echo);

  std::vector<Message> msgs = ingest.run(read_messages(source));
  std::sort(msgs.begin(), msgs.end(),
            [](const Message& a, const Message& b) { return a.ts_ms < b.ts_ms; });
  const auto [start_ms, end_ms] = bin_range(msgs);
  if (msgs.empty()) throw std::runtime_error("detect: no messages after filtering");

  std::vector<Detection> detections;
  if (rule_str == "temperature") {
    TemperatureConfig cfg;
    cfg.pct_increase_threshold = threshold;
    cfg.refractory_s = refractory_s;
    detections = temperature_detect(bin_messages(msgs, start_ms, end_ms), cfg);
  } else {
    if (templates_path.empty()) throw std::runtime_error("detect: --templates required");
    const TemplateSet templates = TemplateSet::load(templates_path);
    if (templates.window_s != window)
      std::cerr << "note: using template window " << templates.window_s << " s (flag said "
                << window << ")\n";
    DetectorConfig cfg = detector_config_for(rule_str, threshold, refractory_s, groups_csv,
                                             "touchdown");
    cfg.window_s = templates.window_s;
    const auto series =
        split_and_bin(msgs, start_ms, end_ms, 1000, markers_from(ingest.markers_path));
    detections = detect_offline(series, templates, cfg);
  }

  std::ostringstream body;
  for (const Detection& d : detections) body << to_ndjson_line(d);
  if (out_path == "-") {
    std::cout << body.str();
  } else {
    write_file(out_path, body.str());
  }
  std::cout << detections.size() << " detection(s) over " << msgs.size() << " message(s)\n";
  return kExitOk;
}

int cmd_stream(const std::string& source, int listen_port, const std::string& templates_path,
               const std::string& rule_str, double threshold, int refractory_s,
               const std::string& groups_csv, double speed, const IngestOptions& ingest,
               const std::string& out_path) {
  nlohmann::ordered_json echo;
  echo["command"] = "stream";
  echo["stream"] = listen_port >= 0 ? "tcp" : source;
  echo["templates"] = templates_path;
  echo["rule"] = rule_str;
  echo["threshold"] = threshold;
  echo["speed"] = std::isfinite(speed) ? nlohmann::ordered_json(speed)
                                       : nlohmann::ordered_json("inf");

  const TemplateSet templates = TemplateSet::load(templates_path);
  DetectorConfig cfg =
      detector_config_for(rule_str, threshold, refractory_s, groups_csv, "touchdown");
  cfg.window_s = templates.window_s;

  std::ofstream out_file;
  std::ostream* out = &std::cout;
  if (out_path != "-") {
    out_file.open(out_path, std::ios::binary);
    if (!out_file) throw std::runtime_error("cannot write " + out_path);
    out = &out_file;
  }

  if (listen_port >= 0) {
    // live mode: NDJSON lines over one TCP connection, wall-clock pacing is
    // the sender's; keyword filtering still applies per message
    const KeywordFilter filter(parse_keywords(ingest.keywords, ingest.keywords_file),
                               ingest.match_mode == "substring" ? MatchMode::substring
                                                                : MatchMode::word_boundary);
    LineServer server("127.0.0.1", listen_port);
    echo["port"] = server.port();
    echo_config(echo);
    std::unique_ptr<StreamingPipeline> pipeline;  // anchored at the first message's second
    std::size_t received = 0;
    std::int64_t last_ts = 0;
    const std::size_t skipped = server.serve([&](const Message& m) {
      ++received;
      if (!filter.matches(m.text)) return;
      if (!pipeline) {
        pipeline = std::make_unique<StreamingPipeline>(
            templates, cfg, markers_from(ingest.markers_path), (m.ts_ms / 1000) * 1000);
        pipeline->on_detection = [&](const Detection& d) {
          *out << to_ndjson_line(d);
          out->flush();
        };
      }
      pipeline->feed(m);
      last_ts = m.ts_ms;
    });
    if (pipeline) pipeline->flush((last_ts / 1000 + 1) * 1000);
    std::cerr << received << " message(s), " << skipped << " skipped, "
              << (pipeline ? pipeline->detections().size() : 0) << " detection(s)\n";
    return kExitOk;
  }

  echo_config(echo);
  std::vector<Message> msgs = ingest.run(read_messages(source));
  if (msgs.empty()) throw std::runtime_error("stream: no messages after filtering");
  const auto [start_ms, end_ms] = bin_range(msgs);

  StreamingPipeline pipeline(templates, cfg, markers_from(ingest.markers_path), start_ms);
  pipeline.on_detection = [&](const Detection& d) {
    *out << to_ndjson_line(d);
    out->flush();  // live consumers want detections the moment they fire
  };
  replay(msgs, speed, [&](const Message& m) { pipeline.feed(m); });
  pipeline.flush(end_ms);
  std::cerr << pipeline.detections().size() << " detection(s)\n";
  return kExitOk;
}

int cmd_sweep(const std::string& corpus_dir, const std::string& rule_str,
              const std::string& windows_csv, const std::string& thresholds_csv,
              const std::string& groups_csv, int match_window, const std::string& markers_path,
              const std::string& out_path, const std::string& gnuplot_path) {
  nlohmann::ordered_json echo;
  echo["command"] = "sweep";
  echo["corpus"] = corpus_dir;
  echo["rule"] = rule_str;
  echo["windows"] = windows_csv;
  echo["thresholds"] = thresholds_csv;
  echo["match_window_s"] = match_window;
  echo["out"] = out_path;
  echo_config(echo);

  SweepGrid grid;
  {
    std::stringstream ss(windows_csv);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) grid.window_values.push_back(std::stoi(item));
  }
  if (thresholds_csv != "auto") {
    std::stringstream ss(thresholds_csv);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) grid.threshold_values.push_back(std::stod(item));
  }

  const Corpus corpus = Corpus::load(corpus_dir);
  const auto prepared = prepare_corpus(corpus, markers_from(markers_path));
  MatchPolicy policy;
  policy.match_window_s = match_window;
  const auto rows = sweep(prepared, grid, FusionRule::parse(rule_str), parse_groups(groups_csv),
                          policy);
  const std::string csv = sweep_to_csv(rows);
  if (out_path == "-") {
    std::cout << csv;
  } else {
    write_file(out_path, csv);
  }
  if (!gnuplot_path.empty()) {
    std::ostringstream plot;
    plot << "# window_s threshold tpr fpr mean_delay_s pareto\n";
    for (const auto& r : rows)
      if (!r.degenerate)
        plot << r.window_s << ' ' << r.threshold << ' ' << r.tpr << ' ' << r.fpr << ' '
             << r.mean_delay_s << ' ' << (r.pareto ? 1 : 0) << '\n';
    write_file(gnuplot_path, plot.str());
  }

  const SweepRow* best = nullptr;
  for (const auto& r : rows) {
    if (r.degenerate) continue;
    if (!best || r.tpr > best->tpr ||
        (r.tpr == best->tpr &&
         (r.fpr < best->fpr || (r.fpr == best->fpr && r.mean_delay_s < best->mean_delay_s))))
      best = &r;
  }
  if (best)
    std::cout << "best: window=" << best->window_s << " threshold=" << best->threshold
              << " tpr=" << best->tpr << " fpr=" << best->fpr
              << " mean_delay=" << best->mean_delay_s << " s\n";
  return kExitOk;
}

int cmd_roc(const std::string& corpus_dir, const std::string& rule_str, int window,
            const std::string& groups_csv, int match_window, int n_thresholds,
            const std::string& markers_path, const std::string& out_path,
            const std::string& gnuplot_path) {
  nlohmann::ordered_json echo;
  echo["command"] = "roc";
  echo["corpus"] = corpus_dir;
  echo["rule"] = rule_str;
  echo["window_s"] = window;
  echo["n_thresholds"] = n_thresholds;
  echo["out"] = out_path;
  echo_config(echo);

  const Corpus corpus = Corpus::load(corpus_dir);
  const auto prepared = prepare_corpus(corpus, markers_from(markers_path));
  MatchPolicy policy;
  policy.match_window_s = match_window;

  std::vector<RocPoint> points;
  if (rule_str == "temperature") {
    TemperatureConfig cfg;
    points = temperature_roc(prepared, cfg,
                             temperature_default_thresholds(prepared, cfg, n_thresholds), policy);
  } else {
    const FusionRule rule = FusionRule::parse(rule_str);
    const auto groups = parse_groups(groups_csv);
    const auto templates = corpus_templates(prepared, window, rule.required_groups(groups));
    const auto traces = score_corpus(prepared, templates, rule, groups);
    DetectorConfig base;
    base.rule = rule;
    base.window_s = window;
    points = roc_from_traces(traces, default_thresholds(traces, n_thresholds), policy, base);
  }

  const std::string csv = roc_to_csv(points);
  if (out_path == "-") {
    std::cout << csv;
  } else {
    write_file(out_path, csv);
  }
  if (!gnuplot_path.empty()) {
    std::ostringstream plot;
    plot << "# threshold tpr fpr\n";
    for (const auto& p : points)
      plot << p.threshold << ' ' << p.tpr << ' ' << p.fpr << '\n';
    write_file(gnuplot_path, plot.str());
  }
  std::cout << "auc=" << roc_auc(points) << " over " << points.size() << " thresholds\n";
  return kExitOk;
}

int cmd_loocv(const std::string& corpus_dir, const std::string& rule_str,
              const std::string& windows_csv, const std::string& groups_csv, int match_window,
              const std::string& markers_path, const std::string& out_path,
              const std::string& gnuplot_path) {
  nlohmann::ordered_json echo;
  echo["command"] = "loocv";
  echo["corpus"] = corpus_dir;
  echo["rule"] = rule_str;
  echo["windows"] = windows_csv;
  echo["match_window_s"] = match_window;
  echo["out"] = out_path;
  echo_config(echo);

  std::vector<int> windows;
  std::stringstream ss(windows_csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) windows.push_back(std::stoi(item));

  const Corpus corpus = Corpus::load(corpus_dir);
  const auto prepared = prepare_corpus(corpus, markers_from(markers_path));
  MatchPolicy policy;
  policy.match_window_s = match_window;
  const auto report = loocv(prepared, windows, FusionRule::parse(rule_str),
                            parse_groups(groups_csv), policy);
  if (out_path == "-") {
    std::cout << report.to_json_string();
  } else {
    write_file(out_path, report.to_json_string());
  }
  if (!gnuplot_path.empty()) {
    // sorted delays with cumulative share, ready for distribution plots
    std::vector<double> delays = report.aggregate.delays_s;
    std::sort(delays.begin(), delays.end());
    std::ostringstream plot;
    plot << "# delay_s cumulative_share\n";
    for (std::size_t i = 0; i < delays.size(); ++i)
      plot << delays[i] << ' ' << static_cast<double>(i + 1) / static_cast<double>(delays.size())
           << '\n';
    write_file(gnuplot_path, plot.str());
  }
  std::cout << "loocv " << rule_str << ": tpr=" << report.aggregate.tpr()
            << " fpr=" << report.aggregate.fpr()
            << " mean_delay=" << report.aggregate.mean_delay_s()
            << " s, within40s=" << report.aggregate.delay_share_within(40.0)
            << ", max=" << report.aggregate.max_delay_s() << " s\n";
  return kExitOk;
}

int cmd_calibrate(const std::string& corpus_dir, const std::string& out_path) {
  nlohmann::ordered_json echo;
  echo["command"] = "calibrate";
  echo["corpus"] = corpus_dir;
  echo["out"] = out_path;
  echo_config(echo);

  const auto report = validate_calibration(corpus_dir);
  if (out_path == "-") {
    std::cout << report.to_json_string();
  } else {
    write_file(out_path, report.to_json_string());
  }
  for (const auto& c : report.checks)
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " = " << c.measured << " (expected ["
              << c.lo << ", " << c.hi << "])\n";
  std::cout << (report.all_pass ? "calibration OK" : "calibration FAILED") << "\n";
  return report.all_pass ? kExitOk : kExitData;
}

std::atomic<bool> g_interrupted{false};

int cmd_serve(const std::string& corpus_dir, const std::string& templates_path,
              const std::string& rule_str, double threshold, int window, int refractory_s,
              const std::string& groups_csv, double speed, const std::string& host, int port,
              const std::string& markers_path, const std::string& log_path,
              bool exit_after_replay) {
  nlohmann::ordered_json echo;
  echo["command"] = "serve";
  echo["corpus"] = corpus_dir;
  echo["rule"] = rule_str;
  echo["threshold"] = threshold;
  echo["speed"] = std::isfinite(speed) ? nlohmann::ordered_json(speed)
                                       : nlohmann::ordered_json("inf");
  echo["host"] = host;

  const Corpus corpus = Corpus::load(corpus_dir);
  const MarkerConfig markers = markers_from(markers_path);

  TemplateSet templates;
  if (!templates_path.empty()) {
    templates = TemplateSet::load(templates_path);
  } else {
    const auto prepared = prepare_corpus(corpus, markers);
    const FusionRule rule = FusionRule::parse(rule_str);
    templates = corpus_templates(prepared, window, rule.required_groups(parse_groups(groups_csv)));
  }

  DetectorConfig cfg =
      detector_config_for(rule_str, threshold, refractory_s, groups_csv, "touchdown");
  cfg.window_s = templates.window_s;

  GameRegistry registry;
  for (const auto& g : corpus.games) registry.register_game(g.id, 0);

  // append-only NDJSON detection log, the durability story behind the
  // in-memory registry
  std::ofstream log_file;
  std::mutex log_mu;
  if (!log_path.empty()) {
    log_file.open(log_path, std::ios::binary | std::ios::app);
    if (!log_file) throw std::runtime_error("cannot open detection log " + log_path);
  }

  HttpService service(registry);
  const int bound = service.start(host, resolve_service_port(port));
  echo["port"] = bound;
  echo_config(echo);
  std::cout << "serving on http://" << host << ":" << bound << " (" << corpus.games.size()
            << " games, replay speed "
            << (std::isfinite(speed) ? std::to_string(speed) : std::string("inf")) << ")\n";

  std::vector<std::thread> writers;
  for (const auto& g : corpus.games) {
    writers.emplace_back([&, game = &g] {
      StreamingPipeline pipeline(templates, cfg, markers, 0);
      pipeline.on_bin = [&](std::int64_t, std::int64_t volume) {
        registry.append_bin(game->id, volume);
      };
      pipeline.on_detection = [&](const Detection& d) {
        registry.append_detection(game->id, d);
        if (log_file.is_open()) {
          nlohmann::ordered_json j;
          j["game_id"] = game->id;
          j["ts_ms"] = d.ts_ms;
          j["score"] = d.score;
          j["rule"] = std::string(to_string(d.rule));
          j["kind"] = d.kind;
          std::lock_guard lock(log_mu);
          log_file << j.dump() << "\n";
          log_file.flush();
        }
      };
      replay(game->messages, speed, [&](const Message& m) { pipeline.feed(m); });
      pipeline.flush(static_cast<std::int64_t>(game->duration_s) * 1000);
    });
  }
  for (auto& w : writers) w.join();
  std::cout << "replay complete\n";
  if (!exit_after_replay) {
    std::signal(SIGINT, [](int) { g_interrupted.store(true); });
    std::signal(SIGTERM, [](int) { g_interrupted.store(true); });
    while (!g_interrupted.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  service.stop();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pulsegate: real-time event detection from short-message streams"};
  app.require_subcommand(1);

  // generate
  auto* generate = app.add_subcommand("generate", "generate a labeled synthetic corpus");
  int gen_games = 18;
  std::uint64_t gen_seed = 42;
  std::string gen_out, gen_config;
  generate->add_option("--games", gen_games, "number of games");
  generate->add_option("--seed", gen_seed, "corpus seed");
  generate->add_option("--out", gen_out, "corpus output directory")->required();
  generate->add_option("--config", gen_config, "generator config JSON");

  // templates
  auto* templates_cmd = app.add_subcommand("templates", "build per-group event templates");
  std::string tpl_corpus, tpl_groups = "mobile,inactive,short", tpl_markers, tpl_out;
  int tpl_window = 30;
  bool tpl_subtract = false;
  templates_cmd->add_option("--corpus", tpl_corpus, "corpus directory")->required();
  templates_cmd->add_option("--window", tpl_window, "template window, seconds");
  templates_cmd->add_option("--groups", tpl_groups, "comma-separated group list");
  templates_cmd->add_option("--markers", tpl_markers, "markers.json path");
  templates_cmd->add_option("--out", tpl_out, "output template JSON")->required();
  templates_cmd->add_flag("--subtract-baseline", tpl_subtract,
                          "subtract each event's pre-event mean rate");

  // detect
  auto* detect_cmd = app.add_subcommand("detect", "batch detection over a message stream");
  std::string det_stream = "-", det_templates, det_rule = "mean",
              det_groups = "mobile,inactive,short", det_out = "-";
  double det_threshold = 8.0;
  int det_window = 30, det_refractory = 300;
  IngestOptions det_ingest;
  detect_cmd->add_option("--stream", det_stream, "NDJSON message file, or - for stdin");
  detect_cmd->add_option("--templates", det_templates, "template set JSON");
  detect_cmd->add_option("--rule", det_rule,
                         "single:<group>|max|mean|product|delay|temperature");
  detect_cmd->add_option("--threshold", det_threshold, "detection threshold");
  detect_cmd->add_option("--window", det_window, "window size, seconds");
  detect_cmd->add_option("--refractory", det_refractory, "refractory period, seconds");
  detect_cmd->add_option("--groups", det_groups, "group set for fusion rules");
  detect_cmd->add_option("--out", det_out, "detections NDJSON output, - for stdout");
  det_ingest.attach(detect_cmd);

  // stream
  auto* stream_cmd = app.add_subcommand("stream", "streaming detection with replay pacing");
  std::string str_stream = "-", str_templates, str_rule = "mean",
              str_groups = "mobile,inactive,short", str_out = "-", str_speed = "inf";
  double str_threshold = 8.0;
  int str_refractory = 300;
  IngestOptions str_ingest;
  int str_listen = -1;
  stream_cmd->add_option("--stream", str_stream, "NDJSON message file, or - for stdin");
  stream_cmd->add_option("--listen", str_listen,
                         "listen for NDJSON lines on this TCP port (0 = ephemeral)");
  stream_cmd->add_option("--templates", str_templates, "template set JSON")->required();
  stream_cmd->add_option("--rule", str_rule, "fusion rule");
  stream_cmd->add_option("--threshold", str_threshold, "detection threshold");
  stream_cmd->add_option("--refractory", str_refractory, "refractory period, seconds");
  stream_cmd->add_option("--groups", str_groups, "group set for fusion rules");
  stream_cmd->add_option("--speed", str_speed, "replay speed multiplier, or inf");
  stream_cmd->add_option("--out", str_out, "detections NDJSON output, - for stdout");
  str_ingest.attach(stream_cmd);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "window x threshold grid evaluation");
  std::string sw_corpus, sw_rule = "single:all", sw_windows = "15,30,45,60",
              sw_thresholds = "auto", sw_groups = "mobile,inactive,short", sw_markers,
              sw_out = "-", sw_gnuplot;
  int sw_match_window = 180;
  sweep_cmd->add_option("--corpus", sw_corpus, "corpus directory")->required();
  sweep_cmd->add_option("--rule", sw_rule, "fusion rule");
  sweep_cmd->add_option("--windows", sw_windows, "comma-separated window sizes");
  sweep_cmd->add_option("--thresholds", sw_thresholds, "auto or comma-separated list");
  sweep_cmd->add_option("--groups", sw_groups, "group set for fusion rules");
  sweep_cmd->add_option("--match-window", sw_match_window, "matching window, seconds");
  sweep_cmd->add_option("--markers", sw_markers, "markers.json path");
  sweep_cmd->add_option("--out", sw_out, "CSV output path, - for stdout");
  sweep_cmd->add_option("--gnuplot", sw_gnuplot, "gnuplot-friendly data file");

  // roc
  auto* roc_cmd = app.add_subcommand("roc", "ROC curve for one rule");
  std::string roc_corpus, roc_rule = "mean", roc_groups = "mobile,inactive,short", roc_markers,
              roc_out = "-", roc_gnuplot;
  int roc_window = 30, roc_match_window = 180, roc_n = 64;
  roc_cmd->add_option("--corpus", roc_corpus, "corpus directory")->required();
  roc_cmd->add_option("--rule", roc_rule, "fusion rule or temperature");
  roc_cmd->add_option("--window", roc_window, "window size, seconds");
  roc_cmd->add_option("--groups", roc_groups, "group set for fusion rules");
  roc_cmd->add_option("--match-window", roc_match_window, "matching window, seconds");
  roc_cmd->add_option("--n-thresholds", roc_n, "threshold ladder size");
  roc_cmd->add_option("--markers", roc_markers, "markers.json path");
  roc_cmd->add_option("--out", roc_out, "CSV output path, - for stdout");
  roc_cmd->add_option("--gnuplot", roc_gnuplot, "gnuplot-friendly data file");

  // loocv
  auto* loocv_cmd = app.add_subcommand("loocv", "leave-one-out cross-validation");
  std::string lo_corpus, lo_rule = "mean", lo_windows = "15,30,45,60",
              lo_groups = "mobile,inactive,short", lo_markers, lo_out = "-", lo_gnuplot;
  int lo_match_window = 180;
  loocv_cmd->add_option("--corpus", lo_corpus, "corpus directory")->required();
  loocv_cmd->add_option("--rule", lo_rule, "fusion rule");
  loocv_cmd->add_option("--windows", lo_windows, "window grid");
  loocv_cmd->add_option("--groups", lo_groups, "group set for fusion rules");
  loocv_cmd->add_option("--match-window", lo_match_window, "matching window, seconds");
  loocv_cmd->add_option("--markers", lo_markers, "markers.json path");
  loocv_cmd->add_option("--out", lo_out, "report JSON path, - for stdout");
  loocv_cmd->add_option("--gnuplot", lo_gnuplot, "gnuplot-friendly delay distribution file");

  // calibrate
  auto* calibrate_cmd = app.add_subcommand("calibrate", "validate generator calibration");
  std::string cal_corpus, cal_out = "-";
  calibrate_cmd->add_option("--corpus", cal_corpus, "corpus directory")->required();
  calibrate_cmd->add_option("--out", cal_out, "report JSON path, - for stdout");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "replay a corpus behind the HTTP API");
  std::string srv_corpus, srv_templates, srv_rule = "mean",
              srv_groups = "mobile,inactive,short", srv_markers, srv_host = "127.0.0.1",
              srv_speed = "600", srv_log;
  double srv_threshold = 8.0;
  int srv_window = 30, srv_refractory = 300, srv_port = 0;
  bool srv_exit_after = false;
  serve_cmd->add_option("--corpus", srv_corpus, "corpus directory")->required();
  serve_cmd->add_option("--templates", srv_templates, "template set JSON (default: self-train)");
  serve_cmd->add_option("--rule", srv_rule, "fusion rule");
  serve_cmd->add_option("--threshold", srv_threshold, "detection threshold");
  serve_cmd->add_option("--window", srv_window, "window for self-trained templates");
  serve_cmd->add_option("--refractory", srv_refractory, "refractory period, seconds");
  serve_cmd->add_option("--groups", srv_groups, "group set for fusion rules");
  serve_cmd->add_option("--speed", srv_speed, "replay speed multiplier, or inf");
  serve_cmd->add_option("--host", srv_host, "bind address");
  serve_cmd->add_option("--port", srv_port, "port (0: PULSEGATE_PORT env or 8787)");
  serve_cmd->add_option("--markers", srv_markers, "markers.json path");
  serve_cmd->add_option("--log", srv_log, "append detections to this NDJSON file");
  serve_cmd->add_flag("--exit-after-replay", srv_exit_after, "stop once replay finishes");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints usage or help text
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (generate->parsed())
      return cmd_generate(gen_games, gen_seed, gen_out, gen_config);
    if (templates_cmd->parsed())
      return cmd_templates(tpl_corpus, tpl_window, tpl_groups, tpl_markers, tpl_out,
                           tpl_subtract);
    if (detect_cmd->parsed())
      return cmd_detect(det_stream, det_templates, det_rule, det_threshold, det_window,
                        det_refractory, det_groups, det_ingest, det_out);
    if (stream_cmd->parsed())
      return cmd_stream(str_stream, str_listen, str_templates, str_rule, str_threshold,
                        str_refractory, str_groups, parse_speed(str_speed), str_ingest, str_out);
    if (sweep_cmd->parsed())
      return cmd_sweep(sw_corpus, sw_rule, sw_windows, sw_thresholds, sw_groups, sw_match_window,
                       sw_markers, sw_out, sw_gnuplot);
    if (roc_cmd->parsed())
      return cmd_roc(roc_corpus, roc_rule, roc_window, roc_groups, roc_match_window, roc_n,
                     roc_markers, roc_out, roc_gnuplot);
    if (loocv_cmd->parsed())
      return cmd_loocv(lo_corpus, lo_rule, lo_windows, lo_groups, lo_match_window, lo_markers,
                       lo_out, lo_gnuplot);
    if (calibrate_cmd->parsed()) return cmd_calibrate(cal_corpus, cal_out);
    if (serve_cmd->parsed())
      return cmd_serve(srv_corpus, srv_templates, srv_rule, srv_threshold, srv_window,
                       srv_refractory, srv_groups, parse_speed(srv_speed), srv_host, srv_port,
                       srv_markers, srv_log, srv_exit_after);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
