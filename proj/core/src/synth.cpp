#include "pulsegate/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#include "pulsegate/grouping.hpp"
#include "pulsegate/ingest.hpp"
#include "pulsegate/templates.hpp"

namespace pulsegate {

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::exponential(double rate) { return -std::log(1.0 - uniform()) / rate; }

int Rng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  // count unit-rate exponential arrivals before `mean`
  int k = 0;
  double acc = exponential(1.0);
  while (acc < mean) {
    ++k;
    acc += exponential(1.0);
  }
  return k;
}

double Rng::gamma_int_shape(int shape) {
  double s = 0.0;
  for (int i = 0; i < shape; ++i) s += exponential(1.0);
  return s;
}

std::uint64_t Rng::mix(std::uint64_t a, std::uint64_t b) {
  Rng r(a ^ ((b + 0x9E3779B97F4A7C15ULL) * 0x2545F4914F6CDD1DULL));
  return r.next_u64();
}

double ResponseKernel::bump_peak_density() const {
  // normalized bump is Gamma(a+1, a) in u = (t - onset) / (peak - onset);
  // its mode sits at u = 1, i.e. every event peaks at peak_s
  const int a = rise_sharpness;
  double factorial = 1.0;
  for (int i = 2; i <= a; ++i) factorial *= i;
  return std::pow(static_cast<double>(a), a + 1) * std::exp(-static_cast<double>(a)) / factorial;
}

double ResponseKernel::expected_messages_per_event() const {
  const double rise_span = peak_s - mean_onset_s();
  return amplitude * rise_span / bump_peak_density();
}

namespace {

const std::vector<std::string>& mobile_clients() {
  static const std::vector<std::string> v = {"Twitter for iPhone",     "Twitter for Android",
                                             "Twitter for BlackBerry", "txt",
                                             "HTC Peep",               "MOTOBLUR"};
  return v;
}
const std::vector<std::string>& non_mobile_clients() {
  static const std::vector<std::string> v = {"Twitter Web Client", "Seesmic Desktop",
                                             "Twitter for Mac"};
  return v;
}
const std::vector<std::string>& ambiguous_clients() {
  static const std::vector<std::string> v = {"TweetDeck", "HootSuite", "Echofon"};
  return v;
}
const std::vector<std::string>& keyword_variants() {
  static const std::vector<std::string> v = {"Touchdown!", "TOUCHDOWN!!", "Touchdownnnnn!!!",
                                             "TD!",        "TD!!!",       "touchdown"};
  return v;
}
const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> v = {
      "go",    "team",   "what", "a",      "play",  "did",   "you",  "see",  "that",
      "huge",  "drive",  "yes",  "wow",    "unreal", "great", "catch", "run",  "ball",
      "game",  "now",    "just", "insane", "crazy", "again", "still", "clutch"};
  return v;
}

struct ZipfTable {
  std::vector<double> cum;
  std::size_t head_cut = 0;

  ZipfTable(int n_users, double skew, double head_fraction) {
    cum.resize(static_cast<std::size_t>(n_users));
    double acc = 0.0;
    for (int r = 0; r < n_users; ++r) {
      acc += std::pow(static_cast<double>(r + 1), -skew);
      cum[static_cast<std::size_t>(r)] = acc;
    }
    head_cut = static_cast<std::size_t>(
        std::max(1.0, std::ceil(head_fraction * static_cast<double>(n_users))));
  }

  std::size_t sample(Rng& rng) const {
    const double u = rng.uniform() * cum.back();
    return static_cast<std::size_t>(
        std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
  }

  std::size_t sample_head(Rng& rng) const {
    const double u = rng.uniform() * cum[head_cut - 1];
    return static_cast<std::size_t>(
        std::lower_bound(cum.begin(), cum.begin() + static_cast<std::ptrdiff_t>(head_cut), u) -
        cum.begin());
  }
};

std::string user_id_for(std::size_t rank) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "u%05zu", rank + 1);
  return buf;
}

enum class Device { mobile, non_mobile, ambiguous };

Device draw_device(Rng& rng, double p_mobile, double p_non_mobile) {
  const double u = rng.uniform();
  if (u < p_mobile) return Device::mobile;
  if (u < p_mobile + p_non_mobile) return Device::non_mobile;
  return Device::ambiguous;
}

std::string draw_client(Rng& rng, Device d) {
  const auto& pool = d == Device::mobile      ? mobile_clients()
                     : d == Device::non_mobile ? non_mobile_clients()
                                               : ambiguous_clients();
  return pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pool.size()) - 1))];
}

/// 1 inside the depressed window, linearly back to 0 across the recovery span.
double regime_weight(double dt_s, const PopulationConfig& pop) {
  if (dt_s < 0.0) return 0.0;
  if (dt_s <= pop.depressed_window_s) return 1.0;
  const double over = dt_s - pop.depressed_window_s;
  if (over >= pop.recovery_window_s) return 0.0;
  return 1.0 - over / pop.recovery_window_s;
}

double seconds_since_prior_event(std::int64_t ts_ms, const std::vector<std::int64_t>& events_ms) {
  auto it = std::upper_bound(events_ms.begin(), events_ms.end(), ts_ms);
  if (it == events_ms.begin()) return -1.0;
  return static_cast<double>(ts_ms - *(it - 1)) / 1000.0;
}

struct WordDraw {
  int words = 1;
  bool excited = false;  // the terse fast-reaction mode
};

WordDraw draw_words(Rng& rng, double dt_s, const PopulationConfig& pop) {
  const double f = regime_weight(dt_s, pop);
  const double p_excited =
      pop.excited_share_base + (pop.excited_share_event - pop.excited_share_base) * f;
  WordDraw out;
  out.excited = rng.uniform() < p_excited;
  if (out.excited) {
    out.words = 1 + rng.poisson(pop.short_words_rate);
  } else {
    const double rate =
        pop.long_words_rate_base + (pop.long_words_rate_event - pop.long_words_rate_base) * f;
    out.words = 3 + rng.poisson(rate);
  }
  return out;
}

std::string build_text(Rng& rng, int words) {
  const auto& variants = keyword_variants();
  const auto& fillers = filler_words();
  std::string text =
      variants[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(variants.size()) - 1))];
  for (int i = 1; i < words; ++i) {
    text += ' ';
    text += fillers[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(fillers.size()) - 1))];
  }
  return text;
}

struct PendingMessage {
  std::int64_t ts_ms = 0;
  std::size_t seq = 0;
  Message msg;
  MessageOrigin origin;
};

}  // namespace

GeneratedGame generate_game(const GameScript& script, const PopulationConfig& pop,
                            const ResponseKernel& kernel) {
  if (script.duration_s <= 0) throw std::invalid_argument("generate_game: duration must be > 0");
  if (kernel.peak_s <= kernel.onset_max_s)
    throw std::invalid_argument("generate_game: peak must exceed the onset range");
  if (script.events_min < 0 || script.events_min > script.events_max)
    throw std::invalid_argument("generate_game: bad events range");
  if (script.noise_rate < 0.0) throw std::invalid_argument("generate_game: bad noise rate");
  if (pop.device_mobile < 0 || pop.device_non_mobile < 0 ||
      pop.device_mobile + pop.device_non_mobile > 1.0)
    throw std::invalid_argument("generate_game: device mix must sum to <= 1");

  Rng rng(script.seed);
  const std::int64_t duration_ms = static_cast<std::int64_t>(script.duration_s) * 1000;

  // --- event schedule ---
  std::vector<std::int64_t> event_times = script.event_times_ms;
  if (event_times.empty()) {
    const int n_events = script.n_events_override > 0
                             ? script.n_events_override
                             : rng.uniform_int(script.events_min, script.events_max);
    const std::int64_t lead = 400'000, tail = 400'000;
    const std::int64_t min_gap = 480'000;  // comfortably over the 5-minute invariant
    if (n_events > 0) {
      // gap construction: uniform over placements with the minimum separation
      const std::int64_t span = duration_ms - lead - tail;
      const std::int64_t slack = span - static_cast<std::int64_t>(n_events - 1) * min_gap;
      if (slack < 0)
        throw std::invalid_argument("generate_game: game too short for the event count");
      std::vector<double> offsets;
      for (int i = 0; i < n_events; ++i)
        offsets.push_back(rng.uniform() * static_cast<double>(slack));
      std::sort(offsets.begin(), offsets.end());
      for (int i = 0; i < n_events; ++i)
        event_times.push_back(lead + static_cast<std::int64_t>(offsets[static_cast<std::size_t>(i)]) +
                              static_cast<std::int64_t>(i) * min_gap);
    }
  } else {
    std::sort(event_times.begin(), event_times.end());
    for (std::size_t i = 1; i < event_times.size(); ++i)
      if (event_times[i] - event_times[i - 1] < kMinEventSeparationMs)
        throw std::invalid_argument("generate_game: events closer than 5 minutes");
  }

  GeneratedGame out;
  for (std::int64_t t : event_times) out.truth.push_back({t, EventKind::touchdown, {}});

  const ZipfTable users(pop.n_users, pop.activity_skew, pop.head_user_fraction);

  // Device mix for background chatter, derived so the corpus-wide shares land
  // on the configured 40/30/30 even though event responders skew mobile.
  const double expected_events =
      script.n_events_override > 0
          ? static_cast<double>(script.n_events_override)
          : 0.5 * static_cast<double>(script.events_min + script.events_max);
  const double msgs_per_event = kernel.expected_messages_per_event();
  const double event_mass = expected_events * msgs_per_event;
  const double noise_mass = script.noise_rate * static_cast<double>(script.duration_s) +
                            script.distractor_rate *
                                (script.distractor_mass_max - script.distractor_mass_min) /
                                std::log(script.distractor_mass_max / script.distractor_mass_min) +
                            script.slow_distractor_rate * 0.5 *
                                (script.slow_distractor_mass_min + script.slow_distractor_mass_max);
  const double total_mass = event_mass + noise_mass;
  auto derive_share = [&](double target, double event_share) {
    const double s = (target * total_mass - event_share * event_mass) / noise_mass;
    return std::clamp(s, 0.02, 0.9);
  };
  const double noise_mobile = derive_share(pop.device_mobile, pop.event_device_mobile);
  const double noise_non_mobile = derive_share(pop.device_non_mobile, pop.event_device_non_mobile);

  std::vector<PendingMessage> pending;
  pending.reserve(static_cast<std::size_t>(total_mass * 1.2) + 64);
  std::size_t seq = 0;

  auto add_message = [&](double t_s, std::size_t user_rank, Device device,
                         MessageOrigin origin) {
    const std::int64_t ts = static_cast<std::int64_t>(t_s * 1000.0);
    if (ts < 0 || ts >= duration_ms) return;  // tails past the end of the game are dropped
    const double dt = seconds_since_prior_event(ts, event_times);
    const WordDraw wd = draw_words(rng, dt, pop);
    PendingMessage p;
    p.ts_ms = ts;
    p.seq = seq++;
    p.msg.ts_ms = ts;
    p.msg.user_id = user_id_for(user_rank);
    p.msg.client = draw_client(rng, device);
    p.msg.text = build_text(rng, wd.words);
    p.origin = origin;
    if (origin.source == MessageOrigin::Source::event && !wd.excited) {
      // wordier reactions arrive a little later
      const double delayed = t_s + pop.long_delay_offset_s;
      const std::int64_t ts2 = static_cast<std::int64_t>(delayed * 1000.0);
      if (ts2 >= duration_ms) return;
      p.ts_ms = p.msg.ts_ms = ts2;
      p.origin.delay_s += pop.long_delay_offset_s;
    }
    pending.push_back(std::move(p));
  };

  // --- background chatter (keyword false positives and idle game talk) ---
  if (script.noise_rate > 0.0) {
    double t = rng.exponential(script.noise_rate);
    while (t < static_cast<double>(script.duration_s)) {
      const std::size_t user = users.sample(rng);
      const Device device = draw_device(rng, noise_mobile, noise_non_mobile);
      add_message(t, user, device, {MessageOrigin::Source::noise, -1, 0.0});
      t += rng.exponential(script.noise_rate);
    }
  }

  // --- event responses ---
  // The per-group delay offsets shift the aggregate curve right; anchor the
  // bump earlier by their population mean so the blend still peaks at peak_s.
  const double head_share = users.cum[users.head_cut - 1] / users.cum.back();
  const double offset_anchor = pop.event_device_mobile * pop.mobile_delay_offset_s +
                               head_share * pop.active_delay_offset_s +
                               (1.0 - pop.excited_share_event) * pop.long_delay_offset_s;
  if (kernel.peak_s <= kernel.onset_max_s + offset_anchor)
    throw std::invalid_argument("generate_game: peak too close to the onset range");
  const int shape = kernel.rise_sharpness;
  for (std::size_t e = 0; e < event_times.size(); ++e) {
    const double onset = rng.uniform(kernel.onset_min_s, kernel.onset_max_s);
    const double rise_span = kernel.peak_s - onset - offset_anchor;
    const double strength = std::exp(rng.normal() * kernel.strength_jitter);
    const int n = rng.poisson(msgs_per_event * strength);
    for (int i = 0; i < n; ++i) {
      const double bump = rng.gamma_int_shape(shape + 1) / static_cast<double>(shape);
      double delay = onset + rise_span * bump;
      const Device device = draw_device(rng, pop.event_device_mobile, pop.event_device_non_mobile);
      const std::size_t user = users.sample(rng);
      if (device == Device::mobile) delay += pop.mobile_delay_offset_s;
      if (user < users.head_cut) delay += pop.active_delay_offset_s;
      add_message(static_cast<double>(event_times[e]) / 1000.0 + delay, user, device,
                  {MessageOrigin::Source::event, static_cast<int>(e), delay});
    }
  }

  // --- distractor flurries: keyword bursts unrelated to any scored event ---
  {
    const int n_fast = rng.poisson(script.distractor_rate);
    for (int d = 0; d < n_fast; ++d) {
      const double center_s = rng.uniform(300.0, static_cast<double>(script.duration_s) - 300.0);
      const double mass = std::exp(
          rng.uniform(std::log(script.distractor_mass_min), std::log(script.distractor_mass_max)));
      const double onset = rng.uniform(2.0, 8.0);
      const double width = rng.uniform(15.0, 35.0);
      const int n = rng.poisson(mass);
      for (int i = 0; i < n; ++i) {
        const double bump = rng.gamma_int_shape(shape + 1) / static_cast<double>(shape);
        const std::size_t user = users.sample_head(rng);  // the usual suspects pile on
        const Device device = draw_device(rng, noise_mobile, noise_non_mobile);
        add_message(center_s + onset + width * bump, user, device,
                    {MessageOrigin::Source::distractor, -1, 0.0});
      }
    }
    // slow ramps: diffuse chatter swells that never form an event-shaped burst
    const int n_slow = rng.poisson(script.slow_distractor_rate);
    for (int d = 0; d < n_slow; ++d) {
      const double center_s = rng.uniform(400.0, static_cast<double>(script.duration_s) - 400.0);
      const double mass =
          rng.uniform(script.slow_distractor_mass_min, script.slow_distractor_mass_max);
      const double width = rng.uniform(120.0, 240.0);
      const int n = rng.poisson(mass);
      for (int i = 0; i < n; ++i) {
        const double bump = rng.gamma_int_shape(shape + 1) / static_cast<double>(shape);
        const std::size_t user = users.sample_head(rng);
        const Device device = draw_device(rng, noise_mobile, noise_non_mobile);
        add_message(center_s + width * bump, user, device,
                    {MessageOrigin::Source::distractor, -1, 0.0});
      }
    }
  }

  // deterministic merge: timestamp order, generation order breaking ties
  std::sort(pending.begin(), pending.end(), [](const PendingMessage& a, const PendingMessage& b) {
    return a.ts_ms != b.ts_ms ? a.ts_ms < b.ts_ms : a.seq < b.seq;
  });
  out.messages.reserve(pending.size());
  out.origins.reserve(pending.size());
  for (PendingMessage& p : pending) {
    out.messages.push_back(std::move(p.msg));
    out.origins.push_back(p.origin);
  }
  return out;
}

namespace {

nlohmann::ordered_json kernel_to_json(const ResponseKernel& k) {
  nlohmann::ordered_json j;
  j["onset_min_s"] = k.onset_min_s;
  j["onset_max_s"] = k.onset_max_s;
  j["peak_s"] = k.peak_s;
  j["rise_sharpness"] = k.rise_sharpness;
  j["amplitude"] = k.amplitude;
  j["strength_jitter"] = k.strength_jitter;
  return j;
}

ResponseKernel kernel_from_json(const nlohmann::json& j) {
  ResponseKernel k;
  k.onset_min_s = j.value("onset_min_s", k.onset_min_s);
  k.onset_max_s = j.value("onset_max_s", k.onset_max_s);
  k.peak_s = j.value("peak_s", k.peak_s);
  k.rise_sharpness = j.value("rise_sharpness", k.rise_sharpness);
  k.amplitude = j.value("amplitude", k.amplitude);
  k.strength_jitter = j.value("strength_jitter", k.strength_jitter);
  return k;
}

nlohmann::ordered_json population_to_json(const PopulationConfig& p) {
  nlohmann::ordered_json j;
  j["n_users"] = p.n_users;
  j["activity_skew"] = p.activity_skew;
  j["head_user_fraction"] = p.head_user_fraction;
  j["device_mobile"] = p.device_mobile;
  j["device_non_mobile"] = p.device_non_mobile;
  j["event_device_mobile"] = p.event_device_mobile;
  j["event_device_non_mobile"] = p.event_device_non_mobile;
  j["mobile_delay_offset_s"] = p.mobile_delay_offset_s;
  j["active_delay_offset_s"] = p.active_delay_offset_s;
  j["long_delay_offset_s"] = p.long_delay_offset_s;
  j["excited_share_event"] = p.excited_share_event;
  j["excited_share_base"] = p.excited_share_base;
  j["short_words_rate"] = p.short_words_rate;
  j["long_words_rate_base"] = p.long_words_rate_base;
  j["long_words_rate_event"] = p.long_words_rate_event;
  j["depressed_window_s"] = p.depressed_window_s;
  j["recovery_window_s"] = p.recovery_window_s;
  return j;
}

PopulationConfig population_from_json(const nlohmann::json& j) {
  PopulationConfig p;
  p.n_users = j.value("n_users", p.n_users);
  p.activity_skew = j.value("activity_skew", p.activity_skew);
  p.head_user_fraction = j.value("head_user_fraction", p.head_user_fraction);
  p.device_mobile = j.value("device_mobile", p.device_mobile);
  p.device_non_mobile = j.value("device_non_mobile", p.device_non_mobile);
  p.event_device_mobile = j.value("event_device_mobile", p.event_device_mobile);
  p.event_device_non_mobile = j.value("event_device_non_mobile", p.event_device_non_mobile);
  p.mobile_delay_offset_s = j.value("mobile_delay_offset_s", p.mobile_delay_offset_s);
  p.active_delay_offset_s = j.value("active_delay_offset_s", p.active_delay_offset_s);
  p.long_delay_offset_s = j.value("long_delay_offset_s", p.long_delay_offset_s);
  p.excited_share_event = j.value("excited_share_event", p.excited_share_event);
  p.excited_share_base = j.value("excited_share_base", p.excited_share_base);
  p.short_words_rate = j.value("short_words_rate", p.short_words_rate);
  p.long_words_rate_base = j.value("long_words_rate_base", p.long_words_rate_base);
  p.long_words_rate_event = j.value("long_words_rate_event", p.long_words_rate_event);
  p.depressed_window_s = j.value("depressed_window_s", p.depressed_window_s);
  p.recovery_window_s = j.value("recovery_window_s", p.recovery_window_s);
  return p;
}

nlohmann::ordered_json script_to_json(const GameScript& s) {
  nlohmann::ordered_json j;
  j["duration_s"] = s.duration_s;
  j["events_min"] = s.events_min;
  j["events_max"] = s.events_max;
  j["noise_rate"] = s.noise_rate;
  j["distractor_rate"] = s.distractor_rate;
  j["distractor_mass_min"] = s.distractor_mass_min;
  j["distractor_mass_max"] = s.distractor_mass_max;
  j["slow_distractor_rate"] = s.slow_distractor_rate;
  j["slow_distractor_mass_min"] = s.slow_distractor_mass_min;
  j["slow_distractor_mass_max"] = s.slow_distractor_mass_max;
  return j;
}

GameScript script_from_json(const nlohmann::json& j) {
  GameScript s;
  s.duration_s = j.value("duration_s", s.duration_s);
  s.events_min = j.value("events_min", s.events_min);
  s.events_max = j.value("events_max", s.events_max);
  s.noise_rate = j.value("noise_rate", s.noise_rate);
  s.distractor_rate = j.value("distractor_rate", s.distractor_rate);
  s.distractor_mass_min = j.value("distractor_mass_min", s.distractor_mass_min);
  s.distractor_mass_max = j.value("distractor_mass_max", s.distractor_mass_max);
  s.slow_distractor_rate = j.value("slow_distractor_rate", s.slow_distractor_rate);
  s.slow_distractor_mass_min = j.value("slow_distractor_mass_min", s.slow_distractor_mass_min);
  s.slow_distractor_mass_max = j.value("slow_distractor_mass_max", s.slow_distractor_mass_max);
  return s;
}

}  // namespace

std::string corpus_config_to_json(const CorpusConfig& cfg) {
  nlohmann::ordered_json j;
  j["format"] = "pulsegate-corpus/1";
  j["n_games"] = cfg.n_games;
  j["seed"] = cfg.seed;
  j["script"] = script_to_json(cfg.script);
  j["population"] = population_to_json(cfg.population);
  j["kernel"] = kernel_to_json(cfg.kernel);
  return j.dump(2) + "\n";
}

CorpusConfig corpus_config_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  CorpusConfig cfg;
  cfg.n_games = j.value("n_games", cfg.n_games);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("script")) cfg.script = script_from_json(j["script"]);
  if (j.contains("population")) cfg.population = population_from_json(j["population"]);
  if (j.contains("kernel")) cfg.kernel = kernel_from_json(j["kernel"]);
  return cfg;
}

namespace {

std::string game_id_for(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "game_%02d", index + 1);
  return buf;
}

struct GamePlan {
  std::string id;
  std::uint64_t seed = 0;
  int n_events = 0;
};

std::vector<GamePlan> plan_games(const CorpusConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<int> counts(static_cast<std::size_t>(cfg.n_games));
  auto draw_counts = [&] {
    int total = 0;
    for (int& c : counts) {
      c = rng.uniform_int(cfg.script.events_min, cfg.script.events_max);
      total += c;
    }
    return total;
  };
  int total = draw_counts();
  if (cfg.n_games == 18 && cfg.script.events_min == 5 && cfg.script.events_max == 6) {
    // the reference corpus shape: 18 games, ~100 events in total
    for (int attempt = 0; (total < 95 || total > 105) && attempt < 1000; ++attempt)
      total = draw_counts();
  }
  std::vector<GamePlan> plans;
  for (int i = 0; i < cfg.n_games; ++i)
    plans.push_back({game_id_for(i), Rng::mix(cfg.seed, static_cast<std::uint64_t>(i) + 1),
                     counts[static_cast<std::size_t>(i)]});
  return plans;
}

GameScript script_for(const CorpusConfig& cfg, const GamePlan& plan) {
  GameScript s = cfg.script;
  s.seed = plan.seed;
  s.n_events_override = plan.n_events;
  return s;
}

}  // namespace

void generate_corpus(const std::filesystem::path& out_dir, const CorpusConfig& cfg) {
  if (cfg.n_games < 1) throw std::invalid_argument("generate_corpus: n_games must be >= 1");
  std::filesystem::create_directories(out_dir);

  const std::vector<GamePlan> plans = plan_games(cfg);
  nlohmann::ordered_json games = nlohmann::ordered_json::array();
  for (const GamePlan& plan : plans) {
    const GeneratedGame game = generate_game(script_for(cfg, plan), cfg.population, cfg.kernel);
    const auto game_dir = out_dir / plan.id;
    std::filesystem::create_directories(game_dir);
    {
      std::ofstream stream(game_dir / "stream.ndjson", std::ios::binary);
      if (!stream) throw std::runtime_error("generate_corpus: cannot write stream for " + plan.id);
      for (const Message& m : game.messages) stream << to_ndjson_line(m);
    }
    {
      std::ofstream truth(game_dir / "truth.ndjson", std::ios::binary);
      if (!truth) throw std::runtime_error("generate_corpus: cannot write truth for " + plan.id);
      for (const GroundTruthEvent& e : game.truth) truth << to_ndjson_line(e);
    }
    nlohmann::ordered_json gj;
    gj["id"] = plan.id;
    gj["seed"] = plan.seed;
    gj["n_events"] = static_cast<int>(game.truth.size());
    gj["duration_s"] = cfg.script.duration_s;
    games.push_back(std::move(gj));
  }

  nlohmann::ordered_json manifest =
      nlohmann::ordered_json::parse(corpus_config_to_json(cfg));
  manifest["games"] = std::move(games);
  std::ofstream mf(out_dir / "manifest.json", std::ios::binary);
  if (!mf) throw std::runtime_error("generate_corpus: cannot write manifest");
  mf << manifest.dump(2) << "\n";
}

namespace {

std::vector<double> moving_average(const std::vector<double>& v, int half_width) {
  std::vector<double> out(v.size(), 0.0);
  const int n = static_cast<int>(v.size());
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half_width);
    const int hi = std::min(n - 1, i + half_width);
    double s = 0.0;
    for (int k = lo; k <= hi; ++k) s += v[static_cast<std::size_t>(k)];
    out[static_cast<std::size_t>(i)] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

double smoothed_peak_time(const EventTemplate& t, int half_width = 5) {
  const std::vector<double> sm = moving_average(t.values, half_width);
  std::size_t best = 0;
  for (std::size_t i = 1; i < sm.size(); ++i)
    if (sm[i] > sm[best]) best = i;
  return static_cast<double>(best);
}

double smoothed_peak_value(const EventTemplate& t, int half_width = 5) {
  const std::vector<double> sm = moving_average(t.values, half_width);
  double best = 0.0;
  for (double v : sm) best = std::max(best, v);
  return best;
}

CalibrationCheck make_check(std::string name, double measured, double lo, double hi) {
  CalibrationCheck c;
  c.name = std::move(name);
  c.measured = measured;
  c.lo = lo;
  c.hi = hi;
  c.pass = measured >= lo && measured <= hi;
  return c;
}

double mean_or_zero(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::string CalibrationReport::to_json_string() const {
  nlohmann::ordered_json j;
  j["all_pass"] = all_pass;
  nlohmann::ordered_json cs = nlohmann::ordered_json::array();
  for (const CalibrationCheck& c : checks) {
    nlohmann::ordered_json cj;
    cj["name"] = c.name;
    cj["measured"] = c.measured;
    cj["lo"] = c.lo;
    cj["hi"] = c.hi;
    cj["pass"] = c.pass;
    cs.push_back(std::move(cj));
  }
  j["checks"] = std::move(cs);
  nlohmann::ordered_json info_j = nlohmann::ordered_json::object();
  for (const auto& [k, v] : info) info_j[k] = v;
  j["info"] = std::move(info_j);
  return j.dump(2) + "\n";
}

CalibrationReport validate_calibration(const std::filesystem::path& corpus_dir) {
  const Corpus corpus = Corpus::load(corpus_dir);
  const CorpusConfig cfg = corpus_config_from_json(corpus.manifest_json);
  const nlohmann::json manifest = nlohmann::json::parse(corpus.manifest_json);

  std::size_t total_events = corpus.total_events();
  if (total_events < 20)
    throw std::runtime_error("validate_calibration: need >= 20 events, corpus has " +
                             std::to_string(total_events));

  // Regenerate each game from its manifest seed to recover message provenance;
  // a corpus whose files do not match its manifest is rejected outright.
  std::vector<GeneratedGame> regenerated;
  regenerated.reserve(corpus.games.size());
  for (std::size_t i = 0; i < corpus.games.size(); ++i) {
    const auto& gj = manifest.at("games").at(i);
    GameScript script = cfg.script;
    script.seed = gj.at("seed").get<std::uint64_t>();
    script.n_events_override = gj.at("n_events").get<int>();
    script.duration_s = gj.at("duration_s").get<int>();
    GeneratedGame gg = generate_game(script, cfg.population, cfg.kernel);
    if (gg.messages != corpus.games[i].messages || gg.truth != corpus.games[i].truth)
      throw std::runtime_error("validate_calibration: " + corpus.games[i].id +
                               " does not match its manifest seed");
    regenerated.push_back(std::move(gg));
  }

  // Targets come from the library's reference defaults, not the manifest's
  // own knobs, so a deliberately mis-calibrated corpus fails here.
  const ResponseKernel ref_kernel;
  const PopulationConfig ref_pop;

  constexpr int kTemplateWindow = 180;
  std::map<GroupKey, EventTemplate> merged;
  std::vector<double> onset_delays;            // first attributed response per event
  std::vector<double> active_delays, inactive_delays;
  std::vector<double> mobile_delays, non_mobile_delays;
  std::vector<double> short_delays, long_delays;
  std::vector<double> post_words, base_words;
  std::size_t n_mobile = 0, n_non_mobile = 0, n_ambiguous = 0, n_total = 0;
  const MarkerConfig markers = MarkerConfig::defaults();

  for (std::size_t gi = 0; gi < corpus.games.size(); ++gi) {
    const GameData& game = corpus.games[gi];
    const GeneratedGame& gen = regenerated[gi];
    const std::int64_t end_ms = static_cast<std::int64_t>(game.duration_s) * 1000;

    const auto series = split_and_bin(game.messages, 0, end_ms, 1000, markers);
    for (GroupKey g : {GroupKey::all, GroupKey::mobile, GroupKey::non_mobile,
                       GroupKey::short_text, GroupKey::long_text}) {
      EventTemplate t = build_template(series.at(g), game.truth, kTemplateWindow, g);
      const auto it = merged.find(g);
      if (it == merged.end())
        merged[g] = t;
      else
        it->second = merge_templates(it->second, t);
    }

    // provenance-based measurements
    std::vector<double> first_response(game.truth.size(),
                                       std::numeric_limits<double>::infinity());
    GroupClassifier classifier(markers);
    std::vector<std::int64_t> event_times;
    for (const auto& e : game.truth) event_times.push_back(e.ts_ms);

    for (std::size_t mi = 0; mi < game.messages.size(); ++mi) {
      const Message& m = game.messages[mi];
      const MessageOrigin& origin = gen.origins[mi];
      const GroupMembership membership = classifier.classify(m);

      ++n_total;
      switch (classify_device(m.client, markers)) {
        case DeviceClass::mobile: ++n_mobile; break;
        case DeviceClass::non_mobile: ++n_non_mobile; break;
        case DeviceClass::ambiguous: ++n_ambiguous; break;
      }

      const double dt = seconds_since_prior_event(m.ts_ms, event_times);
      if (dt >= 0.0 && dt <= 60.0)
        post_words.push_back(LengthState::word_count(m.text));
      else if (dt < 0.0 || dt > 240.0)
        base_words.push_back(LengthState::word_count(m.text));

      if (origin.source != MessageOrigin::Source::event) continue;
      const auto e = static_cast<std::size_t>(origin.event_index);
      first_response[e] = std::min(first_response[e], origin.delay_s);
      (membership.active ? active_delays : inactive_delays).push_back(origin.delay_s);
      if (membership.device == DeviceClass::mobile) mobile_delays.push_back(origin.delay_s);
      if (membership.device == DeviceClass::non_mobile)
        non_mobile_delays.push_back(origin.delay_s);
      (membership.long_text ? long_delays : short_delays).push_back(origin.delay_s);
    }
    for (double d : first_response) onset_delays.push_back(d);
  }

  CalibrationReport report;

  const double peak_time = smoothed_peak_time(merged.at(GroupKey::all));
  report.checks.push_back(make_check("response_peak_time_s", peak_time,
                                     ref_kernel.peak_s - 10.0, ref_kernel.peak_s + 10.0));

  std::size_t onset_in_range = 0;
  for (double d : onset_delays)
    if (d >= 7.0 && d <= 50.0) ++onset_in_range;
  const double onset_share =
      onset_delays.empty() ? 0.0
                           : static_cast<double>(onset_in_range) /
                                 static_cast<double>(onset_delays.size());
  report.checks.push_back(make_check("first_response_within_7_50_share", onset_share, 0.90, 1.0));

  const double mobile_peak = smoothed_peak_value(merged.at(GroupKey::mobile));
  const double non_mobile_peak = smoothed_peak_value(merged.at(GroupKey::non_mobile));
  const double device_ratio = non_mobile_peak > 0.0 ? mobile_peak / non_mobile_peak : 0.0;
  report.checks.push_back(make_check("mobile_to_non_mobile_peak_ratio", device_ratio, 1.6, 2.4));

  const double short_peak = smoothed_peak_value(merged.at(GroupKey::short_text));
  const double long_peak = smoothed_peak_value(merged.at(GroupKey::long_text));
  const double length_ratio = long_peak > 0.0 ? short_peak / long_peak : 0.0;
  report.checks.push_back(make_check("short_to_long_peak_ratio", length_ratio, 1.6, 2.4));

  const double activity_gap = mean_or_zero(active_delays) - mean_or_zero(inactive_delays);
  report.checks.push_back(make_check("active_minus_inactive_mean_delay_s", activity_gap,
                                     ref_pop.active_delay_offset_s - 3.0,
                                     ref_pop.active_delay_offset_s + 3.0));

  report.checks.push_back(
      make_check("post_event_mean_words", mean_or_zero(post_words), 4.5, 7.5));
  report.checks.push_back(
      make_check("baseline_mean_words", mean_or_zero(base_words), 10.5, 13.5));

  const double total = static_cast<double>(n_total);
  report.checks.push_back(make_check("device_share_mobile", n_mobile / total,
                                     ref_pop.device_mobile - 0.05, ref_pop.device_mobile + 0.05));
  report.checks.push_back(make_check("device_share_non_mobile", n_non_mobile / total,
                                     ref_pop.device_non_mobile - 0.05,
                                     ref_pop.device_non_mobile + 0.05));
  const double ambiguous_target = 1.0 - ref_pop.device_mobile - ref_pop.device_non_mobile;
  report.checks.push_back(make_check("device_share_ambiguous", n_ambiguous / total,
                                     ambiguous_target - 0.05, ambiguous_target + 0.05));

  report.info.emplace_back("events", static_cast<double>(total_events));
  report.info.emplace_back("messages", total);
  report.info.emplace_back("mobile_minus_non_mobile_mean_delay_s",
                           mean_or_zero(mobile_delays) - mean_or_zero(non_mobile_delays));
  report.info.emplace_back("long_minus_short_mean_delay_s",
                           mean_or_zero(long_delays) - mean_or_zero(short_delays));
  report.info.emplace_back("aggregate_peak_rate_msgs_per_s",
                           smoothed_peak_value(merged.at(GroupKey::all)));

  report.all_pass = std::all_of(report.checks.begin(), report.checks.end(),
                                [](const CalibrationCheck& c) { return c.pass; });
  return report;
}

}  // namespace pulsegate

