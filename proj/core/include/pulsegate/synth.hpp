#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pulsegate/corpus.hpp"
#include "pulsegate/model.hpp"

namespace pulsegate {

/// Deterministic splitmix64-based generator with hand-rolled samplers, so a
/// fixed seed yields byte-identical streams on every platform and build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);
  int uniform_int(int lo, int hi);         // inclusive
  double normal();                         // Box-Muller
  double exponential(double rate);
  int poisson(double mean);                // log-space Knuth, safe for large means
  double gamma_int_shape(int shape);       // sum of `shape` unit exponentials

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b);

 private:
  std::uint64_t state_;
};

/// Shape of the post-event response: a polynomial rise to a peak followed by
/// an exponential decay (a gamma bump in normalized time), anchored so every
/// event peaks at peak_s regardless of its onset draw.
struct ResponseKernel {
  double onset_min_s = 9.0;    // uniform first-response delay draw
  double onset_max_s = 27.0;
  double peak_s = 75.0;
  int rise_sharpness = 3;      // gamma shape minus one; higher = sharper peak
  double amplitude = 7.0;      // expected event msgs/sec at the peak, all streams
  double strength_jitter = 0.12;  // lognormal sigma of per-event strength

  double mean_onset_s() const { return 0.5 * (onset_min_s + onset_max_s); }
  /// Peak density of the normalized bump (per normalized-time unit).
  double bump_peak_density() const;
  /// Expected event-related messages per event implied by the amplitude.
  double expected_messages_per_event() const;
};

/// Population behavior: who posts, from what device, how fast, and how wordy.
struct PopulationConfig {
  int n_users = 6000;
  double activity_skew = 0.45;        // Zipf exponent over user ranks
  double head_user_fraction = 0.10;   // rank share treated as habitual posters

  double device_mobile = 0.40;        // corpus-wide share; remainder is ambiguous
  double device_non_mobile = 0.30;

  // Event responders skew mobile (that is what doubles the mobile peak rate);
  // the background-chatter mix is derived so corpus-wide shares still land on
  // the configured 40/30/30.
  double event_device_mobile = 0.46;
  double event_device_non_mobile = 0.23;

  // Group delay offsets
  double mobile_delay_offset_s = 4.0;
  double active_delay_offset_s = 5.0;
  double long_delay_offset_s = 3.0;

  // Word-count model: a two-mode mixture whose short-mode share jumps inside
  // the post-event window (mean 12 words -> 6 words) and relaxes linearly.
  double excited_share_event = 0.74;
  double excited_share_base = 0.05;
  double short_words_rate = 2.2;        // words = 1 + poisson(rate)
  double long_words_rate_base = 9.7;    // words = 3 + poisson(rate)
  double long_words_rate_event = 10.0;
  double depressed_window_s = 60.0;
  double recovery_window_s = 120.0;
};

/// Per-game script: timing, background chatter and off-event flurries.
struct GameScript {
  int duration_s = 10800;
  int events_min = 5;
  int events_max = 6;
  int n_events_override = 0;               // > 0 pins the event count
  std::vector<std::int64_t> event_times_ms; // non-empty pins the event times
  double noise_rate = 0.20;                 // background keyword msgs/sec
  double distractor_rate = 3.0;             // expected fast keyword flurries per game
  double distractor_mass_min = 2.0;         // expected msgs per flurry, log-uniform
  double distractor_mass_max = 12.0;
  double slow_distractor_rate = 2.0;        // diffuse multi-minute chatter swells
  double slow_distractor_mass_min = 20.0;
  double slow_distractor_mass_max = 45.0;
  std::uint64_t seed = 1;
};

/// Where a generated message came from; kept in memory for calibration only,
/// never written to the stream files.
struct MessageOrigin {
  enum class Source : std::uint8_t { noise, event, distractor };
  Source source = Source::noise;
  int event_index = -1;   // only for Source::event
  double delay_s = 0.0;   // only for Source::event
};

struct GeneratedGame {
  std::vector<Message> messages;  // sorted by (ts_ms, generation order)
  std::vector<GroundTruthEvent> truth;
  std::vector<MessageOrigin> origins;  // aligned with messages
};

GeneratedGame generate_game(const GameScript& script, const PopulationConfig& pop,
                            const ResponseKernel& kernel);

struct CorpusConfig {
  int n_games = 18;
  std::uint64_t seed = 42;
  GameScript script;       // per-game defaults; seed and event count are derived
  PopulationConfig population;
  ResponseKernel kernel;
};

/// Generates n_games labeled streams under corpus/<game_id>/ plus a manifest
/// carrying every config and per-game seed (enough to regenerate bit-exactly).
void generate_corpus(const std::filesystem::path& out_dir, const CorpusConfig& cfg);

std::string corpus_config_to_json(const CorpusConfig& cfg);
CorpusConfig corpus_config_from_json(const std::string& json_text);

struct CalibrationCheck {
  std::string name;
  double measured = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool pass = false;
};

struct CalibrationReport {
  std::vector<CalibrationCheck> checks;
  std::vector<std::pair<std::string, double>> info;  // measured but not gated
  bool all_pass = false;

  std::string to_json_string() const;
};

/// Measures the corpus against its configured response statistics: peak time,
/// onset range, the device and length peak-rate ratios, the activity delay
/// gap, word-count depression, and the device mix. Message provenance is
/// recovered by regenerating each game from the manifest seeds (generation is
/// deterministic); a corpus that does not match its manifest is rejected.
CalibrationReport validate_calibration(const std::filesystem::path& corpus_dir);

}  // namespace pulsegate
