#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "pulsegate/grouping.hpp"
#include "pulsegate/ingest.hpp"
#include "pulsegate/synth.hpp"

using namespace pulsegate;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "pulsegate_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("rng: deterministic and sane samplers") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng r(7);
  double sum = 0.0;
  for (int i = 0; i < 20'000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(sum / 20'000 == doctest::Approx(0.5).epsilon(0.02));

  double pois = 0.0;
  for (int i = 0; i < 5000; ++i) pois += r.poisson(12.0);
  CHECK(pois / 5000 == doctest::Approx(12.0).epsilon(0.03));

  double gam = 0.0;
  for (int i = 0; i < 5000; ++i) gam += r.gamma_int_shape(4);
  CHECK(gam / 5000 == doctest::Approx(4.0).epsilon(0.03));
}

TEST_CASE("generate_game: silence in, silence out") {
  GameScript script;
  script.duration_s = 2000;
  script.events_min = script.events_max = 0;
  script.noise_rate = 0.0;
  script.distractor_rate = 0.0;
  script.slow_distractor_rate = 0.0;
  const auto g = generate_game(script, PopulationConfig{}, ResponseKernel{});
  CHECK(g.messages.empty());
  CHECK(g.truth.empty());
}

TEST_CASE("generate_game: same seed, identical bytes") {
  GameScript script;
  script.duration_s = 3000;
  script.n_events_override = 3;
  script.seed = 777;
  const auto a = generate_game(script, PopulationConfig{}, ResponseKernel{});
  const auto b = generate_game(script, PopulationConfig{}, ResponseKernel{});
  REQUIRE(a.messages.size() == b.messages.size());
  CHECK(a.messages == b.messages);
  CHECK(a.truth == b.truth);
  for (std::size_t i = 0; i < a.messages.size(); ++i)
    CHECK(to_ndjson_line(a.messages[i]) == to_ndjson_line(b.messages[i]));
}

TEST_CASE("generate_game: timestamps non-decreasing, events separated, all in range") {
  GameScript script;
  script.duration_s = 7200;
  script.n_events_override = 6;
  script.seed = 1234;
  const auto g = generate_game(script, PopulationConfig{}, ResponseKernel{});
  REQUIRE(g.truth.size() == 6);
  for (std::size_t i = 1; i < g.truth.size(); ++i)
    CHECK(g.truth[i].ts_ms - g.truth[i - 1].ts_ms >= kMinEventSeparationMs);
  for (std::size_t i = 1; i < g.messages.size(); ++i)
    CHECK(g.messages[i].ts_ms >= g.messages[i - 1].ts_ms);
  for (const auto& m : g.messages) {
    CHECK(m.ts_ms >= 0);
    CHECK(m.ts_ms < script.duration_s * 1000LL);
    CHECK_NOTHROW(validate_message(m));
  }
  CHECK(g.origins.size() == g.messages.size());
}

TEST_CASE("generate_game: empirical rate converges to the configured noise rate") {
  // law of large numbers at loose tolerance, background only
  double total = 0.0;
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    GameScript script;
    script.duration_s = 4000;
    script.events_min = script.events_max = 0;
    script.noise_rate = 0.5;
    script.distractor_rate = 0.0;
    script.slow_distractor_rate = 0.0;
    script.seed = seed;
    total += static_cast<double>(
        generate_game(script, PopulationConfig{}, ResponseKernel{}).messages.size());
  }
  const double rate = total / (3 * 4000.0);
  CHECK(rate == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("generate_game: grouping recovers the configured device mix") {
  GameScript script;
  script.duration_s = 10'800;
  script.n_events_override = 5;
  script.seed = 99;
  PopulationConfig pop;
  const auto g = generate_game(script, pop, ResponseKernel{});
  const auto markers = MarkerConfig::defaults();
  double mobile = 0, non_mobile = 0, ambiguous = 0;
  for (const auto& m : g.messages) {
    switch (classify_device(m.client, markers)) {
      case DeviceClass::mobile: ++mobile; break;
      case DeviceClass::non_mobile: ++non_mobile; break;
      case DeviceClass::ambiguous: ++ambiguous; break;
    }
  }
  const double total = mobile + non_mobile + ambiguous;
  CHECK(mobile / total == doctest::Approx(pop.device_mobile).epsilon(0.125));
  CHECK(non_mobile / total == doctest::Approx(pop.device_non_mobile).epsilon(0.17));
}

TEST_CASE("generate_game: keyword filter keeps every generated message") {
  GameScript script;
  script.duration_s = 2000;
  script.n_events_override = 2;
  script.seed = 5;
  const auto g = generate_game(script, PopulationConfig{}, ResponseKernel{});
  const KeywordFilter f({"touchdown", "td"});
  CHECK(filter_messages(g.messages, f).size() == g.messages.size());
}

TEST_CASE("generate_corpus: single game layout and determinism") {
  const auto dir_a = fresh_dir("corpus_a");
  const auto dir_b = fresh_dir("corpus_b");
  CorpusConfig cfg;
  cfg.n_games = 1;
  cfg.seed = 4242;
  cfg.script.duration_s = 3600;
  generate_corpus(dir_a, cfg);
  generate_corpus(dir_b, cfg);

  CHECK(std::filesystem::exists(dir_a / "manifest.json"));
  CHECK(std::filesystem::exists(dir_a / "game_01" / "stream.ndjson"));
  CHECK(std::filesystem::exists(dir_a / "game_01" / "truth.ndjson"));
  CHECK(slurp(dir_a / "manifest.json") == slurp(dir_b / "manifest.json"));
  CHECK(slurp(dir_a / "game_01" / "stream.ndjson") == slurp(dir_b / "game_01" / "stream.ndjson"));
  CHECK(slurp(dir_a / "game_01" / "truth.ndjson") == slurp(dir_b / "game_01" / "truth.ndjson"));

  const auto corpus = Corpus::load(dir_a);
  REQUIRE(corpus.games.size() == 1);
  CHECK(corpus.games[0].id == "game_01");
  CHECK(!corpus.games[0].messages.empty());
}

TEST_CASE("corpus config json round-trip") {
  CorpusConfig cfg;
  cfg.n_games = 4;
  cfg.seed = 31337;
  cfg.script.noise_rate = 0.37;
  cfg.kernel.amplitude = 7.25;
  cfg.population.n_users = 1234;
  const auto back = corpus_config_from_json(corpus_config_to_json(cfg));
  CHECK(back.n_games == 4);
  CHECK(back.seed == 31337);
  CHECK(back.script.noise_rate == 0.37);
  CHECK(back.kernel.amplitude == 7.25);
  CHECK(back.population.n_users == 1234);
}

TEST_CASE("validate_calibration: small default corpus passes") {
  const auto dir = fresh_dir("corpus_calib");
  CorpusConfig cfg;
  cfg.n_games = 4;
  cfg.seed = 2024;
  generate_corpus(dir, cfg);
  const auto report = validate_calibration(dir);
  for (const auto& c : report.checks) {
    INFO(c.name, " measured=", c.measured, " lo=", c.lo, " hi=", c.hi);
    CHECK(c.pass);
  }
  CHECK(report.all_pass);
}

TEST_CASE("validate_calibration: negative control fails the peak check") {
  const auto dir = fresh_dir("corpus_shifted");
  CorpusConfig cfg;
  cfg.n_games = 4;
  cfg.seed = 2025;
  cfg.kernel.peak_s = 30.0;  // deliberately mis-calibrated
  cfg.kernel.onset_max_s = 12.0;
  generate_corpus(dir, cfg);
  const auto report = validate_calibration(dir);
  bool peak_failed = false;
  for (const auto& c : report.checks)
    if (c.name == "response_peak_time_s" && !c.pass) peak_failed = true;
  CHECK(peak_failed);
  CHECK(!report.all_pass);
}

TEST_CASE("validate_calibration: tampered corpus is rejected") {
  const auto dir = fresh_dir("corpus_tampered");
  CorpusConfig cfg;
  cfg.n_games = 4;
  cfg.seed = 2026;
  generate_corpus(dir, cfg);
  // flip one byte in a stream file
  auto path = dir / "game_01" / "stream.ndjson";
  std::string text = slurp(path);
  const auto pos = text.find("\"text\":\"");
  REQUIRE(pos != std::string::npos);
  text[pos + 8] = text[pos + 8] == 'X' ? 'Y' : 'X';
  std::ofstream(path, std::ios::binary) << text;
  CHECK_THROWS_AS(validate_calibration(dir), std::runtime_error);
}

TEST_CASE("validate_calibration: refuses corpora with too few events") {
  const auto dir = fresh_dir("corpus_tiny");
  CorpusConfig cfg;
  cfg.n_games = 1;
  cfg.seed = 1;
  generate_corpus(dir, cfg);
  CHECK_THROWS_AS(validate_calibration(dir), std::runtime_error);
}
