#include <benchmark/benchmark.h>

#include "pulsegate/grouping.hpp"
#include "pulsegate/synth.hpp"

using namespace pulsegate;

namespace {

const GeneratedGame& sample_game() {
  static const GeneratedGame game = [] {
    GameScript script;
    script.duration_s = 10'800;
    script.n_events_override = 6;
    script.seed = 20;
    return generate_game(script, PopulationConfig{}, ResponseKernel{});
  }();
  return game;
}

}  // namespace

static void BM_GenerateGame(benchmark::State& state) {
  GameScript script;
  script.duration_s = 10'800;
  script.n_events_override = 6;
  script.seed = 21;
  for (auto _ : state) {
    auto g = generate_game(script, PopulationConfig{}, ResponseKernel{});
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(BM_GenerateGame);

static void BM_SplitAndBin(benchmark::State& state) {
  const auto& game = sample_game();
  for (auto _ : state) {
    auto series = split_and_bin(game.messages, 0, 10'800'000);
    benchmark::DoNotOptimize(series);
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(game.messages.size()));
}
BENCHMARK(BM_SplitAndBin);

static void BM_BinMessages(benchmark::State& state) {
  const auto& game = sample_game();
  for (auto _ : state) {
    auto series = bin_messages(game.messages, 0, 10'800'000);
    benchmark::DoNotOptimize(series);
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(game.messages.size()));
}
BENCHMARK(BM_BinMessages);
