#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pulsegate/model.hpp"

namespace pulsegate {

/// One labeled game: its message stream and ground-truth event times.
struct GameData {
  std::string id;
  std::uint64_t seed = 0;
  int duration_s = 0;
  std::vector<Message> messages;
  std::vector<GroundTruthEvent> truth;
};

/// A corpus directory: corpus/<game_id>/{stream.ndjson, truth.ndjson} plus
/// corpus/manifest.json listing games, seeds and generator configs.
struct Corpus {
  std::filesystem::path dir;
  std::string manifest_json;
  std::vector<GameData> games;

  static Corpus load(const std::filesystem::path& dir);
  std::size_t total_events() const;
};

}  // namespace pulsegate
