#include "pulsegate/corpus.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "pulsegate/ingest.hpp"

namespace pulsegate {

Corpus Corpus::load(const std::filesystem::path& dir) {
  Corpus c;
  c.dir = dir;
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("corpus: cannot open " + manifest_path.string());
  c.manifest_json.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  nlohmann::json manifest = nlohmann::json::parse(c.manifest_json);
  for (const auto& gj : manifest.at("games")) {
    GameData g;
    g.id = gj.at("id").get<std::string>();
    g.seed = gj.at("seed").get<std::uint64_t>();
    g.duration_s = gj.at("duration_s").get<int>();
    const auto game_dir = dir / g.id;
    ParseResult parsed = parse_stream_file(game_dir / "stream.ndjson");
    if (parsed.skipped > 0)
      throw std::runtime_error("corpus: malformed lines in " + g.id + "/stream.ndjson");
    g.messages = std::move(parsed.messages);
    g.truth = load_truth_file(game_dir / "truth.ndjson");
    c.games.push_back(std::move(g));
  }
  if (c.games.empty()) throw std::runtime_error("corpus: no games in manifest");
  return c;
}

std::size_t Corpus::total_events() const {
  std::size_t n = 0;
  for (const auto& g : games) n += g.truth.size();
  return n;
}

}  // namespace pulsegate
