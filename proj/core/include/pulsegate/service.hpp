#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "pulsegate/model.hpp"

namespace pulsegate {

/// Snapshot of the most recent bins of one game's posting volume.
struct TrendSnapshot {
  std::int64_t start_ms = 0;
  std::int64_t bin_width_ms = 1000;
  std::vector<std::int64_t> counts;
};

struct GameStats {
  std::string game_id;
  std::int64_t total_volume = 0;
  std::int64_t bins = 0;
  std::int64_t n_detections = 0;
};

/// Shared state between the detection pipeline (single writer per game) and
/// the HTTP read side. Writers append completed one-second bins and
/// detections; readers get consistent snapshot copies under a shared lock.
class GameRegistry {
 public:
  void register_game(const std::string& id, std::int64_t start_ms);
  void append_bin(const std::string& id, std::int64_t count);
  void append_detection(const std::string& id, const Detection& d);

  std::optional<std::vector<Detection>> events(const std::string& id) const;
  std::optional<TrendSnapshot> trend(const std::string& id, int bins) const;
  std::optional<GameStats> stats(const std::string& id) const;
  /// All games ordered by total volume descending, game id ascending on ties.
  std::vector<GameStats> ranking() const;

 private:
  struct PerGame {
    std::int64_t start_ms = 0;
    std::vector<std::int64_t> bins;  // full history of 1 s volumes
    std::int64_t total_volume = 0;
    std::vector<Detection> detections;  // append-only, time-ordered
  };

  mutable std::shared_mutex mu_;
  std::map<std::string, PerGame> games_;
};

/// Read-only JSON API over a registry:
///   GET /games/{id}/events        -> [{ts_ms, score, rule, kind}, ...]
///   GET /games/{id}/trend?bins=N  -> {start_ms, bin_width_ms, counts}
///   GET /games/{id}/stats         -> {game_id, total_volume, bins, n_detections}
///   GET /ranking                  -> [{game_id, total_volume}, ...]
/// Unknown games yield 404 with {"error": ...}; bad parameters yield 400.
class HttpService {
 public:
  explicit HttpService(const GameRegistry& registry);
  ~HttpService();

  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  /// Binds and serves on a background thread. port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Port selection for the service: flag value if positive, else the
/// PULSEGATE_PORT environment variable, else the fallback.
int resolve_service_port(int flag_port, int fallback = 8787);

}  // namespace pulsegate
