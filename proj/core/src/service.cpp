#include "pulsegate/service.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace pulsegate {

void GameRegistry::register_game(const std::string& id, std::int64_t start_ms) {
  std::unique_lock lock(mu_);
  auto [it, inserted] = games_.try_emplace(id);
  if (!inserted) throw std::invalid_argument("registry: game already registered: " + id);
  it->second.start_ms = start_ms;
}

void GameRegistry::append_bin(const std::string& id, std::int64_t count) {
  std::unique_lock lock(mu_);
  const auto it = games_.find(id);
  if (it == games_.end()) throw std::invalid_argument("registry: unknown game " + id);
  it->second.bins.push_back(count);
  it->second.total_volume += count;
}

void GameRegistry::append_detection(const std::string& id, const Detection& d) {
  std::unique_lock lock(mu_);
  const auto it = games_.find(id);
  if (it == games_.end()) throw std::invalid_argument("registry: unknown game " + id);
  auto& dets = it->second.detections;
  if (!dets.empty() && d.ts_ms < dets.back().ts_ms)
    throw std::invalid_argument("registry: detections must be appended in time order");
  dets.push_back(d);
}

std::optional<std::vector<Detection>> GameRegistry::events(const std::string& id) const {
  std::shared_lock lock(mu_);
  const auto it = games_.find(id);
  if (it == games_.end()) return std::nullopt;
  return it->second.detections;
}

std::optional<TrendSnapshot> GameRegistry::trend(const std::string& id, int bins) const {
  if (bins < 1) throw std::invalid_argument("registry: bins must be >= 1");
  std::shared_lock lock(mu_);
  const auto it = games_.find(id);
  if (it == games_.end()) return std::nullopt;
  const PerGame& g = it->second;
  TrendSnapshot snap;
  snap.bin_width_ms = 1000;
  const std::int64_t age = static_cast<std::int64_t>(g.bins.size());
  const std::int64_t n = bins;
  snap.start_ms = g.start_ms + (age - n) * 1000;  // zero-padded when the game is young
  snap.counts.assign(static_cast<std::size_t>(n), 0);
  const std::int64_t copy = std::min<std::int64_t>(n, age);
  for (std::int64_t i = 0; i < copy; ++i)
    snap.counts[static_cast<std::size_t>(n - copy + i)] =
        g.bins[static_cast<std::size_t>(age - copy + i)];
  return snap;
}

std::optional<GameStats> GameRegistry::stats(const std::string& id) const {
  std::shared_lock lock(mu_);
  const auto it = games_.find(id);
  if (it == games_.end()) return std::nullopt;
  GameStats s;
  s.game_id = id;
  s.total_volume = it->second.total_volume;
  s.bins = static_cast<std::int64_t>(it->second.bins.size());
  s.n_detections = static_cast<std::int64_t>(it->second.detections.size());
  return s;
}

std::vector<GameStats> GameRegistry::ranking() const {
  std::shared_lock lock(mu_);
  std::vector<GameStats> out;
  out.reserve(games_.size());
  for (const auto& [id, g] : games_) {
    GameStats s;
    s.game_id = id;
    s.total_volume = g.total_volume;
    s.bins = static_cast<std::int64_t>(g.bins.size());
    s.n_detections = static_cast<std::int64_t>(g.detections.size());
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const GameStats& a, const GameStats& b) {
    return a.total_volume != b.total_volume ? a.total_volume > b.total_volume
                                            : a.game_id < b.game_id;
  });
  return out;
}

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = message;
  send_json(res, status, j);
}

}  // namespace

struct HttpService::Impl {
  const GameRegistry& registry;
  httplib::Server server;
  std::thread worker;
  int port = 0;

  explicit Impl(const GameRegistry& r) : registry(r) {}
};

HttpService::HttpService(const GameRegistry& registry) : impl_(std::make_unique<Impl>(registry)) {
  auto& server = impl_->server;
  const GameRegistry& reg = impl_->registry;

  server.Get(R"(/games/([^/]+)/events)", [&reg](const httplib::Request& req,
                                                httplib::Response& res) {
    const auto dets = reg.events(req.matches[1]);
    if (!dets) return send_error(res, 404, "unknown game");
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const Detection& d : *dets) {
      nlohmann::ordered_json dj;
      dj["ts_ms"] = d.ts_ms;
      dj["score"] = d.score;
      dj["rule"] = std::string(to_string(d.rule));
      dj["kind"] = d.kind;
      out.push_back(std::move(dj));
    }
    send_json(res, 200, out);
  });

  server.Get(R"(/games/([^/]+)/trend)", [&reg](const httplib::Request& req,
                                               httplib::Response& res) {
    int bins = 60;
    if (req.has_param("bins")) {
      try {
        bins = std::stoi(req.get_param_value("bins"));
      } catch (const std::exception&) {
        return send_error(res, 400, "invalid bins");
      }
    }
    if (bins < 1) return send_error(res, 400, "invalid bins");
    const auto snap = reg.trend(req.matches[1], bins);
    if (!snap) return send_error(res, 404, "unknown game");
    nlohmann::ordered_json out;
    out["start_ms"] = snap->start_ms;
    out["bin_width_ms"] = snap->bin_width_ms;
    out["counts"] = snap->counts;
    send_json(res, 200, out);
  });

  server.Get(R"(/games/([^/]+)/stats)", [&reg](const httplib::Request& req,
                                               httplib::Response& res) {
    const auto stats = reg.stats(req.matches[1]);
    if (!stats) return send_error(res, 404, "unknown game");
    nlohmann::ordered_json out;
    out["game_id"] = stats->game_id;
    out["total_volume"] = stats->total_volume;
    out["bins"] = stats->bins;
    out["n_detections"] = stats->n_detections;
    send_json(res, 200, out);
  });

  server.Get("/ranking", [&reg](const httplib::Request&, httplib::Response& res) {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const GameStats& s : reg.ranking()) {
      nlohmann::ordered_json sj;
      sj["game_id"] = s.game_id;
      sj["total_volume"] = s.total_volume;
      out.push_back(std::move(sj));
    }
    send_json(res, 200, out);
  });
}

HttpService::~HttpService() { stop(); }

int HttpService::start(const std::string& host, int port) {
  auto& server = impl_->server;
  if (port == 0) {
    impl_->port = server.bind_to_any_port(host);
    if (impl_->port <= 0) throw std::runtime_error("service: cannot bind to " + host);
  } else {
    if (!server.bind_to_port(host, port))
      throw std::runtime_error("service: cannot bind to " + host + ":" + std::to_string(port));
    impl_->port = port;
  }
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  server.wait_until_ready();
  return impl_->port;
}

void HttpService::stop() {
  if (!impl_) return;
  if (impl_->worker.joinable()) {
    impl_->server.stop();
    impl_->worker.join();
  }
}

int resolve_service_port(int flag_port, int fallback) {
  if (flag_port > 0) return flag_port;
  if (const char* env = std::getenv("PULSEGATE_PORT"); env != nullptr && *env != '\0')
    return std::atoi(env);
  return fallback;
}

}  // namespace pulsegate
