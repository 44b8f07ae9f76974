#include "doctest.h"

#include "httplib.h"
#include "json.hpp"

#include "pulsegate/service.hpp"

using namespace pulsegate;

TEST_CASE("registry: fresh game serves empty events and zero stats") {
  GameRegistry reg;
  reg.register_game("g1", 0);
  CHECK(reg.events("g1")->empty());
  const auto s = reg.stats("g1");
  CHECK(s->total_volume == 0);
  CHECK(s->bins == 0);
  CHECK(!reg.events("nope").has_value());
}

TEST_CASE("registry: detections pass through in order") {
  GameRegistry reg;
  reg.register_game("g1", 0);
  reg.append_detection("g1", {40'000, 9.5, DetectionRule::mean, "touchdown"});
  reg.append_detection("g1", {400'000, 12.0, DetectionRule::mean, "touchdown"});
  const auto dets = reg.events("g1");
  REQUIRE(dets->size() == 2);
  CHECK((*dets)[0].ts_ms < (*dets)[1].ts_ms);
  CHECK_THROWS_AS(reg.append_detection("g1", {1000, 1.0, DetectionRule::mean, "touchdown"}),
                  std::invalid_argument);
}

TEST_CASE("registry: trend zero-pads young games") {
  GameRegistry reg;
  reg.register_game("g1", 0);
  reg.append_bin("g1", 4);
  reg.append_bin("g1", 7);
  reg.append_bin("g1", 1);
  const auto snap = reg.trend("g1", 5);
  CHECK(snap->counts == std::vector<std::int64_t>{0, 0, 4, 7, 1});
  CHECK(snap->start_ms == -2000);  // two bins before the game started

  const auto latest = reg.trend("g1", 1);
  CHECK(latest->counts == std::vector<std::int64_t>{1});
  CHECK_THROWS_AS(reg.trend("g1", 0), std::invalid_argument);
}

TEST_CASE("registry: stats volume equals the full trend sum") {
  GameRegistry reg;
  reg.register_game("g1", 0);
  std::int64_t total = 0;
  for (int i = 0; i < 50; ++i) {
    reg.append_bin("g1", i % 7);
    total += i % 7;
  }
  CHECK(reg.stats("g1")->total_volume == total);
  const auto snap = reg.trend("g1", 50);
  std::int64_t sum = 0;
  for (auto c : snap->counts) sum += c;
  CHECK(sum == total);
}

TEST_CASE("registry: ranking sorts by volume with id tie-break") {
  GameRegistry reg;
  reg.register_game("a", 0);
  reg.register_game("b", 0);
  reg.register_game("c", 0);
  reg.append_bin("a", 10);
  reg.append_bin("b", 30);
  reg.append_bin("c", 10);
  const auto ranking = reg.ranking();
  REQUIRE(ranking.size() == 3);
  CHECK(ranking[0].game_id == "b");
  CHECK(ranking[1].game_id == "a");  // ties break lexicographically
  CHECK(ranking[2].game_id == "c");
}

TEST_CASE("http service: endpoints, errors, and wire format") {
  GameRegistry reg;
  reg.register_game("game_01", 0);
  reg.append_bin("game_01", 4);
  reg.append_bin("game_01", 9);
  reg.append_detection("game_01", {40'000, 9.5, DetectionRule::mean, "touchdown"});

  HttpService service(reg);
  const int port = service.start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);

  {
    const auto res = client.Get("/games/game_01/events");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto j = nlohmann::json::parse(res->body);
    REQUIRE(j.size() == 1);
    CHECK(j[0]["ts_ms"] == 40'000);
    CHECK(j[0]["rule"] == "mean");
  }
  {
    const auto res = client.Get("/games/game_01/trend?bins=4");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto j = nlohmann::json::parse(res->body);
    CHECK(j["bin_width_ms"] == 1000);
    CHECK(j["counts"] == nlohmann::json::array({0, 0, 4, 9}));
  }
  {
    const auto res = client.Get("/games/game_01/stats");
    REQUIRE(res);
    const auto j = nlohmann::json::parse(res->body);
    CHECK(j["total_volume"] == 13);
    CHECK(j["n_detections"] == 1);
  }
  {
    const auto res = client.Get("/ranking");
    REQUIRE(res);
    const auto j = nlohmann::json::parse(res->body);
    REQUIRE(j.size() == 1);
    CHECK(j[0]["game_id"] == "game_01");
    CHECK(j[0]["total_volume"] == 13);
  }
  {
    const auto res = client.Get("/games/unknown/events");
    REQUIRE(res);
    CHECK(res->status == 404);
    CHECK(nlohmann::json::parse(res->body).contains("error"));
  }
  {
    const auto res = client.Get("/games/game_01/trend?bins=0");
    REQUIRE(res);
    CHECK(res->status == 400);
  }
  {
    const auto res = client.Get("/games/game_01/trend?bins=abc");
    REQUIRE(res);
    CHECK(res->status == 400);
  }
  service.stop();
}

TEST_CASE("resolve_service_port: flag beats environment beats fallback") {
  CHECK(resolve_service_port(9000) == 9000);
  ::setenv("PULSEGATE_PORT", "7123", 1);
  CHECK(resolve_service_port(0) == 7123);
  ::unsetenv("PULSEGATE_PORT");
  CHECK(resolve_service_port(0, 8787) == 8787);
}
