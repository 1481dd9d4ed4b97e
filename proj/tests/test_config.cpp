#include <doctest.h>

#include "imit2d/config.hpp"

using namespace imit2d;
using namespace imit2d::config;

TEST_SUITE_BEGIN("config");

TEST_CASE("defaults match the published training tables") {
  const ExperimentConfig cfg = parse_config("{}");
  CHECK(cfg.diffusion.learning_rate == 2e-5);
  CHECK(cfg.diffusion.weight_decay == 0.0);
  CHECK(cfg.diffusion.epochs == 1000);
  CHECK(cfg.fcr.learning_rate == 1e-3);
  CHECK(cfg.fcr.epochs == 1000);
  CHECK(cfg.ae_fcr.learning_rate == 1e-3);
  CHECK(cfg.ae_fcr.weight_decay == 0.75);
  CHECK(cfg.ae_fcr.epochs == 500);
  CHECK(cfg.history == 32);
  CHECK(cfg.horizon == 18);
  CHECK(cfg.schedule_steps == 10);
  CHECK(cfg.success_radius == 1.4);
  CHECK(cfg.max_bounces == 3);
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    parse_config(R"({"not_a_key": 1})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("not_a_key") != std::string::npos);
  }

  try {
    parse_config(R"({"ball": {"gravity": 9.81, "typo": 2}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("ball.typo") != std::string::npos);
  }
}

TEST_CASE("domain validation") {
  CHECK_THROWS_AS(parse_config(R"({"ball": {"restitution": 1.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"schedule_steps": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"extraction": {"window": 1000}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"diffusion": {"epochs": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("not json"), ConfigError);
}

TEST_CASE("round-trip through the canonical dump") {
  ExperimentConfig cfg = parse_config("{}");
  cfg.seed = 1234;
  cfg.diffusion.epochs = 77;
  cfg.launch.speed = {10.0, 12.0};
  const ExperimentConfig again = parse_config(dump_config(cfg));
  CHECK(again.seed == 1234);
  CHECK(again.diffusion.epochs == 77);
  CHECK(again.launch.speed.first == 10.0);
  CHECK(config_hash(again) == config_hash(cfg));
  CHECK(config_hash(again) != config_hash(parse_config("{}")));
}

TEST_SUITE_END();
