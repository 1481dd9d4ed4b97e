#include "imit2d/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace imit2d::config {
namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& scope) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.contains(key)) {
      throw ConfigError("unknown config key: " + scope + key);
    }
  }
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_range(const json& obj, const char* key, std::pair<double, double>& out,
                const std::string& scope) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_array() || v.size() != 2) {
    throw ConfigError("config key " + scope + key + " must be a [lo, hi] pair");
  }
  out = {v[0].get<double>(), v[1].get<double>()};
}

void read_train(const json& obj, const char* key, nn::TrainConfig& out,
                const std::string& scope) {
  if (!obj.contains(key)) return;
  const auto& t = obj.at(key);
  reject_unknown_keys(
      t, {"learning_rate", "weight_decay", "epochs", "batch_size", "seed"},
      scope + key + ".");
  read_field(t, "learning_rate", out.learning_rate);
  read_field(t, "weight_decay", out.weight_decay);
  read_field(t, "epochs", out.epochs);
  read_field(t, "batch_size", out.batch_size);
  read_field(t, "seed", out.seed);
}

void validate(const ExperimentConfig& cfg) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config value: " + what);
  };
  require(cfg.schema_version == 1, "schema_version must be 1");
  require(cfg.ball.gravity > 0, "ball.gravity must be positive");
  require(cfg.ball.restitution > 0 && cfg.ball.restitution < 1,
          "ball.restitution must lie in (0, 1)");
  require(cfg.ball.bounce_friction >= 0 && cfg.ball.bounce_friction <= 1,
          "ball.bounce_friction must lie in [0, 1]");
  require(cfg.ball.drag_coeff >= 0, "ball.drag_coeff must be non-negative");
  require(cfg.fps > 0, "fps must be positive");
  require(cfg.control_dt > 0 && cfg.control_dt <= 0.02,
          "control_dt must lie in (0, 0.02]");
  require(cfg.schedule_steps >= 2, "schedule_steps must be at least 2");
  require(cfg.history >= 1 && cfg.horizon >= 1, "window sizes must be positive");
  require(cfg.rig_dropout_prob >= 0 && cfg.rig_dropout_prob < 1,
          "rig_dropout_prob must lie in [0, 1)");
  require(cfg.success_radius > 0, "success_radius must be positive");
  require(cfg.max_bounces >= 1, "max_bounces must be at least 1");
  require(cfg.replan_period > 0, "replan_period must be positive");
  require(cfg.launch.speed.first < cfg.launch.speed.second,
          "launch.speed range is degenerate");
  require(cfg.launch.height.first < cfg.launch.height.second,
          "launch.height range is degenerate");
  require(cfg.launch.lateral.first < cfg.launch.lateral.second,
          "launch.lateral range is degenerate");
  require(cfg.extraction.n_coeffs >= 1 &&
              cfg.extraction.n_coeffs <= cfg.extraction.n_mels,
          "extraction.n_coeffs must lie in [1, n_mels]");
  require((cfg.extraction.window & (cfg.extraction.window - 1)) == 0 &&
              cfg.extraction.window > 0,
          "extraction.window must be a power of two");
  for (const auto* t : {&cfg.diffusion, &cfg.fcr, &cfg.ae_fcr,
                        &cfg.extraction.hit}) {
    require(t->learning_rate > 0, "learning_rate must be positive");
    require(t->weight_decay >= 0, "weight_decay must be non-negative");
    require(t->epochs >= 1, "epochs must be at least 1");
    require(t->batch_size >= 1, "batch_size must be at least 1");
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  reject_unknown_keys(
      root,
      {"schema_version", "seed", "court", "ball", "launch", "gains", "image_width",
       "image_height", "fps", "control_dt", "rig_pixel_noise_sigma",
       "rig_dropout_prob", "schedule_steps", "history", "horizon", "diffusion",
       "fcr", "ae_fcr", "success_radius", "max_bounces", "replan_period",
       "v_max_plan", "max_duration", "estimator_window", "extraction"},
      "");

  ExperimentConfig cfg;
  read_field(root, "schema_version", cfg.schema_version);
  read_field(root, "seed", cfg.seed);

  if (root.contains("court")) {
    const auto& c = root.at("court");
    reject_unknown_keys(c, {"length", "width", "margin"}, "court.");
    read_field(c, "length", cfg.court.length);
    read_field(c, "width", cfg.court.width);
    read_field(c, "margin", cfg.court.margin);
  }
  if (root.contains("ball")) {
    const auto& b = root.at("ball");
    reject_unknown_keys(
        b, {"gravity", "drag_coeff", "restitution", "bounce_friction"}, "ball.");
    read_field(b, "gravity", cfg.ball.gravity);
    read_field(b, "drag_coeff", cfg.ball.drag_coeff);
    read_field(b, "restitution", cfg.ball.restitution);
    read_field(b, "bounce_friction", cfg.ball.bounce_friction);
  }
  if (root.contains("launch")) {
    const auto& l = root.at("launch");
    reject_unknown_keys(l, {"speed", "azimuth", "height", "lateral", "seed"},
                        "launch.");
    read_range(l, "speed", cfg.launch.speed, "launch.");
    read_range(l, "azimuth", cfg.launch.azimuth, "launch.");
    read_range(l, "height", cfg.launch.height, "launch.");
    read_range(l, "lateral", cfg.launch.lateral, "launch.");
    read_field(l, "seed", cfg.launch.seed);
  }
  if (root.contains("gains")) {
    const auto& g = root.at("gains");
    reject_unknown_keys(g, {"k1p", "k1d", "k2p", "k2d"}, "gains.");
    read_field(g, "k1p", cfg.gains.k1p);
    read_field(g, "k1d", cfg.gains.k1d);
    read_field(g, "k2p", cfg.gains.k2p);
    read_field(g, "k2d", cfg.gains.k2d);
  }
  read_field(root, "image_width", cfg.image_width);
  read_field(root, "image_height", cfg.image_height);
  read_field(root, "fps", cfg.fps);
  read_field(root, "control_dt", cfg.control_dt);
  read_field(root, "rig_pixel_noise_sigma", cfg.rig_pixel_noise_sigma);
  read_field(root, "rig_dropout_prob", cfg.rig_dropout_prob);
  read_field(root, "schedule_steps", cfg.schedule_steps);
  read_field(root, "history", cfg.history);
  read_field(root, "horizon", cfg.horizon);
  read_train(root, "diffusion", cfg.diffusion, "");
  read_train(root, "fcr", cfg.fcr, "");
  read_train(root, "ae_fcr", cfg.ae_fcr, "");
  read_field(root, "success_radius", cfg.success_radius);
  read_field(root, "max_bounces", cfg.max_bounces);
  read_field(root, "replan_period", cfg.replan_period);
  read_field(root, "v_max_plan", cfg.v_max_plan);
  read_field(root, "max_duration", cfg.max_duration);
  read_field(root, "estimator_window", cfg.estimator_window);

  if (root.contains("extraction")) {
    const auto& x = root.at("extraction");
    reject_unknown_keys(x,
                        {"sample_rate", "window", "n_mels", "n_coeffs",
                         "mean_shift_bandwidth", "hit"},
                        "extraction.");
    read_field(x, "sample_rate", cfg.extraction.sample_rate);
    read_field(x, "window", cfg.extraction.window);
    read_field(x, "n_mels", cfg.extraction.n_mels);
    read_field(x, "n_coeffs", cfg.extraction.n_coeffs);
    read_field(x, "mean_shift_bandwidth", cfg.extraction.mean_shift_bandwidth);
    read_train(x, "hit", cfg.extraction.hit, "extraction.");
  }

  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string dump_config(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  j["seed"] = cfg.seed;
  j["court"] = {{"length", cfg.court.length},
                {"width", cfg.court.width},
                {"margin", cfg.court.margin}};
  j["ball"] = {{"gravity", cfg.ball.gravity},
               {"drag_coeff", cfg.ball.drag_coeff},
               {"restitution", cfg.ball.restitution},
               {"bounce_friction", cfg.ball.bounce_friction}};
  j["launch"] = {{"speed", {cfg.launch.speed.first, cfg.launch.speed.second}},
                 {"azimuth", {cfg.launch.azimuth.first, cfg.launch.azimuth.second}},
                 {"height", {cfg.launch.height.first, cfg.launch.height.second}},
                 {"lateral", {cfg.launch.lateral.first, cfg.launch.lateral.second}},
                 {"seed", cfg.launch.seed}};
  j["gains"] = {{"k1p", cfg.gains.k1p},
                {"k1d", cfg.gains.k1d},
                {"k2p", cfg.gains.k2p},
                {"k2d", cfg.gains.k2d}};
  j["image_width"] = cfg.image_width;
  j["image_height"] = cfg.image_height;
  j["fps"] = cfg.fps;
  j["control_dt"] = cfg.control_dt;
  j["rig_pixel_noise_sigma"] = cfg.rig_pixel_noise_sigma;
  j["rig_dropout_prob"] = cfg.rig_dropout_prob;
  j["schedule_steps"] = cfg.schedule_steps;
  j["history"] = cfg.history;
  j["horizon"] = cfg.horizon;
  auto train_json = [](const nn::TrainConfig& t) {
    return json{{"learning_rate", t.learning_rate},
                {"weight_decay", t.weight_decay},
                {"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"seed", t.seed}};
  };
  j["diffusion"] = train_json(cfg.diffusion);
  j["fcr"] = train_json(cfg.fcr);
  j["ae_fcr"] = train_json(cfg.ae_fcr);
  j["success_radius"] = cfg.success_radius;
  j["max_bounces"] = cfg.max_bounces;
  j["replan_period"] = cfg.replan_period;
  j["v_max_plan"] = cfg.v_max_plan;
  j["max_duration"] = cfg.max_duration;
  j["estimator_window"] = cfg.estimator_window;
  j["extraction"] = {{"sample_rate", cfg.extraction.sample_rate},
                     {"window", cfg.extraction.window},
                     {"n_mels", cfg.extraction.n_mels},
                     {"n_coeffs", cfg.extraction.n_coeffs},
                     {"mean_shift_bandwidth", cfg.extraction.mean_shift_bandwidth},
                     {"hit", train_json(cfg.extraction.hit)}};
  return j.dump(2);
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  return fnv1a64(dump_config(cfg));
}

}  // namespace imit2d::config
