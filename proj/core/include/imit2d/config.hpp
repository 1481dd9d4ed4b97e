#pragma once

#include <cstdint>
#include <string>

#include "imit2d/harness.hpp"
#include "imit2d/nn.hpp"

namespace imit2d::config {

struct ConfigError : Error {
  using Error::Error;
};

struct ExtractionConfig {
  double sample_rate{16000.0};
  int window{1024};
  int n_mels{26};
  int n_coeffs{13};
  double mean_shift_bandwidth{0.0};  // 0 = median pairwise heuristic
  nn::TrainConfig hit{0.001, 0.0, 60, 64, 0};
};

// Every tunable of the pipeline in one validated record. Defaults follow
// the published training tables where those exist and the declared
// simulation defaults elsewhere.
struct ExperimentConfig {
  int schema_version{1};
  std::uint64_t seed{0};

  harness::CourtGeometry court;
  dynamics::BallParams ball;
  harness::LaunchDistribution launch;
  control::PDGains gains;

  double image_width{1280.0};
  double image_height{720.0};
  double fps{30.0};
  double control_dt{dynamics::kControlDt};

  double rig_pixel_noise_sigma{1.0};
  double rig_dropout_prob{0.05};

  int schedule_steps{10};
  int history{32};
  int horizon{18};

  nn::TrainConfig diffusion{2e-5, 0.0, 1000, 64, 0};
  nn::TrainConfig fcr{1e-3, 0.0, 1000, 64, 0};
  nn::TrainConfig ae_fcr{1e-3, 0.75, 500, 64, 0};

  double success_radius{1.4};
  int max_bounces{3};
  double replan_period{0.2};
  double v_max_plan{4.0};
  double max_duration{4.0};
  double estimator_window{0.3};

  ExtractionConfig extraction;

  policy::Normalizer image_normalizer() const {
    return policy::Normalizer::image_frame(image_width, image_height);
  }
};

// Strict load: unknown keys are rejected with the offending key named;
// domain constraints are checked after parsing.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

// Canonical serialization (sorted keys); also the input to config_hash.
std::string dump_config(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace imit2d::config
