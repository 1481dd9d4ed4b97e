#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "imit2d/harness.hpp"
#include "imit2d/policy.hpp"

namespace imit2d::io {

// --- episode files ---
// Versioned binary record: header (fps, counts, homography, camera) then
// fixed-width little-endian 64-bit float arrays.

void save_episode(const harness::Episode& episode, const std::string& path);
harness::Episode load_episode(const std::string& path);

// episode_000123.bin naming inside a dataset directory.
std::string episode_filename(std::uint64_t id);
std::vector<harness::Episode> load_dataset(const std::string& dir);

// --- policy checkpoints ---
// Network records in the nn checkpoint format plus a schedule record and
// the normalization boxes.

enum class PolicyKind : std::uint8_t { kDiffusion = 0, kFcr = 1, kAeFcr = 2 };

struct PolicyCheckpoint {
  PolicyKind kind{PolicyKind::kDiffusion};
  policy::ConditionMode mode{policy::ConditionMode::kPost2D};
  policy::ActionSpace action{policy::ActionSpace::kImage};
  policy::Normalizer image_norm{policy::Normalizer::image_frame()};
  policy::Normalizer action_norm{policy::Normalizer::image_frame()};
  int history{32};
  int horizon{18};
  policy::NoiseSchedule schedule;  // diffusion only
  nn::DenseNet net;                // denoiser / fcr / autoencoder
  nn::DenseNet net2;               // ae-fcr regression head
};

void save_policy_checkpoint(const PolicyCheckpoint& ckpt, const std::string& path);
PolicyCheckpoint load_policy_checkpoint(const std::string& path);

// Builds the matching offline predictor.
std::unique_ptr<harness::TrajectoryPredictor> make_predictor(
    const PolicyCheckpoint& ckpt);

// --- manifests ---

struct ManifestEntry {
  std::string file;
  std::uint64_t content_hash{0};
};

struct Manifest {
  std::uint64_t config_hash{0};
  std::uint64_t seed{0};
  std::vector<ManifestEntry> entries;
};

std::uint64_t hash_file(const std::string& path);
void save_manifest(const Manifest& manifest, const std::string& path);

// Raw little-endian 16-bit mono PCM, as produced by the demo generator.
std::vector<double> load_pcm_s16le(const std::string& path);
void save_pcm_s16le(const std::vector<double>& samples, const std::string& path);

// Frame-feature datasets share the binary record style of episodes:
// magic, version, counts, then row-major doubles plus one label per row.
void save_feature_dataset(const std::vector<Eigen::VectorXd>& features,
                          const std::vector<int>& labels, const std::string& path);
void load_feature_dataset(const std::string& path,
                          std::vector<Eigen::VectorXd>& features,
                          std::vector<int>& labels);

}  // namespace imit2d::io
