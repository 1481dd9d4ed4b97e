#include "imit2d/demo.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace imit2d::demo {
namespace {

Eigen::VectorXd clipped01(Eigen::VectorXd v) {
  return v.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace

FrameStream make_frame_stream(int n_frames, int dim, std::uint64_t seed,
                              double fps) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, 0.04);
  std::uniform_int_distribution<int> run_len(20, 60);
  std::uniform_int_distribution<int> kind(0, 2);

  // One matchplay cluster and two distinct non-matchplay clusters
  // (replays, crowd shots), all inside the unit cube.
  std::vector<Eigen::VectorXd> means(3, Eigen::VectorXd::Zero(dim));
  for (int d = 0; d < dim; ++d) {
    means[0](d) = 0.30 + 0.25 * std::sin(0.7 * d);
    means[1](d) = 0.75 - 0.20 * std::cos(0.4 * d);
    means[2](d) = 0.15 + 0.10 * ((d % 3) == 0 ? 1.0 : -1.0) + 0.35;
  }

  FrameStream stream;
  stream.fps = fps;
  int frame = 0;
  bool matchplay = true;
  while (frame < n_frames) {
    const int len = run_len(rng);
    const int cluster = matchplay ? 0 : 1 + kind(rng) % 2;
    for (int i = 0; i < len && frame < n_frames; ++i, ++frame) {
      Eigen::VectorXd v = means[static_cast<std::size_t>(cluster)];
      for (int d = 0; d < dim; ++d) v(d) += jitter(rng);
      stream.features.push_back({clipped01(std::move(v))});
      stream.labels.push_back(cluster == 0 ? extraction::FrameClass::kValid
                                           : extraction::FrameClass::kInvalid);
      stream.truth_mask.push_back({frame / fps, cluster == 0});
    }
    matchplay = !matchplay;
  }
  return stream;
}

MatchAudio make_match_audio(double duration, std::uint64_t seed,
                            double sample_rate) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> gap(0.9, 1.8);

  MatchAudio audio;
  audio.sample_rate = sample_rate;
  const auto n = static_cast<std::size_t>(duration * sample_rate);
  audio.samples.resize(n);

  // Tonal background: commentary hum plus light noise.
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    audio.samples[i] = 0.06 * std::sin(2.0 * M_PI * 220.0 * t) +
                       0.04 * std::sin(2.0 * M_PI * 330.0 * t) +
                       0.005 * noise(rng);
  }

  // Impulsive broadband bursts, ~25 ms with a sharp decay.
  double t_hit = 0.8;
  bool far_side = true;
  while (t_hit < duration - 0.5) {
    audio.hit_times.push_back(t_hit);
    audio.hit_sides.push_back(far_side ? extraction::HitSide::kFar
                                       : extraction::HitSide::kNear);
    const auto start = static_cast<std::size_t>(t_hit * sample_rate);
    const auto burst = static_cast<std::size_t>(0.025 * sample_rate);
    for (std::size_t i = 0; i < burst && start + i < n; ++i) {
      const double envelope = std::exp(-static_cast<double>(i) / (0.004 * sample_rate));
      audio.samples[start + i] += 0.8 * envelope * noise(rng);
    }
    far_side = !far_side;
    t_hit += gap(rng);
  }
  return audio;
}

Eigen::VectorXd clip_features(const Eigen::VectorXd& window, double sample_rate,
                              int n_mels, int n_coeffs) {
  return extraction::mfcc(window, sample_rate, n_mels, n_coeffs);
}

std::vector<std::pair<Eigen::VectorXd, int>> make_hit_clips(
    int n, std::uint64_t seed, double sample_rate, int window, int n_mels,
    int n_coeffs) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> pitch(180.0, 500.0);
  std::uniform_real_distribution<double> level(0.5, 1.0);

  std::vector<std::pair<Eigen::VectorXd, int>> clips;
  clips.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    Eigen::VectorXd pcm(window);
    if (label == 1) {
      const double amp = level(rng);
      for (int k = 0; k < window; ++k) {
        const double envelope = std::exp(-static_cast<double>(k) / (0.004 * sample_rate));
        pcm(k) = amp * envelope * noise(rng);
      }
    } else {
      const double f0 = pitch(rng), f1 = 1.5 * pitch(rng);
      const double amp = 0.2 * level(rng);
      for (int k = 0; k < window; ++k) {
        const double t = k / sample_rate;
        pcm(k) = amp * (std::sin(2.0 * M_PI * f0 * t) +
                        0.6 * std::sin(2.0 * M_PI * f1 * t)) +
                 0.004 * noise(rng);
      }
    }
    clips.emplace_back(clip_features(pcm, sample_rate, n_mels, n_coeffs), label);
  }
  return clips;
}

}  // namespace imit2d::demo
