#pragma once

#include <cstdint>
#include <vector>

#include "imit2d/extraction.hpp"

namespace imit2d::demo {

// Synthetic stand-ins for the broadcast preprocessing outputs: a labeled
// frame-feature stream with matchplay/non-matchplay runs, and a mono PCM
// track with impulsive hit bursts over a tonal background.

struct FrameStream {
  std::vector<extraction::FrameFeature> features;
  std::vector<extraction::FrameClass> labels;
  std::vector<extraction::MaskSample> truth_mask;  // one sample per frame
  double fps{30.0};
};

FrameStream make_frame_stream(int n_frames, int dim, std::uint64_t seed,
                              double fps = 30.0);

struct MatchAudio {
  std::vector<double> samples;
  double sample_rate{16000.0};
  std::vector<double> hit_times;               // burst centers, seconds
  std::vector<extraction::HitSide> hit_sides;  // alternating far/near
};

MatchAudio make_match_audio(double duration, std::uint64_t seed,
                            double sample_rate = 16000.0);

// Labeled clip windows for classifier training: impulsive broadband
// bursts (hits) against tonal noise (everything else), described by their
// MFCC vectors.
std::vector<std::pair<Eigen::VectorXd, int>> make_hit_clips(
    int n, std::uint64_t seed, double sample_rate = 16000.0, int window = 1024,
    int n_mels = 26, int n_coeffs = 13);

// MFCC of one PCM window; the feature every audio consumer here shares.
Eigen::VectorXd clip_features(const Eigen::VectorXd& window, double sample_rate,
                              int n_mels = 26, int n_coeffs = 13);

}  // namespace imit2d::demo
