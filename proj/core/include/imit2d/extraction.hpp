#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "imit2d/nn.hpp"

namespace imit2d::extraction {

struct UnlabeledModel : Error {
  using Error::Error;
};
struct InvalidWindowLength : Error {
  using Error::Error;
};
struct SingleClassDataset : Error {
  using Error::Error;
};

// Preprocessed video-frame descriptor; components normalized to [0, 1].
struct FrameFeature {
  Eigen::VectorXd vec;
};

enum class FrameClass { kValid, kInvalid };

struct MeanShiftModel {
  double bandwidth{1.0};
  std::vector<Eigen::VectorXd> modes;
  std::vector<FrameClass> mode_labels;  // empty until label_modes
};

// Flat-kernel mean shift over the feature set: every point iterates to the
// centroid of its bandwidth neighborhood; converged points closer than
// bandwidth/2 collapse into one mode.
MeanShiftModel mean_shift_fit(const std::vector<FrameFeature>& features,
                              double bandwidth);

// Index of the Euclidean-nearest mode.
int nearest_mode(const MeanShiftModel& model, const Eigen::VectorXd& v);

// Majority vote of the training labels routed to each mode.
void label_modes(MeanShiftModel& model, const std::vector<FrameFeature>& features,
                 const std::vector<FrameClass>& labels);

FrameClass classify_frame(const MeanShiftModel& model, const FrameFeature& f);

// Bandwidth heuristics when none is configured: half the median
// pairwise distance keeps well-separated clusters apart.
double median_pairwise_distance(const std::vector<FrameFeature>& features);
double default_bandwidth(const std::vector<FrameFeature>& features);

// --- audio features ---

// In-place radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& data);

// Full-length |DFT| of a real window (power-of-two length).
Eigen::VectorXd fft_magnitude(const Eigen::VectorXd& samples);

// Triangular mel filterbank, n_mels x (n_fft/2 + 1), filters spanning
// [0, sample_rate/2] with centers uniform on the mel scale.
Eigen::MatrixXd mel_filterbank(int n_mels, int n_fft, double sample_rate);

// Hann window -> |DFT| -> mel filterbank -> log with a 1e-10 floor.
Eigen::VectorXd mel_log_energies(const Eigen::VectorXd& window,
                                 double sample_rate, int n_mels);

// First n_coeffs of the DCT-II of the log mel energies.
Eigen::VectorXd mfcc(const Eigen::VectorXd& window, double sample_rate,
                     int n_mels, int n_coeffs);

Eigen::VectorXd dct2(const Eigen::VectorXd& x);

// --- hit detection ---

// L = -[y log(p) + (1-y) log(1-p)] on the hit-class probability.
double binary_cross_entropy(double hit_probability, int y);

struct HitClassifier {
  nn::DenseNet net;       // feature_dim -> 256 -> 128 -> 2 softmax
  double final_loss{0.0};
};

HitClassifier train_hit_classifier(
    const std::vector<std::pair<Eigen::VectorXd, int>>& clips,
    const nn::TrainConfig& cfg);

double hit_probability(const HitClassifier& clf, const Eigen::VectorXd& features);

// --- episode segmentation ---

enum class HitSide { kFar, kNear };

// Piecewise-constant matchplay validity: sample i holds on [t_i, t_{i+1}).
struct MaskSample {
  double t{0.0};
  bool valid{false};
};

// Pairs each near-side hit with the latest preceding far-side hit and
// keeps the pair when it sits inside a valid matchplay span and does not
// overlap an already emitted episode.
std::vector<std::pair<double, double>> segment_episodes(
    const std::vector<double>& hit_times, const std::vector<MaskSample>& matchplay_mask,
    const std::vector<HitSide>& side_of_hit);

}  // namespace imit2d::extraction
