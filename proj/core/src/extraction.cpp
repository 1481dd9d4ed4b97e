#include "imit2d/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace imit2d::extraction {
namespace {

constexpr double kShiftTol = 1e-7;
constexpr int kMaxShiftIters = 500;
constexpr double kLogFloor = 1e-10;

Eigen::VectorXd flat_kernel_update(const Eigen::VectorXd& point,
                                   const std::vector<FrameFeature>& data,
                                   double bandwidth) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(point.size());
  int count = 0;
  for (const auto& f : data) {
    if ((f.vec - point).norm() <= bandwidth) {
      sum += f.vec;
      ++count;
    }
  }
  return count > 0 ? Eigen::VectorXd(sum / count) : point;
}

double mel_of_hz(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double hz_of_mel(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace

MeanShiftModel mean_shift_fit(const std::vector<FrameFeature>& features,
                              double bandwidth) {
  if (features.empty()) throw Error("mean shift needs at least one feature");
  if (!(bandwidth > 0.0)) throw Error("mean shift bandwidth must be positive");

  std::vector<Eigen::VectorXd> shifted(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) shifted[i] = features[i].vec;

  std::vector<bool> settled(features.size(), false);
  for (int iter = 0; iter < kMaxShiftIters; ++iter) {
    double max_shift = 0.0;
    for (std::size_t i = 0; i < shifted.size(); ++i) {
      if (settled[i]) continue;
      Eigen::VectorXd next = flat_kernel_update(shifted[i], features, bandwidth);
      const double shift = (next - shifted[i]).norm();
      shifted[i] = std::move(next);
      if (shift < kShiftTol) settled[i] = true;
      max_shift = std::max(max_shift, shift);
    }
    if (max_shift < kShiftTol) break;
  }

  MeanShiftModel model;
  model.bandwidth = bandwidth;
  // The first converged point of each cluster is itself a fixed point of
  // the update, so it serves directly as the mode location.
  for (const auto& point : shifted) {
    bool joined = false;
    for (const auto& mode : model.modes) {
      if ((mode - point).norm() < bandwidth / 2.0) {
        joined = true;
        break;
      }
    }
    if (!joined) model.modes.push_back(point);
  }
  return model;
}

int nearest_mode(const MeanShiftModel& model, const Eigen::VectorXd& v) {
  if (model.modes.empty()) throw Error("mean-shift model has no modes");
  int best = 0;
  double best_dist = (model.modes[0] - v).norm();
  for (std::size_t i = 1; i < model.modes.size(); ++i) {
    const double d = (model.modes[i] - v).norm();
    if (d < best_dist) {
      best_dist = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

void label_modes(MeanShiftModel& model, const std::vector<FrameFeature>& features,
                 const std::vector<FrameClass>& labels) {
  if (features.size() != labels.size()) {
    throw Error("feature and label counts differ");
  }
  std::vector<int> valid_votes(model.modes.size(), 0);
  std::vector<int> invalid_votes(model.modes.size(), 0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const int m = nearest_mode(model, features[i].vec);
    (labels[i] == FrameClass::kValid ? valid_votes[m] : invalid_votes[m])++;
  }
  model.mode_labels.resize(model.modes.size());
  for (std::size_t m = 0; m < model.modes.size(); ++m) {
    model.mode_labels[m] = valid_votes[m] >= invalid_votes[m] ? FrameClass::kValid
                                                              : FrameClass::kInvalid;
  }
}

FrameClass classify_frame(const MeanShiftModel& model, const FrameFeature& f) {
  if (model.mode_labels.size() != model.modes.size() || model.modes.empty()) {
    throw UnlabeledModel("mean-shift modes have no labels");
  }
  return model.mode_labels[static_cast<std::size_t>(nearest_mode(model, f.vec))];
}

double default_bandwidth(const std::vector<FrameFeature>& features) {
  return 0.5 * median_pairwise_distance(features);
}

double median_pairwise_distance(const std::vector<FrameFeature>& features) {
  std::vector<double> dists;
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (std::size_t j = i + 1; j < features.size(); ++j) {
      dists.push_back((features[i].vec - features[j].vec).norm());
    }
  }
  if (dists.empty()) return 1.0;
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  return dists[dists.size() / 2];
}

void fft_radix2(std::vector<std::complex<double>>& data) {
  const std::size_t n = data.size();
  if (!is_power_of_two(n)) {
    throw InvalidWindowLength("FFT size must be a power of two");
  }
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i], data[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> even = data[i + k];
        const std::complex<double> odd = data[i + k + len / 2] * w;
        data[i + k] = even + odd;
        data[i + k + len / 2] = even - odd;
        w *= wlen;
      }
    }
  }
}

Eigen::VectorXd fft_magnitude(const Eigen::VectorXd& samples) {
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(samples.size()));
  for (Eigen::Index i = 0; i < samples.size(); ++i) buf[static_cast<std::size_t>(i)] = samples(i);
  fft_radix2(buf);
  Eigen::VectorXd mag(samples.size());
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    mag(i) = std::abs(buf[static_cast<std::size_t>(i)]);
  }
  return mag;
}

Eigen::MatrixXd mel_filterbank(int n_mels, int n_fft, double sample_rate) {
  const int n_bins = n_fft / 2 + 1;
  const double mel_lo = mel_of_hz(0.0);
  const double mel_hi = mel_of_hz(sample_rate / 2.0);

  std::vector<double> centers_hz(static_cast<std::size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1);
    centers_hz[static_cast<std::size_t>(i)] = hz_of_mel(mel);
  }

  Eigen::MatrixXd bank = Eigen::MatrixXd::Zero(n_mels, n_bins);
  for (int m = 0; m < n_mels; ++m) {
    const double left = centers_hz[static_cast<std::size_t>(m)];
    const double center = centers_hz[static_cast<std::size_t>(m) + 1];
    const double right = centers_hz[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * sample_rate / n_fft;
      if (f > left && f < center) {
        bank(m, k) = (f - left) / (center - left);
      } else if (f >= center && f < right) {
        bank(m, k) = (right - f) / (right - center);
      }
    }
  }
  return bank;
}

Eigen::VectorXd mel_log_energies(const Eigen::VectorXd& window,
                                 double sample_rate, int n_mels) {
  const Eigen::Index n = window.size();
  if (!is_power_of_two(static_cast<std::size_t>(n))) {
    throw InvalidWindowLength("analysis window length must be a power of two");
  }
  Eigen::VectorXd tapered(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hann =
        0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) /
                              static_cast<double>(n - 1)));
    tapered(i) = window(i) * hann;
  }
  const Eigen::VectorXd mag = fft_magnitude(tapered);
  const Eigen::MatrixXd bank = mel_filterbank(n_mels, static_cast<int>(n), sample_rate);
  const Eigen::VectorXd energies = bank * mag.head(n / 2 + 1);
  return energies.cwiseMax(kLogFloor).array().log().matrix();
}

Eigen::VectorXd dct2(const Eigen::VectorXd& x) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      acc += x(i) * std::cos(M_PI * static_cast<double>(k) *
                             (2.0 * static_cast<double>(i) + 1.0) /
                             (2.0 * static_cast<double>(n)));
    }
    out(k) = acc;
  }
  return out;
}

Eigen::VectorXd mfcc(const Eigen::VectorXd& window, double sample_rate,
                     int n_mels, int n_coeffs) {
  if (n_coeffs > n_mels || n_coeffs < 1) {
    throw InvalidWindowLength("coefficient count must be in [1, n_mels]");
  }
  return dct2(mel_log_energies(window, sample_rate, n_mels)).head(n_coeffs);
}

double binary_cross_entropy(double hit_probability, int y) {
  const double p = std::clamp(hit_probability, 1e-12, 1.0 - 1e-12);
  return -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
}

HitClassifier train_hit_classifier(
    const std::vector<std::pair<Eigen::VectorXd, int>>& clips,
    const nn::TrainConfig& cfg) {
  if (clips.empty()) throw SingleClassDataset("empty clip dataset");
  bool has_hit = false, has_other = false;
  for (const auto& [_, y] : clips) {
    (y != 0 ? has_hit : has_other) = true;
  }
  if (!has_hit || !has_other) {
    throw SingleClassDataset("both hit and non-hit clips are required");
  }

  const int dim = static_cast<int>(clips.front().first.size());
  nn::DenseNet net = nn::make_dense_net(
      {dim, 256, 128, 2},
      {nn::Activation::kRelu, nn::Activation::kRelu, nn::Activation::kSoftmax},
      cfg.seed);
  nn::AdamState adam = nn::make_adam_state(net);

  std::mt19937_64 rng(split_seed(cfg.seed, 1));
  std::vector<std::size_t> order(clips.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  int step = 0;
  double epoch_loss = 0.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const Eigen::Index bs = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd x(bs, dim);
      std::vector<int> labels(static_cast<std::size_t>(bs));
      for (Eigen::Index r = 0; r < bs; ++r) {
        const auto& [feat, y] = clips[order[start + static_cast<std::size_t>(r)]];
        x.row(r) = feat.transpose();
        labels[static_cast<std::size_t>(r)] = y != 0 ? 1 : 0;
      }
      const nn::ForwardTrace trace = nn::forward_cached(net, x);
      auto [loss, grad] = nn::cross_entropy_loss(trace.output(), labels);
      nn::Gradients grads = nn::backward(net, trace, grad);
      nn::adam_step(net, grads, adam, cfg, ++step);
      epoch_loss += loss;
      ++batches;
    }
    epoch_loss /= std::max(1, batches);
  }
  return {std::move(net), epoch_loss};
}

double hit_probability(const HitClassifier& clf, const Eigen::VectorXd& features) {
  return nn::forward(clf.net, features)(1);
}

std::vector<std::pair<double, double>> segment_episodes(
    const std::vector<double>& hit_times, const std::vector<MaskSample>& matchplay_mask,
    const std::vector<HitSide>& side_of_hit) {
  if (hit_times.size() != side_of_hit.size()) {
    throw Error("hit time and side lists differ in length");
  }

  // A candidate is valid when every mask segment touching [t_start, t_end]
  // is valid. Segment i covers [t_i, t_{i+1}), the last one extends forever.
  auto span_is_valid = [&](double t_start, double t_end) {
    if (matchplay_mask.empty() || t_start < matchplay_mask.front().t) return false;
    for (std::size_t i = 0; i < matchplay_mask.size(); ++i) {
      const double seg_start = matchplay_mask[i].t;
      const double seg_end = i + 1 < matchplay_mask.size()
                                 ? matchplay_mask[i + 1].t
                                 : std::numeric_limits<double>::infinity();
      const bool touches = seg_start <= t_end && seg_end > t_start;
      if (touches && !matchplay_mask[i].valid) return false;
    }
    return true;
  };

  std::vector<std::pair<double, double>> episodes;
  double emitted_until = -std::numeric_limits<double>::infinity();
  double last_far = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < hit_times.size(); ++i) {
    if (side_of_hit[i] == HitSide::kFar) {
      last_far = hit_times[i];
      continue;
    }
    if (std::isnan(last_far)) continue;
    const double t_start = last_far, t_end = hit_times[i];
    if (t_start >= emitted_until && t_end > t_start && span_is_valid(t_start, t_end)) {
      episodes.emplace_back(t_start, t_end);
      emitted_until = t_end;
    }
  }
  return episodes;
}

}  // namespace imit2d::extraction
