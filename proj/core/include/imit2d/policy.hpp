#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "imit2d/geometry.hpp"
#include "imit2d/nn.hpp"

namespace imit2d::policy {

struct EmptyDataset : Error {
  using Error::Error;
};

enum class ConditionMode : std::uint8_t { kPre2D = 0, kPost2D = 1 };
enum class ActionSpace : std::uint8_t { kImage = 0, kCourt = 1 };

using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2>;

// Affine map between an axis-aligned box and [-1, 1]^2.
struct Normalizer {
  Eigen::Vector2d lo{Eigen::Vector2d::Zero()};
  Eigen::Vector2d hi{Eigen::Vector2d::Ones()};

  Eigen::Vector2d to_unit(const Eigen::Vector2d& p) const {
    return 2.0 * (p - lo).cwiseQuotient(hi - lo) - Eigen::Vector2d::Ones();
  }
  Eigen::Vector2d from_unit(const Eigen::Vector2d& p) const {
    return lo + 0.5 * (p + Eigen::Vector2d::Ones()).cwiseProduct(hi - lo);
  }
  Points2 to_unit(const Points2& pts) const;
  Points2 from_unit(const Points2& pts) const;

  static Normalizer image_frame(double width = 1280.0, double height = 720.0) {
    return {{0.0, 0.0}, {width, height}};
  }
};

// One training sample: the conditioning ball window and wheelchair
// position, and the wheelchair waypoints to reproduce. All normalized.
struct Window {
  Points2 ball;             // history rows x 2
  Eigen::Vector2d chair;    // current wheelchair position
  Points2 target;           // horizon rows x 2; row 0 is the current position
  ConditionMode mode{ConditionMode::kPre2D};
};

struct IndexedWindow {
  Window window;
  int start{0};  // row of the source arrays the target begins at
};

struct WindowExtractionParams {
  int history{32};
  int horizon{18};
  int stride{1};
  ConditionMode mode{ConditionMode::kPre2D};
};

// Slides over synchronized ball/chair tracks (normalized, one row per
// frame). Ball rows outside the track are edge-replicated.
std::vector<IndexedWindow> extract_windows_indexed(
    const Points2& ball, const Points2& chair, const WindowExtractionParams& params);
std::vector<Window> extract_windows(const Points2& ball, const Points2& chair,
                                    const WindowExtractionParams& params);

// Forward-noising coefficients: alpha_bar(i) = f(i)/f(0) with
// f(i) = cos^2(((i/T + s)/(1 + s)) * pi/2), s = 0.008.
struct NoiseSchedule {
  int steps{0};
  Eigen::VectorXd alpha_bar;  // entry i-1 holds alpha_bar_i
  Eigen::VectorXd beta;       // entry i-1 holds beta_i, clipped to <= 0.999

  double alpha_bar_at(int i) const;  // alpha_bar_0 == 1
  double beta_at(int i) const;
};

NoiseSchedule build_schedule(int steps);

// tau_i = sqrt(abar) tau_0 + sqrt(1 - abar) eps
Eigen::VectorXd noised(const Eigen::VectorXd& tau0, double alpha_bar,
                       const Eigen::VectorXd& eps);

Eigen::VectorXd timestep_embedding(int step, int dim);

struct DiffusionConfig {
  int horizon{18};
  int history{32};
  int timestep_embed_dim{16};
  std::vector<int> hidden{256, 256};
  int schedule_steps{10};
};

// Flattened (row-major) condition: ball window then chair position.
Eigen::VectorXd condition_vector(const Points2& ball, const Eigen::Vector2d& chair);

// Noise-prediction MLP: [tau | condition | timestep embedding] -> eps_hat.
// The output layer starts at zero so the initial prediction is zero noise.
nn::DenseNet make_denoiser(const DiffusionConfig& cfg, std::uint64_t seed);

struct TrainResult {
  nn::DenseNet net;
  std::vector<double> loss_curve;  // per-epoch mean of |eps - eps_hat|^2
};

// Pass `warm_start` to continue training an existing denoiser (e.g. for
// a step-down learning-rate schedule).
TrainResult train_diffusion(const std::vector<Window>& dataset,
                            const NoiseSchedule& schedule,
                            const nn::TrainConfig& cfg,
                            const DiffusionConfig& model_cfg = {},
                            const nn::DenseNet* warm_start = nullptr);

struct PlanResult {
  Points2 waypoints;  // horizon x 2, denormalized
  int diffusion_steps_used{0};
  double wall_time{0.0};  // s
};

struct SampleOptions {
  std::uint64_t seed{0};
  bool zero_noise{false};  // force sigma_i = 0 (deterministic chain)
};

using DenoiserFn = std::function<Eigen::VectorXd(
    const Eigen::VectorXd& tau, int step, const Eigen::VectorXd& condition)>;

// Reverse-diffusion sampling in normalized coordinates. After every step
// the first waypoint is constrained to the (suitably noised) current
// position; the final step pins it exactly.
Eigen::VectorXd sample_plan_normalized(const DenoiserFn& denoiser,
                                       const NoiseSchedule& schedule,
                                       const Eigen::VectorXd& condition,
                                       const Eigen::Vector2d& current,
                                       int horizon, const SampleOptions& options);

// Full planner: normalizes inputs, denoises, maps back, and overwrites
// waypoint 0 with the exact conditioning position.
PlanResult sample_plan(const nn::DenseNet& denoiser, const NoiseSchedule& schedule,
                       const Points2& ball_window, const Eigen::Vector2d& current,
                       const Normalizer& norm, const SampleOptions& options,
                       const DiffusionConfig& model_cfg = {});

// --- regression baselines ---

TrainResult train_fcr(const std::vector<Window>& dataset, const nn::TrainConfig& cfg,
                      int horizon = 18, const nn::DenseNet* warm_start = nullptr);
Points2 predict_fcr(const nn::DenseNet& net, const Points2& ball_window,
                    const Eigen::Vector2d& chair);

struct AeFcr {
  nn::DenseNet autoencoder;  // ball window -> bottleneck -> reconstruction
  nn::DenseNet head;         // [bottleneck code | chair] -> waypoints
  std::vector<double> ae_loss_curve;
  std::vector<double> head_loss_curve;
};

AeFcr train_ae_fcr(const std::vector<Window>& dataset, const nn::TrainConfig& cfg,
                   int horizon = 18, int bottleneck = 8);
Eigen::VectorXd encode_ball_window(const AeFcr& model, const Points2& ball_window);
Points2 predict_ae_fcr(const AeFcr& model, const Points2& ball_window,
                       const Eigen::Vector2d& chair);

// Row-major flatten/unflatten between N x 2 waypoint blocks and vectors.
Eigen::VectorXd flatten_points(const Points2& pts);
Points2 unflatten_points(const Eigen::VectorXd& v);

}  // namespace imit2d::policy
