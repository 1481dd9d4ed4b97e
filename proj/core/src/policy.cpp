#include "imit2d/policy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace imit2d::policy {
namespace {

Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = gauss(rng);
  return v;
}

Eigen::Index clamp_row(Eigen::Index r, Eigen::Index n) {
  return std::clamp<Eigen::Index>(r, 0, n - 1);
}

// Shared minibatch regression loop for the MSE-trained nets.
TrainResult train_regression(const Eigen::MatrixXd& inputs,
                             const Eigen::MatrixXd& targets, nn::DenseNet net,
                             const nn::TrainConfig& cfg) {
  nn::AdamState adam = nn::make_adam_state(net);
  std::mt19937_64 rng(split_seed(cfg.seed, 7));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(inputs.rows()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);

  TrainResult result;
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const Eigen::Index bs = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd x(bs, inputs.cols());
      Eigen::MatrixXd y(bs, targets.cols());
      for (Eigen::Index r = 0; r < bs; ++r) {
        x.row(r) = inputs.row(order[start + static_cast<std::size_t>(r)]);
        y.row(r) = targets.row(order[start + static_cast<std::size_t>(r)]);
      }
      const nn::ForwardTrace trace = nn::forward_cached(net, x);
      auto [loss, grad] = nn::mse_loss(trace.output(), y);
      nn::Gradients grads = nn::backward(net, trace, grad);
      nn::adam_step(net, grads, adam, cfg, ++step);
      epoch_loss += loss;
      ++batches;
    }
    result.loss_curve.push_back(epoch_loss / std::max(1, batches));
  }
  result.net = std::move(net);
  return result;
}

}  // namespace

Points2 Normalizer::to_unit(const Points2& pts) const {
  Points2 out(pts.rows(), 2);
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    out.row(r) = to_unit(Eigen::Vector2d(pts.row(r))).transpose();
  }
  return out;
}

Points2 Normalizer::from_unit(const Points2& pts) const {
  Points2 out(pts.rows(), 2);
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    out.row(r) = from_unit(Eigen::Vector2d(pts.row(r))).transpose();
  }
  return out;
}

std::vector<IndexedWindow> extract_windows_indexed(
    const Points2& ball, const Points2& chair,
    const WindowExtractionParams& params) {
  if (ball.rows() != chair.rows()) {
    throw Error("ball and chair tracks differ in length");
  }
  const Eigen::Index n = ball.rows();
  std::vector<IndexedWindow> out;
  if (n < params.horizon) return out;

  for (Eigen::Index k = 0; k + params.horizon <= n; k += params.stride) {
    IndexedWindow iw;
    iw.start = static_cast<int>(k);
    Window& w = iw.window;
    w.mode = params.mode;
    w.ball.resize(params.history, 2);
    for (int i = 0; i < params.history; ++i) {
      // Pre: the most recent `history` observations ending at k.
      // Post: the next `history` samples after k.
      const Eigen::Index r = params.mode == ConditionMode::kPre2D
                                 ? k - (params.history - 1) + i
                                 : k + 1 + i;
      w.ball.row(i) = ball.row(clamp_row(r, n));
    }
    w.chair = chair.row(k).transpose();
    w.target = chair.middleRows(k, params.horizon);
    out.push_back(std::move(iw));
  }
  return out;
}

std::vector<Window> extract_windows(const Points2& ball, const Points2& chair,
                                    const WindowExtractionParams& params) {
  std::vector<Window> out;
  for (auto& iw : extract_windows_indexed(ball, chair, params)) {
    out.push_back(std::move(iw.window));
  }
  return out;
}

double NoiseSchedule::alpha_bar_at(int i) const {
  if (i <= 0) return 1.0;
  return alpha_bar(i - 1);
}

double NoiseSchedule::beta_at(int i) const { return beta(i - 1); }

NoiseSchedule build_schedule(int steps) {
  if (steps < 2) throw Error("noise schedule needs at least 2 steps");
  const double s = 0.008;
  auto f = [&](double i) {
    const double arg = ((i / steps + s) / (1.0 + s)) * M_PI / 2.0;
    const double c = std::cos(arg);
    return c * c;
  };
  NoiseSchedule sched;
  sched.steps = steps;
  sched.alpha_bar.resize(steps);
  sched.beta.resize(steps);
  const double f0 = f(0.0);
  double prev = 1.0;
  for (int i = 1; i <= steps; ++i) {
    const double abar = f(static_cast<double>(i)) / f0;
    sched.alpha_bar(i - 1) = abar;
    sched.beta(i - 1) = std::min(1.0 - abar / prev, 0.999);
    prev = abar;
  }
  return sched;
}

Eigen::VectorXd noised(const Eigen::VectorXd& tau0, double alpha_bar,
                       const Eigen::VectorXd& eps) {
  return std::sqrt(alpha_bar) * tau0 + std::sqrt(1.0 - alpha_bar) * eps;
}

Eigen::VectorXd timestep_embedding(int step, int dim) {
  Eigen::VectorXd emb(dim);
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    emb(2 * k) = std::sin(step * freq);
    emb(2 * k + 1) = std::cos(step * freq);
  }
  if (dim % 2 == 1) emb(dim - 1) = 0.0;
  return emb;
}

Eigen::VectorXd condition_vector(const Points2& ball, const Eigen::Vector2d& chair) {
  Eigen::VectorXd cond(ball.size() + 2);
  cond.head(ball.size()) = flatten_points(ball);
  cond.tail<2>() = chair;
  return cond;
}

nn::DenseNet make_denoiser(const DiffusionConfig& cfg, std::uint64_t seed) {
  const int tau_dim = 2 * cfg.horizon;
  const int cond_dim = 2 * cfg.history + 2;
  std::vector<int> dims{tau_dim + cond_dim + cfg.timestep_embed_dim};
  std::vector<nn::Activation> acts;
  for (int h : cfg.hidden) {
    dims.push_back(h);
    acts.push_back(nn::Activation::kRelu);
  }
  dims.push_back(tau_dim);
  acts.push_back(nn::Activation::kLinear);
  return nn::make_dense_net(dims, acts, seed, /*zero_init_output=*/true);
}

TrainResult train_diffusion(const std::vector<Window>& dataset,
                            const NoiseSchedule& schedule,
                            const nn::TrainConfig& cfg,
                            const DiffusionConfig& model_cfg,
                            const nn::DenseNet* warm_start) {
  if (dataset.empty()) throw EmptyDataset("diffusion training set is empty");

  const int tau_dim = 2 * model_cfg.horizon;
  const int cond_dim = 2 * model_cfg.history + 2;
  const int in_dim = tau_dim + cond_dim + model_cfg.timestep_embed_dim;

  nn::DenseNet net =
      warm_start != nullptr ? *warm_start : make_denoiser(model_cfg, cfg.seed);
  nn::AdamState adam = nn::make_adam_state(net);

  std::mt19937_64 rng(split_seed(cfg.seed, 11));
  std::uniform_int_distribution<int> step_dist(1, schedule.steps);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    Eigen::Index seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const Eigen::Index bs = static_cast<Eigen::Index>(end - start);

      Eigen::MatrixXd x(bs, in_dim);
      Eigen::MatrixXd eps(bs, tau_dim);
      for (Eigen::Index r = 0; r < bs; ++r) {
        const Window& w = dataset[order[start + static_cast<std::size_t>(r)]];
        const Eigen::VectorXd tau0 = flatten_points(w.target);
        const int i = step_dist(rng);
        Eigen::VectorXd noise(tau_dim);
        for (Eigen::Index d = 0; d < tau_dim; ++d) noise(d) = gauss(rng);
        const Eigen::VectorXd tau_i = noised(tau0, schedule.alpha_bar_at(i), noise);

        x.row(r).head(tau_dim) = tau_i.transpose();
        x.row(r).segment(tau_dim, cond_dim) =
            condition_vector(w.ball, w.chair).transpose();
        x.row(r).tail(model_cfg.timestep_embed_dim) =
            timestep_embedding(i, model_cfg.timestep_embed_dim).transpose();
        eps.row(r) = noise.transpose();
      }

      const nn::ForwardTrace trace = nn::forward_cached(net, x);
      const Eigen::MatrixXd diff = trace.output() - eps;
      epoch_loss += diff.squaredNorm();
      seen += bs;
      const Eigen::MatrixXd grad = (2.0 / static_cast<double>(bs)) * diff;
      nn::Gradients grads = nn::backward(net, trace, grad);
      nn::adam_step(net, grads, adam, cfg, ++step);
    }
    result.loss_curve.push_back(epoch_loss / static_cast<double>(seen));
  }
  result.net = std::move(net);
  return result;
}

Eigen::VectorXd sample_plan_normalized(const DenoiserFn& denoiser,
                                       const NoiseSchedule& schedule,
                                       const Eigen::VectorXd& condition,
                                       const Eigen::Vector2d& current,
                                       int horizon, const SampleOptions& options) {
  std::mt19937_64 rng(options.seed);
  const Eigen::Index tau_dim = 2 * horizon;
  Eigen::VectorXd tau = gaussian_vector(rng, tau_dim);

  for (int i = schedule.steps; i >= 1; --i) {
    const double abar = schedule.alpha_bar_at(i);
    const double abar_prev = schedule.alpha_bar_at(i - 1);
    const double beta = schedule.beta_at(i);
    const double alpha = 1.0 - beta;

    const Eigen::VectorXd eps_hat = denoiser(tau, i, condition);
    Eigen::VectorXd mean =
        (tau - (beta / std::sqrt(1.0 - abar)) * eps_hat) / std::sqrt(alpha);

    if (i > 1) {
      const double beta_tilde = beta * (1.0 - abar_prev) / (1.0 - abar);
      const double sigma = options.zero_noise ? 0.0 : std::sqrt(beta_tilde);
      tau = mean + sigma * gaussian_vector(rng, tau_dim);
      // Keep the first waypoint consistent with the current position at
      // this noise level.
      const double noise_scale =
          options.zero_noise ? 0.0 : std::sqrt(1.0 - abar_prev);
      std::normal_distribution<double> gauss(0.0, 1.0);
      tau(0) = std::sqrt(abar_prev) * current.x() + noise_scale * gauss(rng);
      tau(1) = std::sqrt(abar_prev) * current.y() + noise_scale * gauss(rng);
    } else {
      tau = std::move(mean);
      tau(0) = current.x();
      tau(1) = current.y();
    }
  }
  return tau;
}

PlanResult sample_plan(const nn::DenseNet& denoiser, const NoiseSchedule& schedule,
                       const Points2& ball_window, const Eigen::Vector2d& current,
                       const Normalizer& norm, const SampleOptions& options,
                       const DiffusionConfig& model_cfg) {
  const auto t_start = std::chrono::steady_clock::now();

  const Points2 ball_unit = norm.to_unit(ball_window);
  const Eigen::Vector2d current_unit = norm.to_unit(current);
  const Eigen::VectorXd condition = condition_vector(ball_unit, current_unit);

  DenoiserFn fn = [&](const Eigen::VectorXd& tau, int step,
                      const Eigen::VectorXd& cond) {
    Eigen::VectorXd input(tau.size() + cond.size() + model_cfg.timestep_embed_dim);
    input << tau, cond, timestep_embedding(step, model_cfg.timestep_embed_dim);
    return nn::forward(denoiser, input);
  };

  const Eigen::VectorXd tau = sample_plan_normalized(
      fn, schedule, condition, current_unit, model_cfg.horizon, options);

  PlanResult result;
  result.waypoints = norm.from_unit(unflatten_points(tau));
  // The first waypoint is the conditioning position, bit for bit.
  result.waypoints(0, 0) = current.x();
  result.waypoints(0, 1) = current.y();
  result.diffusion_steps_used = schedule.steps;
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
          .count();
  return result;
}

TrainResult train_fcr(const std::vector<Window>& dataset, const nn::TrainConfig& cfg,
                      int horizon, const nn::DenseNet* warm_start) {
  if (dataset.empty()) throw EmptyDataset("regression training set is empty");
  const Eigen::Index n = static_cast<Eigen::Index>(dataset.size());
  const Eigen::Index cond_dim = dataset.front().ball.size() + 2;
  Eigen::MatrixXd inputs(n, cond_dim);
  Eigen::MatrixXd targets(n, 2 * horizon);
  for (Eigen::Index r = 0; r < n; ++r) {
    const Window& w = dataset[static_cast<std::size_t>(r)];
    inputs.row(r) = condition_vector(w.ball, w.chair).transpose();
    targets.row(r) = flatten_points(w.target).transpose();
  }
  nn::DenseNet net =
      warm_start != nullptr
          ? *warm_start
          : nn::make_dense_net({static_cast<int>(cond_dim), 256, 128, 2 * horizon},
                               {nn::Activation::kRelu, nn::Activation::kRelu,
                                nn::Activation::kLinear},
                               cfg.seed);
  return train_regression(inputs, targets, std::move(net), cfg);
}

Points2 predict_fcr(const nn::DenseNet& net, const Points2& ball_window,
                    const Eigen::Vector2d& chair) {
  return unflatten_points(nn::forward(net, condition_vector(ball_window, chair)));
}

AeFcr train_ae_fcr(const std::vector<Window>& dataset, const nn::TrainConfig& cfg,
                   int horizon, int bottleneck) {
  if (dataset.empty()) throw EmptyDataset("regression training set is empty");
  const Eigen::Index n = static_cast<Eigen::Index>(dataset.size());
  const int ball_dim = static_cast<int>(dataset.front().ball.size());

  Eigen::MatrixXd ball_flat(n, ball_dim);
  for (Eigen::Index r = 0; r < n; ++r) {
    ball_flat.row(r) =
        flatten_points(dataset[static_cast<std::size_t>(r)].ball).transpose();
  }

  nn::DenseNet ae = nn::make_dense_net(
      {ball_dim, 32, bottleneck, 32, ball_dim},
      {nn::Activation::kRelu, nn::Activation::kLinear, nn::Activation::kRelu,
       nn::Activation::kLinear},
      cfg.seed);
  TrainResult ae_result = train_regression(ball_flat, ball_flat, std::move(ae), cfg);

  AeFcr model;
  model.autoencoder = std::move(ae_result.net);
  model.ae_loss_curve = std::move(ae_result.loss_curve);

  // Encoder half of the trained autoencoder feeds the regression head.
  nn::DenseNet encoder;
  encoder.layers.assign(model.autoencoder.layers.begin(),
                        model.autoencoder.layers.begin() + 2);

  Eigen::MatrixXd head_inputs(n, bottleneck + 2);
  Eigen::MatrixXd targets(n, 2 * horizon);
  const Eigen::MatrixXd codes = nn::forward(encoder, ball_flat);
  for (Eigen::Index r = 0; r < n; ++r) {
    head_inputs.row(r).head(bottleneck) = codes.row(r);
    head_inputs.row(r).tail<2>() =
        dataset[static_cast<std::size_t>(r)].chair.transpose();
    targets.row(r) =
        flatten_points(dataset[static_cast<std::size_t>(r)].target).transpose();
  }
  nn::DenseNet head = nn::make_dense_net(
      {bottleneck + 2, 256, 128, 2 * horizon},
      {nn::Activation::kRelu, nn::Activation::kRelu, nn::Activation::kLinear},
      split_seed(cfg.seed, 13));
  TrainResult head_result = train_regression(head_inputs, targets, std::move(head), cfg);
  model.head = std::move(head_result.net);
  model.head_loss_curve = std::move(head_result.loss_curve);
  return model;
}

Eigen::VectorXd encode_ball_window(const AeFcr& model, const Points2& ball_window) {
  nn::DenseNet encoder;
  encoder.layers.assign(model.autoencoder.layers.begin(),
                        model.autoencoder.layers.begin() + 2);
  return nn::forward(encoder, flatten_points(ball_window));
}

Points2 predict_ae_fcr(const AeFcr& model, const Points2& ball_window,
                       const Eigen::Vector2d& chair) {
  const Eigen::VectorXd code = encode_ball_window(model, ball_window);
  Eigen::VectorXd input(code.size() + 2);
  input << code, chair;
  return unflatten_points(nn::forward(model.head, input));
}

Eigen::VectorXd flatten_points(const Points2& pts) {
  Eigen::VectorXd v(pts.size());
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    v(2 * r) = pts(r, 0);
    v(2 * r + 1) = pts(r, 1);
  }
  return v;
}

Points2 unflatten_points(const Eigen::VectorXd& v) {
  Points2 pts(v.size() / 2, 2);
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    pts(r, 0) = v(2 * r);
    pts(r, 1) = v(2 * r + 1);
  }
  return pts;
}

}  // namespace imit2d::policy
