#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "imit2d/common.hpp"

namespace imit2d::nn {

struct DimensionMismatch : Error {
  using Error::Error;
};
struct NonFiniteGradient : Error {
  using Error::Error;
};

enum class Activation : std::uint8_t { kLinear = 0, kRelu = 1, kSoftmax = 2 };

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation{Activation::kLinear};
};

struct DenseNet {
  std::vector<Layer> layers;
  std::uint64_t rng_seed{0};

  int input_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
  }
  int output_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
  }
};

struct TrainConfig {
  double learning_rate{1e-3};
  double weight_decay{0.0};
  int epochs{1};
  int batch_size{64};
  std::uint64_t seed{0};
};

// Xavier-uniform weights, zero biases, seeded. `zero_init_output` clears
// the final layer so the net starts as the zero function.
DenseNet make_dense_net(const std::vector<int>& dims,
                        const std::vector<Activation>& activations,
                        std::uint64_t seed, bool zero_init_output = false);

// Rows are samples. Softmax is applied row-wise.
Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& x);
Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& x);

struct ForwardTrace {
  // acts[0] is the input, acts[l+1] the output of layer l.
  std::vector<Eigen::MatrixXd> acts;
  const Eigen::MatrixXd& output() const { return acts.back(); }
};

ForwardTrace forward_cached(const DenseNet& net, const Eigen::MatrixXd& x);

struct Gradients {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;
  Eigen::MatrixXd input;  // dL/dx, same shape as the forward input
};

// Reverse-mode gradients of sum_{samples} grad_output . f(x) through the
// cached forward pass; exact up to floating point.
Gradients backward(const DenseNet& net, const ForwardTrace& trace,
                   const Eigen::MatrixXd& grad_output);

struct AdamState {
  std::vector<Eigen::MatrixXd> m_w, v_w;
  std::vector<Eigen::VectorXd> m_b, v_b;
};

AdamState make_adam_state(const DenseNet& net);

// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8); weight
// decay is decoupled and multiplicative on weights only. `t` is 1-based.
void adam_step(DenseNet& net, const Gradients& grads, AdamState& state,
               const TrainConfig& cfg, int t);

// Mean over rows of the squared L2 gap; gradient is w.r.t. pred.
std::pair<double, Eigen::MatrixXd> mse_loss(const Eigen::MatrixXd& pred,
                                            const Eigen::MatrixXd& target);

// Mean negative log-likelihood of integer labels under row-wise class
// probabilities; gradient is w.r.t. the probabilities.
std::pair<double, Eigen::MatrixXd> cross_entropy_loss(
    const Eigen::MatrixXd& probs, const std::vector<int>& labels);

// Max relative disagreement between backward() and central finite
// differences of grad_output . f(x). Checks every bias; checks every
// weight when max_weights_per_layer < 0, otherwise a seeded sample.
double finite_difference_check(const DenseNet& net, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& grad_output,
                               double h = 1e-5,
                               int max_weights_per_layer = -1,
                               std::uint64_t sample_seed = 0);

void save_net(const DenseNet& net, std::ostream& out);
DenseNet load_net(std::istream& in);
void save_checkpoint(const DenseNet& net, const std::string& path);
DenseNet load_checkpoint(const std::string& path);

}  // namespace imit2d::nn
