#include "imit2d/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>

namespace imit2d::nn {
namespace {

constexpr char kMagic[8] = {'I', '2', 'D', 'N', 'E', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

void apply_activation(Activation act, Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::kLinear:
      break;
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kSoftmax:
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        Eigen::RowVectorXd row = z.row(r);
        row.array() -= row.maxCoeff();
        row = row.array().exp();
        z.row(r) = row / row.sum();
      }
      break;
  }
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("truncated network checkpoint");
  return v;
}

}  // namespace

DenseNet make_dense_net(const std::vector<int>& dims,
                        const std::vector<Activation>& activations,
                        std::uint64_t seed, bool zero_init_output) {
  if (dims.size() < 2 || activations.size() != dims.size() - 1) {
    throw DimensionMismatch("layer dims and activations are inconsistent");
  }
  std::mt19937_64 rng(seed);
  DenseNet net;
  net.rng_seed = seed;
  net.layers.resize(dims.size() - 1);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    Layer& layer = net.layers[l];
    layer.activation = activations[l];
    layer.weight.resize(out, in);
    layer.bias = Eigen::VectorXd::Zero(out);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
    }
  }
  if (zero_init_output) net.layers.back().weight.setZero();
  return net;
}

Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& x) {
  if (x.cols() != net.input_dim()) {
    throw DimensionMismatch("input width does not match the first layer");
  }
  Eigen::MatrixXd a = x;
  for (const Layer& layer : net.layers) {
    Eigen::MatrixXd z = a * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    apply_activation(layer.activation, z);
    a = std::move(z);
  }
  return a;
}

Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& x) {
  return forward(net, Eigen::MatrixXd(x.transpose())).row(0);
}

ForwardTrace forward_cached(const DenseNet& net, const Eigen::MatrixXd& x) {
  if (x.cols() != net.input_dim()) {
    throw DimensionMismatch("input width does not match the first layer");
  }
  ForwardTrace trace;
  trace.acts.reserve(net.layers.size() + 1);
  trace.acts.push_back(x);
  for (const Layer& layer : net.layers) {
    Eigen::MatrixXd z = trace.acts.back() * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    apply_activation(layer.activation, z);
    trace.acts.push_back(std::move(z));
  }
  return trace;
}

Gradients backward(const DenseNet& net, const ForwardTrace& trace,
                   const Eigen::MatrixXd& grad_output) {
  const std::size_t num_layers = net.layers.size();
  if (trace.acts.size() != num_layers + 1 ||
      grad_output.rows() != trace.acts.back().rows() ||
      grad_output.cols() != trace.acts.back().cols()) {
    throw DimensionMismatch("trace or output gradient shape mismatch");
  }

  Gradients grads;
  grads.weight.resize(num_layers);
  grads.bias.resize(num_layers);

  Eigen::MatrixXd g = grad_output;
  for (std::size_t li = num_layers; li-- > 0;) {
    const Layer& layer = net.layers[li];
    const Eigen::MatrixXd& out = trace.acts[li + 1];
    const Eigen::MatrixXd& in = trace.acts[li];

    Eigen::MatrixXd gz;
    switch (layer.activation) {
      case Activation::kLinear:
        gz = g;
        break;
      case Activation::kRelu:
        gz = g.cwiseProduct((out.array() > 0.0).cast<double>().matrix());
        break;
      case Activation::kSoftmax: {
        gz.resizeLike(g);
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const double dot = g.row(r).dot(out.row(r));
          const Eigen::RowVectorXd centered = (g.row(r).array() - dot).matrix();
          gz.row(r) = out.row(r).cwiseProduct(centered);
        }
        break;
      }
    }
    grads.weight[li] = gz.transpose() * in;
    grads.bias[li] = gz.colwise().sum();
    g = gz * layer.weight;
  }
  grads.input = std::move(g);
  return grads;
}

AdamState make_adam_state(const DenseNet& net) {
  AdamState st;
  for (const Layer& layer : net.layers) {
    st.m_w.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    st.v_w.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
    st.m_b.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    st.v_b.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
  }
  return st;
}

void adam_step(DenseNet& net, const Gradients& grads, AdamState& state,
               const TrainConfig& cfg, int t) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  if (grads.weight.size() != net.layers.size()) {
    throw DimensionMismatch("gradient layer count mismatch");
  }
  const double c1 = 1.0 - std::pow(beta1, t);
  const double c2 = 1.0 - std::pow(beta2, t);
  const double shrink = 1.0 - cfg.learning_rate * cfg.weight_decay;

  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (!grads.weight[l].allFinite() || !grads.bias[l].allFinite()) {
      throw NonFiniteGradient("non-finite gradient in layer " + std::to_string(l));
    }
    Layer& layer = net.layers[l];
    layer.weight *= shrink;

    auto& mw = state.m_w[l];
    auto& vw = state.v_w[l];
    mw = beta1 * mw + (1.0 - beta1) * grads.weight[l];
    vw = beta2 * vw + (1.0 - beta2) * grads.weight[l].cwiseProduct(grads.weight[l]);
    layer.weight.array() -=
        cfg.learning_rate * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);

    auto& mb = state.m_b[l];
    auto& vb = state.v_b[l];
    mb = beta1 * mb + (1.0 - beta1) * grads.bias[l];
    vb = beta2 * vb + (1.0 - beta2) * grads.bias[l].cwiseProduct(grads.bias[l]);
    layer.bias.array() -=
        cfg.learning_rate * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);
  }
}

std::pair<double, Eigen::MatrixXd> mse_loss(const Eigen::MatrixXd& pred,
                                            const Eigen::MatrixXd& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionMismatch("mse operands differ in shape");
  }
  const double n = static_cast<double>(pred.rows());
  const Eigen::MatrixXd diff = pred - target;
  return {diff.squaredNorm() / n, (2.0 / n) * diff};
}

std::pair<double, Eigen::MatrixXd> cross_entropy_loss(
    const Eigen::MatrixXd& probs, const std::vector<int>& labels) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size()) {
    throw DimensionMismatch("label count does not match probability rows");
  }
  const double n = static_cast<double>(probs.rows());
  double loss = 0.0;
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(probs.rows(), probs.cols());
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    const double p = std::max(probs(r, y), 1e-12);
    loss -= std::log(p) / n;
    grad(r, y) = -1.0 / (p * n);
  }
  return {loss, grad};
}

double finite_difference_check(const DenseNet& net, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& grad_output, double h,
                               int max_weights_per_layer,
                               std::uint64_t sample_seed) {
  const Eigen::MatrixXd xr = x.transpose();
  const Eigen::MatrixXd gr = grad_output.transpose();
  const Gradients analytic = backward(net, forward_cached(net, xr), gr);

  DenseNet probe = net;
  auto eval = [&]() { return gr.cwiseProduct(forward(probe, xr)).sum(); };

  double worst = 0.0;
  auto compare = [&](double analytic_g, double& param) {
    const double saved = param;
    param = saved + h;
    const double up = eval();
    param = saved - h;
    const double down = eval();
    param = saved;
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max(1e-6, std::abs(fd) + std::abs(analytic_g));
    worst = std::max(worst, std::abs(fd - analytic_g) / denom);
  };

  std::mt19937_64 rng(sample_seed);
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    Layer& layer = probe.layers[l];
    const Eigen::Index total = layer.weight.size();
    if (max_weights_per_layer < 0 || total <= max_weights_per_layer) {
      for (Eigen::Index i = 0; i < total; ++i) {
        compare(analytic.weight[l](i), layer.weight(i));
      }
    } else {
      std::uniform_int_distribution<Eigen::Index> pick(0, total - 1);
      for (int i = 0; i < max_weights_per_layer; ++i) {
        const Eigen::Index idx = pick(rng);
        compare(analytic.weight[l](idx), layer.weight(idx));
      }
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      compare(analytic.bias[l](i), layer.bias(i));
    }
  }
  return worst;
}

void save_net(const DenseNet& net, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, 1);  // format version
  write_pod<std::uint64_t>(out, net.rng_seed);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const Layer& layer : net.layers) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weight.rows()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(layer.weight.cols()));
    write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(layer.activation));
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        write_pod<double>(out, layer.weight(r, c));
      }
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      write_pod<double>(out, layer.bias(i));
    }
  }
}

DenseNet load_net(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(std::begin(magic), std::end(magic), std::begin(kMagic))) {
    throw Error("bad network checkpoint magic");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != 1) throw Error("unsupported network checkpoint version");

  DenseNet net;
  net.rng_seed = read_pod<std::uint64_t>(in);
  const auto num_layers = read_pod<std::uint32_t>(in);
  net.layers.resize(num_layers);
  for (auto& layer : net.layers) {
    const auto rows = read_pod<std::uint32_t>(in);
    const auto cols = read_pod<std::uint32_t>(in);
    layer.activation = static_cast<Activation>(read_pod<std::uint8_t>(in));
    layer.weight.resize(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) {
        layer.weight(r, c) = read_pod<double>(in);
      }
    }
    layer.bias.resize(rows);
    for (std::uint32_t i = 0; i < rows; ++i) layer.bias(i) = read_pod<double>(in);
  }
  return net;
}

void save_checkpoint(const DenseNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open checkpoint for writing: " + path);
  save_net(net, out);
}

DenseNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);
  return load_net(in);
}

}  // namespace imit2d::nn
