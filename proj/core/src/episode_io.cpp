#include "imit2d/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace imit2d::io {
namespace {

static_assert(std::endian::native == std::endian::little,
              "record formats assume a little-endian host");

constexpr char kEpisodeMagic[8] = {'I', '2', 'D', 'E', 'P', 'I', '0', '1'};
constexpr char kPolicyMagic[8] = {'I', '2', 'D', 'P', 'O', 'L', '0', '1'};
constexpr char kFeatureMagic[8] = {'I', '2', 'D', 'F', 'E', 'A', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("truncated record file");
  return v;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_pod<double>(out, m(r, c));
  }
}

void read_matrix(std::istream& in, Eigen::Ref<Eigen::MatrixXd> m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_pod<double>(in);
  }
}

void write_normalizer(std::ostream& out, const policy::Normalizer& n) {
  write_pod<double>(out, n.lo.x());
  write_pod<double>(out, n.lo.y());
  write_pod<double>(out, n.hi.x());
  write_pod<double>(out, n.hi.y());
}

policy::Normalizer read_normalizer(std::istream& in) {
  policy::Normalizer n;
  n.lo.x() = read_pod<double>(in);
  n.lo.y() = read_pod<double>(in);
  n.hi.x() = read_pod<double>(in);
  n.hi.y() = read_pod<double>(in);
  return n;
}

}  // namespace

void save_episode(const harness::Episode& ep, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open episode file for writing: " + path);

  out.write(kEpisodeMagic, sizeof(kEpisodeMagic));
  write_pod<std::uint32_t>(out, 1);
  write_pod<std::uint64_t>(out, ep.id);
  write_pod<double>(out, ep.fps);
  write_pod<std::uint8_t>(out, ep.valid ? 1 : 0);
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(ep.t.size()));

  write_matrix(out, ep.homography.matrix());
  write_pod<double>(out, ep.camera.fx);
  write_pod<double>(out, ep.camera.fy);
  write_pod<double>(out, ep.camera.cx);
  write_pod<double>(out, ep.camera.cy);
  write_matrix(out, ep.camera.rotation);
  write_matrix(out, ep.camera.translation);

  // Ball rows: (t, x, y, z, vx, vy, vz, bounce_count).
  for (Eigen::Index i = 0; i < ep.t.size(); ++i) {
    write_pod<double>(out, ep.t(i));
    for (int c = 0; c < 3; ++c) write_pod<double>(out, ep.ball_court(i, c));
    for (int c = 0; c < 3; ++c) write_pod<double>(out, ep.ball_vel(i, c));
    write_pod<double>(out, static_cast<double>(ep.ball_bounce(i)));
  }
  write_matrix(out, ep.chair_court);
  write_matrix(out, ep.ball_image);
  write_matrix(out, ep.chair_image);
  if (!out) throw Error("write failed for episode file: " + path);
}

harness::Episode load_episode(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open episode file: " + path);

  char magic[sizeof(kEpisodeMagic)];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(std::begin(magic), std::end(magic),
                         std::begin(kEpisodeMagic))) {
    throw Error("bad episode file magic: " + path);
  }
  if (read_pod<std::uint32_t>(in) != 1) {
    throw Error("unsupported episode file version: " + path);
  }

  harness::Episode ep;
  ep.id = read_pod<std::uint64_t>(in);
  ep.fps = read_pod<double>(in);
  ep.valid = read_pod<std::uint8_t>(in) != 0;
  const auto n = static_cast<Eigen::Index>(read_pod<std::uint64_t>(in));

  Eigen::MatrixXd h(3, 3);
  read_matrix(in, h);
  ep.homography = geometry::Homography(h);
  ep.camera.fx = read_pod<double>(in);
  ep.camera.fy = read_pod<double>(in);
  ep.camera.cx = read_pod<double>(in);
  ep.camera.cy = read_pod<double>(in);
  Eigen::MatrixXd rot(3, 3), tr(3, 1);
  read_matrix(in, rot);
  read_matrix(in, tr);
  ep.camera.rotation = rot;
  ep.camera.translation = tr.col(0);
  geometry::validate_camera(ep.camera);

  ep.t.resize(n);
  ep.ball_court.resize(n, 3);
  ep.ball_vel.resize(n, 3);
  ep.ball_bounce.resize(n);
  ep.chair_court.resize(n, 2);
  ep.ball_image.resize(n, 2);
  ep.chair_image.resize(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    ep.t(i) = read_pod<double>(in);
    for (int c = 0; c < 3; ++c) ep.ball_court(i, c) = read_pod<double>(in);
    for (int c = 0; c < 3; ++c) ep.ball_vel(i, c) = read_pod<double>(in);
    ep.ball_bounce(i) = static_cast<int>(read_pod<double>(in));
  }
  Eigen::MatrixXd cc(n, 2), bi(n, 2), ci(n, 2);
  read_matrix(in, cc);
  read_matrix(in, bi);
  read_matrix(in, ci);
  ep.chair_court = cc;
  ep.ball_image = bi;
  ep.chair_image = ci;
  return ep;
}

std::string episode_filename(std::uint64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "episode_%06llu.bin",
                static_cast<unsigned long long>(id));
  return buf;
}

std::vector<harness::Episode> load_dataset(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("episode_") &&
        name.ends_with(".bin")) {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<harness::Episode> episodes;
  episodes.reserve(files.size());
  for (const auto& f : files) episodes.push_back(load_episode(f));
  return episodes;
}

void save_policy_checkpoint(const PolicyCheckpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open checkpoint for writing: " + path);

  out.write(kPolicyMagic, sizeof(kPolicyMagic));
  write_pod<std::uint32_t>(out, 1);
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt.kind));
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt.mode));
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(ckpt.action));
  write_pod<std::int32_t>(out, ckpt.history);
  write_pod<std::int32_t>(out, ckpt.horizon);
  write_normalizer(out, ckpt.image_norm);
  write_normalizer(out, ckpt.action_norm);

  const bool has_schedule = ckpt.kind == PolicyKind::kDiffusion;
  write_pod<std::uint8_t>(out, has_schedule ? 1 : 0);
  if (has_schedule) {
    write_pod<std::int32_t>(out, ckpt.schedule.steps);
    for (int i = 0; i < ckpt.schedule.steps; ++i) {
      write_pod<double>(out, ckpt.schedule.alpha_bar(i));
    }
    for (int i = 0; i < ckpt.schedule.steps; ++i) {
      write_pod<double>(out, ckpt.schedule.beta(i));
    }
  }

  nn::save_net(ckpt.net, out);
  const bool has_second = ckpt.kind == PolicyKind::kAeFcr;
  write_pod<std::uint8_t>(out, has_second ? 1 : 0);
  if (has_second) nn::save_net(ckpt.net2, out);
  if (!out) throw Error("write failed for checkpoint: " + path);
}

PolicyCheckpoint load_policy_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint: " + path);

  char magic[sizeof(kPolicyMagic)];
  in.read(magic, sizeof(magic));
  if (!in ||
      !std::equal(std::begin(magic), std::end(magic), std::begin(kPolicyMagic))) {
    throw Error("bad policy checkpoint magic: " + path);
  }
  if (read_pod<std::uint32_t>(in) != 1) {
    throw Error("unsupported policy checkpoint version: " + path);
  }

  PolicyCheckpoint ckpt;
  ckpt.kind = static_cast<PolicyKind>(read_pod<std::uint8_t>(in));
  ckpt.mode = static_cast<policy::ConditionMode>(read_pod<std::uint8_t>(in));
  ckpt.action = static_cast<policy::ActionSpace>(read_pod<std::uint8_t>(in));
  ckpt.history = read_pod<std::int32_t>(in);
  ckpt.horizon = read_pod<std::int32_t>(in);
  ckpt.image_norm = read_normalizer(in);
  ckpt.action_norm = read_normalizer(in);

  if (read_pod<std::uint8_t>(in) != 0) {
    ckpt.schedule.steps = read_pod<std::int32_t>(in);
    ckpt.schedule.alpha_bar.resize(ckpt.schedule.steps);
    ckpt.schedule.beta.resize(ckpt.schedule.steps);
    for (int i = 0; i < ckpt.schedule.steps; ++i) {
      ckpt.schedule.alpha_bar(i) = read_pod<double>(in);
    }
    for (int i = 0; i < ckpt.schedule.steps; ++i) {
      ckpt.schedule.beta(i) = read_pod<double>(in);
    }
  }
  ckpt.net = nn::load_net(in);
  if (read_pod<std::uint8_t>(in) != 0) ckpt.net2 = nn::load_net(in);
  return ckpt;
}

std::unique_ptr<harness::TrajectoryPredictor> make_predictor(
    const PolicyCheckpoint& ckpt) {
  switch (ckpt.kind) {
    case PolicyKind::kDiffusion: {
      policy::DiffusionConfig cfg;
      cfg.history = ckpt.history;
      cfg.horizon = ckpt.horizon;
      return std::make_unique<harness::DiffusionPredictor>(ckpt.net, ckpt.schedule,
                                                           cfg);
    }
    case PolicyKind::kFcr:
      return std::make_unique<harness::FcrPredictor>(ckpt.net);
    case PolicyKind::kAeFcr: {
      policy::AeFcr model;
      model.autoencoder = ckpt.net;
      model.head = ckpt.net2;
      return std::make_unique<harness::AeFcrPredictor>(std::move(model));
    }
  }
  throw Error("unknown policy kind in checkpoint");
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file for hashing: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    if (!in) break;
  }
  return h;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  nlohmann::json j;
  char hex[32];
  std::snprintf(hex, sizeof(hex), "%016llx",
                static_cast<unsigned long long>(manifest.config_hash));
  j["config_hash"] = hex;
  j["seed"] = manifest.seed;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(e.content_hash));
    j["entries"].push_back({{"file", e.file}, {"content_hash", hex}});
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot open manifest for writing: " + path);
  out << j.dump(2) << "\n";
}

std::vector<double> load_pcm_s16le(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open PCM file: " + path);
  std::vector<double> samples;
  std::int16_t value;
  while (in.read(reinterpret_cast<char*>(&value), sizeof(value))) {
    samples.push_back(static_cast<double>(value) / 32768.0);
  }
  return samples;
}

void save_pcm_s16le(const std::vector<double>& samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open PCM file for writing: " + path);
  for (double s : samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    const auto value = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    out.write(reinterpret_cast<const char*>(&value), sizeof(value));
  }
}

void save_feature_dataset(const std::vector<Eigen::VectorXd>& features,
                          const std::vector<int>& labels, const std::string& path) {
  if (features.size() != labels.size()) {
    throw Error("feature and label counts differ");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open feature file for writing: " + path);
  out.write(kFeatureMagic, sizeof(kFeatureMagic));
  write_pod<std::uint32_t>(out, 1);
  write_pod<std::uint64_t>(out, features.size());
  write_pod<std::uint32_t>(
      out, features.empty() ? 0 : static_cast<std::uint32_t>(features[0].size()));
  for (std::size_t i = 0; i < features.size(); ++i) {
    write_pod<std::int32_t>(out, labels[i]);
    for (Eigen::Index k = 0; k < features[i].size(); ++k) {
      write_pod<double>(out, features[i](k));
    }
  }
}

void load_feature_dataset(const std::string& path,
                          std::vector<Eigen::VectorXd>& features,
                          std::vector<int>& labels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file: " + path);
  char magic[sizeof(kFeatureMagic)];
  in.read(magic, sizeof(magic));
  if (!in ||
      !std::equal(std::begin(magic), std::end(magic), std::begin(kFeatureMagic))) {
    throw Error("bad feature file magic: " + path);
  }
  if (read_pod<std::uint32_t>(in) != 1) {
    throw Error("unsupported feature file version: " + path);
  }
  const auto count = read_pod<std::uint64_t>(in);
  const auto dim = read_pod<std::uint32_t>(in);
  features.clear();
  labels.clear();
  for (std::uint64_t i = 0; i < count; ++i) {
    labels.push_back(read_pod<std::int32_t>(in));
    Eigen::VectorXd v(dim);
    for (std::uint32_t k = 0; k < dim; ++k) v(k) = read_pod<double>(in);
    features.push_back(std::move(v));
  }
}

}  // namespace imit2d::io
