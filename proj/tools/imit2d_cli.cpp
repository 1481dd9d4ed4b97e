// imit2d command-line front end: dataset generation, policy training,
// offline / closed-loop evaluation, and the data-extraction demo.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>

#include "imit2d/config.hpp"
#include "imit2d/demo.hpp"
#include "imit2d/harness.hpp"
#include "imit2d/io.hpp"
#include "imit2d/reports.hpp"

namespace {

namespace fs = std::filesystem;
using namespace imit2d;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitData = 4;
constexpr int kExitCompat = 5;

struct CliError {
  int code;
  std::string message;
};

config::ExperimentConfig load_config_or_default(const std::string& path) {
  config::ExperimentConfig cfg;
  if (!path.empty()) cfg = config::load_config(path);
  if (const char* env_seed = std::getenv("IMIT2D_SEED")) {
    cfg.seed = std::strtoull(env_seed, nullptr, 10);
  }
  return cfg;
}

harness::DatasetParams dataset_params(const config::ExperimentConfig& cfg) {
  harness::DatasetParams params;
  params.launch = cfg.launch;
  params.ball = cfg.ball;
  params.court = cfg.court;
  params.gains = cfg.gains;
  params.fps = cfg.fps;
  params.control_dt = cfg.control_dt;
  params.v_max_plan = cfg.v_max_plan;
  params.max_duration = cfg.max_duration;
  params.success_radius = cfg.success_radius;
  params.max_bounces = cfg.max_bounces;
  params.image_width = cfg.image_width;
  params.image_height = cfg.image_height;
  params.seed = cfg.seed;
  return params;
}

std::vector<policy::Window> dataset_windows(const std::vector<harness::Episode>& episodes,
                                            const config::ExperimentConfig& cfg,
                                            policy::ConditionMode mode,
                                            policy::ActionSpace action) {
  const policy::Normalizer image = cfg.image_normalizer();
  const policy::Normalizer court = cfg.court.normalizer();
  policy::WindowExtractionParams wep;
  wep.history = cfg.history;
  wep.horizon = cfg.horizon;
  wep.mode = mode;

  std::vector<policy::Window> windows;
  for (const auto& ep : episodes) {
    if (!ep.valid) continue;
    const policy::Points2 ball = image.to_unit(ep.ball_image);
    const policy::Points2 chair = action == policy::ActionSpace::kImage
                                      ? image.to_unit(ep.chair_image)
                                      : court.to_unit(ep.chair_court);
    for (auto& w : policy::extract_windows(ball, chair, wep)) {
      windows.push_back(std::move(w));
    }
  }
  return windows;
}

void write_loss_csv(const std::vector<double>& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CliError{kExitIo, "cannot write loss curve: " + path};
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    out << i + 1 << ',' << curve[i] << '\n';
  }
}

int cmd_gen_data(const std::string& config_path, int n, const std::string& expert,
                 const std::string& out_dir, bool plots) {
  const auto cfg = load_config_or_default(config_path);
  harness::DatasetParams params = dataset_params(cfg);
  params.episodes = n;
  params.expert = expert == "teb" ? harness::ExpertKind::kTeb
                                  : harness::ExpertKind::kScripted;

  fs::create_directories(out_dir);
  harness::DatasetStats stats;
  const auto episodes = harness::generate_dataset(params, &stats);

  io::Manifest manifest;
  manifest.config_hash = config::config_hash(cfg);
  manifest.seed = cfg.seed;
  for (const auto& ep : episodes) {
    const std::string name = io::episode_filename(ep.id);
    const std::string path = (fs::path(out_dir) / name).string();
    io::save_episode(ep, path);
    manifest.entries.push_back({name, io::hash_file(path)});
  }
  io::save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());

  if (plots) {
    reports::write_launch_scatter_csv(
        episodes, (fs::path(out_dir) / "launch_scatter.csv").string());
    if (!episodes.empty()) {
      reports::write_trajectory_overlay_csv(
          episodes.front(), (fs::path(out_dir) / "overlay_episode0.csv").string());
    }
  }

  std::cout << "episodes: " << stats.episodes
            << "  expert successes: " << stats.expert_successes
            << "  in frame: " << stats.in_frame << "\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& policy_name,
              const std::string& mode_name, const std::string& data_dir,
              const std::string& out_dir, int epochs_override,
              double lr_override) {
  const auto cfg = load_config_or_default(config_path);

  const auto episodes = io::load_dataset(data_dir);
  if (episodes.empty()) throw CliError{kExitData, "dataset is empty: " + data_dir};

  policy::ConditionMode mode = policy::ConditionMode::kPost2D;
  policy::ActionSpace action = policy::ActionSpace::kImage;
  if (mode_name == "pre2d") {
    mode = policy::ConditionMode::kPre2D;
  } else if (mode_name == "tspace") {
    action = policy::ActionSpace::kCourt;
  }

  const auto windows = dataset_windows(episodes, cfg, mode, action);
  if (windows.empty()) throw CliError{kExitData, "no training windows extracted"};

  io::PolicyCheckpoint ckpt;
  ckpt.mode = mode;
  ckpt.action = action;
  ckpt.image_norm = cfg.image_normalizer();
  ckpt.action_norm = action == policy::ActionSpace::kImage
                         ? cfg.image_normalizer()
                         : cfg.court.normalizer();
  ckpt.history = cfg.history;
  ckpt.horizon = cfg.horizon;

  fs::create_directories(out_dir);
  std::vector<double> curve;

  auto apply_overrides = [&](nn::TrainConfig t) {
    if (epochs_override > 0) t.epochs = epochs_override;
    if (lr_override > 0) t.learning_rate = lr_override;
    if (t.seed == 0) t.seed = cfg.seed + 1;
    return t;
  };

  if (policy_name == "diffusion") {
    policy::DiffusionConfig dcfg;
    dcfg.history = cfg.history;
    dcfg.horizon = cfg.horizon;
    dcfg.schedule_steps = cfg.schedule_steps;
    const auto schedule = policy::build_schedule(cfg.schedule_steps);
    auto result =
        policy::train_diffusion(windows, schedule, apply_overrides(cfg.diffusion), dcfg);
    ckpt.kind = io::PolicyKind::kDiffusion;
    ckpt.schedule = schedule;
    ckpt.net = std::move(result.net);
    curve = std::move(result.loss_curve);
  } else if (policy_name == "fcr") {
    auto result = policy::train_fcr(windows, apply_overrides(cfg.fcr), cfg.horizon);
    ckpt.kind = io::PolicyKind::kFcr;
    ckpt.net = std::move(result.net);
    curve = std::move(result.loss_curve);
  } else {
    auto model = policy::train_ae_fcr(windows, apply_overrides(cfg.ae_fcr), cfg.horizon);
    ckpt.kind = io::PolicyKind::kAeFcr;
    ckpt.net = std::move(model.autoencoder);
    ckpt.net2 = std::move(model.head);
    curve = std::move(model.head_loss_curve);
  }

  io::save_policy_checkpoint(ckpt, (fs::path(out_dir) / "checkpoint.bin").string());
  write_loss_csv(curve, (fs::path(out_dir) / "loss.csv").string());
  std::cout << "trained " << policy_name << " on " << windows.size()
            << " windows; final loss " << (curve.empty() ? 0.0 : curve.back())
            << "\n";
  return kExitOk;
}

std::string mode_string(policy::ConditionMode mode) {
  return mode == policy::ConditionMode::kPre2D ? "pre2d" : "post2d";
}

std::string action_string(policy::ActionSpace action) {
  return action == policy::ActionSpace::kImage ? "image" : "court";
}

int cmd_eval(const std::string& config_path, bool offline,
             const std::string& closed_mode,
             const std::vector<std::string>& checkpoints,
             const std::string& baseline, const std::string& expect_mode,
             const std::string& data_dir, const std::string& out_dir, int stride,
             int jobs, const std::string& trace_dir) {
  const auto cfg = load_config_or_default(config_path);
  const auto episodes = io::load_dataset(data_dir);
  if (episodes.empty()) throw CliError{kExitData, "dataset is empty: " + data_dir};
  fs::create_directories(out_dir);

  std::vector<io::PolicyCheckpoint> loaded;
  for (const auto& path : checkpoints) {
    io::PolicyCheckpoint ckpt;
    try {
      ckpt = io::load_policy_checkpoint(path);
    } catch (const Error& e) {
      throw CliError{kExitCompat, e.what()};
    }
    if (!expect_mode.empty() && mode_string(ckpt.mode) != expect_mode) {
      throw CliError{kExitCompat, "checkpoint " + path + " was trained for " +
                                      mode_string(ckpt.mode) + ", not " +
                                      expect_mode};
    }
    loaded.push_back(std::move(ckpt));
  }

  if (offline) {
    std::vector<reports::OfflineRow> rows;
    for (const auto& ckpt : loaded) {
      const auto predictor = io::make_predictor(ckpt);
      harness::OfflineEvalParams params;
      params.mode = ckpt.mode;
      params.action = ckpt.action;
      params.image_norm = ckpt.image_norm;
      params.court_norm = cfg.court.normalizer();
      params.history = ckpt.history;
      params.horizon = ckpt.horizon;
      params.stride = stride;
      params.seed = cfg.seed;
      const auto metrics = harness::evaluate_offline(*predictor, episodes, params);
      rows.push_back({predictor->name(), mode_string(ckpt.mode),
                      action_string(ckpt.action), metrics});
    }
    {
      harness::OfflineEvalParams params;
      params.stride = stride;
      params.seed = cfg.seed;
      params.image_norm = cfg.image_normalizer();
      params.court_norm = cfg.court.normalizer();
      params.history = cfg.history;
      params.horizon = cfg.horizon;
      const harness::ConstantPredictor constant(cfg.horizon);
      rows.push_back({"constant", "post2d", "image",
                      harness::evaluate_offline(constant, episodes, params)});
    }
    reports::write_offline_csv(rows, (fs::path(out_dir) / "metrics.csv").string());
    std::cout << "wrote " << rows.size() << " metric rows\n";
    return kExitOk;
  }

  harness::ClosedLoopParams params;
  params.perception = closed_mode == "live" ? harness::PerceptionMode::kLive
                                            : harness::PerceptionMode::kHybrid;
  params.success_radius = cfg.success_radius;
  params.max_bounces = cfg.max_bounces;
  params.replan_period = cfg.replan_period;
  params.control_dt = cfg.control_dt;
  params.estimator_window = cfg.estimator_window;
  params.gains = cfg.gains;
  params.ball = cfg.ball;
  params.court = cfg.court;
  params.history = cfg.history;
  params.seed = cfg.seed;
  params.jobs = jobs;
  params.keep_traces = !trace_dir.empty();
  if (params.perception == harness::PerceptionMode::kLive) {
    params.rig = harness::make_wall_rig(cfg.court, cfg.rig_pixel_noise_sigma,
                                        cfg.rig_dropout_prob);
  }

  std::unique_ptr<harness::ClosedLoopPlanner> planner;
  std::string planner_name;
  if (!loaded.empty()) {
    const auto& ckpt = loaded.front();
    auto predictor = std::shared_ptr<const harness::TrajectoryPredictor>(
        io::make_predictor(ckpt));
    planner = std::make_unique<harness::ImitationPlanner>(
        predictor, ckpt.mode, ckpt.action, ckpt.image_norm, cfg.court.normalizer(),
        cfg.court, cfg.fps, cfg.replan_period);
    planner_name = predictor->name();
  } else if (baseline == "teb") {
    planner = std::make_unique<harness::TebPlanner>(cfg.court, cfg.v_max_plan,
                                                    cfg.replan_period);
    planner_name = "teb";
  } else {
    throw CliError{kExitCompat, "closed-loop eval needs --checkpoint or --baseline teb"};
  }

  const auto outcome = harness::run_closed_loop(*planner, episodes, params);
  reports::write_episode_results_csv(
      outcome.results, (fs::path(out_dir) / "episodes.csv").string());
  reports::write_closed_loop_json(outcome, planner_name, closed_mode,
                                  (fs::path(out_dir) / "summary.json").string());
  if (!trace_dir.empty()) {
    fs::create_directories(trace_dir);
    for (const auto& trace : outcome.traces) {
      reports::write_trace_csv(
          trace, (fs::path(trace_dir) /
                  ("trace_" + std::to_string(trace.episode_id) + ".csv"))
                     .string());
    }
  }
  std::cout << planner_name << " " << closed_mode << ": "
            << outcome.successes() << "/" << outcome.results.size()
            << " successes\n";
  return kExitOk;
}

int cmd_gen_demo_inputs(const std::string& config_path, const std::string& out_dir) {
  const auto cfg = load_config_or_default(config_path);
  fs::create_directories(out_dir);

  const auto stream = demo::make_frame_stream(1200, 12, cfg.seed + 5, cfg.fps);
  std::vector<Eigen::VectorXd> features;
  std::vector<int> labels;
  for (std::size_t i = 0; i < stream.features.size(); ++i) {
    features.push_back(stream.features[i].vec);
    labels.push_back(stream.labels[i] == extraction::FrameClass::kValid ? 1 : 0);
  }
  io::save_feature_dataset(features, labels,
                           (fs::path(out_dir) / "demo_frames.bin").string());

  const auto audio =
      demo::make_match_audio(24.0, cfg.seed + 6, cfg.extraction.sample_rate);
  io::save_pcm_s16le(audio.samples, (fs::path(out_dir) / "demo_audio.pcm").string());

  nlohmann::json truth;
  truth["sample_rate"] = audio.sample_rate;
  truth["fps"] = stream.fps;
  truth["hit_times"] = audio.hit_times;
  std::vector<std::string> sides;
  for (auto s : audio.hit_sides) {
    sides.push_back(s == extraction::HitSide::kFar ? "far" : "near");
  }
  truth["hit_sides"] = sides;
  auto mask = nlohmann::json::array();
  for (const auto& m : stream.truth_mask) {
    mask.push_back({{"t", m.t}, {"valid", m.valid}});
  }
  truth["mask"] = mask;
  std::ofstream out((fs::path(out_dir) / "demo_audio.pcm.truth.json").string());
  out << truth.dump(2) << "\n";

  std::cout << "wrote demo inputs to " << out_dir << "\n";
  return kExitOk;
}

int cmd_extract_demo(const std::string& config_path, const std::string& pcm_path,
                     const std::string& features_path, const std::string& out_dir) {
  const auto cfg = load_config_or_default(config_path);

  const auto pcm = io::load_pcm_s16le(pcm_path);
  if (pcm.size() < static_cast<std::size_t>(cfg.extraction.window)) {
    throw CliError{kExitIo, "PCM stream too short: " + pcm_path};
  }
  std::vector<Eigen::VectorXd> feature_vecs;
  std::vector<int> labels;
  io::load_feature_dataset(features_path, feature_vecs, labels);
  if (feature_vecs.empty()) {
    throw CliError{kExitIo, "feature file is empty: " + features_path};
  }

  nlohmann::json truth;
  {
    std::ifstream in(pcm_path + ".truth.json");
    if (!in) throw CliError{kExitIo, "missing truth sidecar for " + pcm_path};
    in >> truth;
  }
  const double sample_rate = truth.value("sample_rate", cfg.extraction.sample_rate);
  const std::vector<double> truth_hits =
      truth.at("hit_times").get<std::vector<double>>();
  std::vector<extraction::HitSide> sides;
  for (const auto& s : truth.at("hit_sides")) {
    sides.push_back(s.get<std::string>() == "far" ? extraction::HitSide::kFar
                                                  : extraction::HitSide::kNear);
  }

  // Matchplay model: fit on the first half, score on everything.
  std::vector<extraction::FrameFeature> frames;
  std::vector<extraction::FrameClass> frame_labels;
  for (std::size_t i = 0; i < feature_vecs.size(); ++i) {
    frames.push_back({feature_vecs[i]});
    frame_labels.push_back(labels[i] != 0 ? extraction::FrameClass::kValid
                                          : extraction::FrameClass::kInvalid);
  }
  std::vector<extraction::FrameFeature> train_frames(
      frames.begin(), frames.begin() + frames.size() / 2);
  std::vector<extraction::FrameClass> train_labels(
      frame_labels.begin(), frame_labels.begin() + frames.size() / 2);
  const double bandwidth =
      cfg.extraction.mean_shift_bandwidth > 0.0
          ? cfg.extraction.mean_shift_bandwidth
          : extraction::default_bandwidth(train_frames);
  auto model = extraction::mean_shift_fit(train_frames, bandwidth);
  extraction::label_modes(model, train_frames, train_labels);

  int correct = 0;
  const double fps = truth.value("fps", cfg.fps);
  std::vector<extraction::MaskSample> predicted_mask;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto predicted = extraction::classify_frame(model, frames[i]);
    if (predicted == frame_labels[i]) ++correct;
    predicted_mask.push_back(
        {static_cast<double>(i) / fps, predicted == extraction::FrameClass::kValid});
  }
  const double matchplay_accuracy = static_cast<double>(correct) / frames.size();

  // Hit classifier: clips lifted from the stream at the labeled hit times
  // plus background windows between them.
  const int window = cfg.extraction.window;
  auto window_at = [&](double t) {
    Eigen::VectorXd w(window);
    const auto start = static_cast<std::size_t>(t * sample_rate);
    for (int k = 0; k < window; ++k) {
      const std::size_t idx = start + static_cast<std::size_t>(k);
      w(k) = idx < pcm.size() ? pcm[idx] : 0.0;
    }
    return w;
  };
  std::vector<std::pair<Eigen::VectorXd, int>> clips;
  std::mt19937_64 rng(cfg.seed + 77);
  std::uniform_real_distribution<double> shift(0.3, 0.6);
  for (double t : truth_hits) {
    clips.emplace_back(demo::clip_features(window_at(t), sample_rate,
                                           cfg.extraction.n_mels,
                                           cfg.extraction.n_coeffs),
                       1);
    clips.emplace_back(demo::clip_features(window_at(t + shift(rng)), sample_rate,
                                           cfg.extraction.n_mels,
                                           cfg.extraction.n_coeffs),
                       0);
  }
  nn::TrainConfig hit_cfg = cfg.extraction.hit;
  if (hit_cfg.seed == 0) hit_cfg.seed = cfg.seed + 13;
  const auto clf = extraction::train_hit_classifier(clips, hit_cfg);

  // Scan the stream, group hot windows into events.
  const int hop = window / 4;
  std::vector<std::pair<double, double>> events;  // (time, prob)
  double last_event_t = -1.0;
  for (std::size_t start = 0; start + window <= pcm.size();
       start += static_cast<std::size_t>(hop)) {
    Eigen::VectorXd w(window);
    for (int k = 0; k < window; ++k) w(k) = pcm[start + static_cast<std::size_t>(k)];
    const double prob = extraction::hit_probability(
        clf, demo::clip_features(w, sample_rate, cfg.extraction.n_mels,
                                 cfg.extraction.n_coeffs));
    if (prob > 0.5) {
      const double t = static_cast<double>(start) / sample_rate;
      if (!events.empty() && t - last_event_t < 0.15) {
        if (prob > events.back().second) events.back() = {t, prob};
      } else {
        events.push_back({t, prob});
      }
      last_event_t = t;
    }
  }

  int matched = 0;
  for (double t : truth_hits) {
    for (const auto& [et, prob] : events) {
      if (std::abs(et - t) < 0.08) {
        ++matched;
        break;
      }
    }
  }
  const double denom = static_cast<double>(truth_hits.size() + events.size());
  const double hit_accuracy = denom > 0 ? 2.0 * matched / denom : 0.0;

  std::vector<double> event_times;
  for (const auto& [et, _] : events) event_times.push_back(et);
  std::vector<extraction::HitSide> event_sides;
  for (std::size_t i = 0; i < event_times.size(); ++i) {
    // Side labels come from the generator; align by nearest truth hit.
    std::size_t best = 0;
    for (std::size_t j = 1; j < truth_hits.size(); ++j) {
      if (std::abs(truth_hits[j] - event_times[i]) <
          std::abs(truth_hits[best] - event_times[i])) {
        best = j;
      }
    }
    event_sides.push_back(sides.empty() ? extraction::HitSide::kFar : sides[best]);
  }
  const auto segments =
      extraction::segment_episodes(event_times, predicted_mask, event_sides);

  fs::create_directories(out_dir);
  nlohmann::json report;
  report["matchplay_accuracy"] = matchplay_accuracy;
  report["hit_accuracy"] = hit_accuracy;
  report["hits_detected"] = events.size();
  report["hits_truth"] = truth_hits.size();
  report["episodes"] = nlohmann::json::array();
  for (const auto& [a, b] : segments) {
    report["episodes"].push_back({{"t_start", a}, {"t_end", b}});
  }
  std::ofstream out((fs::path(out_dir) / "extraction_report.json").string());
  out << report.dump(2) << "\n";
  std::cout << "matchplay accuracy " << matchplay_accuracy << ", hit accuracy "
            << hit_accuracy << ", " << segments.size() << " episodes\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image-space imitation planning toolkit"};
  app.require_subcommand(1);

  std::string workdir;
  app.add_option("--workdir", workdir, "Base directory for relative paths");

  std::string config_path;
  app.add_option("--config", config_path, "Experiment config (JSON)");

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic episode dataset");
  int gen_n = 100;
  std::string gen_expert = "scripted";
  std::string gen_out = "dataset";
  bool gen_plots = false;
  gen->add_option("--n", gen_n, "Number of episodes");
  gen->add_option("--expert", gen_expert, "Data-generating expert")
      ->check(CLI::IsMember({"scripted", "teb"}));
  gen->add_option("--out", gen_out, "Output directory");
  gen->add_flag("--plots", gen_plots, "Also write plot CSV series");

  auto* train = app.add_subcommand("train", "Train an imitation policy");
  std::string train_policy = "diffusion";
  std::string train_mode = "post2d";
  std::string train_data = "dataset";
  std::string train_out = "checkpoint";
  int train_epochs = 0;
  double train_lr = 0.0;
  train->add_option("--policy", train_policy, "Policy family")
      ->check(CLI::IsMember({"diffusion", "fcr", "ae-fcr"}));
  train->add_option("--mode", train_mode, "Conditioning / action mode")
      ->check(CLI::IsMember({"pre2d", "post2d", "tspace"}));
  train->add_option("--data", train_data, "Dataset directory");
  train->add_option("--out", train_out, "Checkpoint output directory");
  train->add_option("--epochs", train_epochs, "Override the configured epochs");
  train->add_option("--lr", train_lr, "Override the configured learning rate");

  auto* eval = app.add_subcommand("eval", "Evaluate a policy");
  bool eval_offline = false;
  std::string eval_closed;
  std::vector<std::string> eval_ckpts;
  std::string eval_baseline;
  std::string eval_mode_expect;
  std::string eval_data = "dataset";
  std::string eval_out = "results";
  std::string eval_trace_dir;
  int eval_stride = 1;
  int eval_jobs = 1;
  eval->add_flag("--offline", eval_offline, "Offline window metrics");
  eval->add_option("--closed-loop", eval_closed, "Closed-loop perception mode")
      ->check(CLI::IsMember({"hybrid", "live"}));
  eval->add_option("--checkpoint", eval_ckpts, "Policy checkpoint(s)");
  eval->add_option("--baseline", eval_baseline, "Non-learning baseline")
      ->check(CLI::IsMember({"teb"}));
  eval->add_option("--mode", eval_mode_expect,
                   "Require the checkpoint to match this conditioning mode");
  eval->add_option("--data", eval_data, "Dataset directory");
  eval->add_option("--out", eval_out, "Report output directory");
  eval->add_option("--stride", eval_stride, "Offline window stride");
  eval->add_option("--jobs", eval_jobs, "Worker threads for closed-loop runs");
  eval->add_option("--trace-dir", eval_trace_dir, "Write per-episode control traces");

  auto* extract = app.add_subcommand(
      "extract-demo", "Run the data-extraction models on synthetic streams");
  std::string demo_pcm, demo_features;
  std::string demo_out = "extraction";
  extract->add_option("--pcm", demo_pcm, "Raw s16le mono PCM stream")->required();
  extract->add_option("--features", demo_features, "Frame-feature dataset")
      ->required();
  extract->add_option("--out", demo_out, "Report output directory");

  auto* gendemo = app.add_subcommand(
      "gen-demo-inputs", "Write synthetic inputs for extract-demo");
  std::string gendemo_out = "demo";
  gendemo->add_option("--out", gendemo_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (!workdir.empty()) {
      std::error_code ec;
      std::filesystem::current_path(workdir, ec);
      if (ec) throw CliError{kExitIo, "cannot enter workdir: " + workdir};
    }
    if (gen->parsed()) {
      return cmd_gen_data(config_path, gen_n, gen_expert, gen_out, gen_plots);
    }
    if (train->parsed()) {
      return cmd_train(config_path, train_policy, train_mode, train_data,
                       train_out, train_epochs, train_lr);
    }
    if (eval->parsed()) {
      if (!eval_offline && eval_closed.empty()) {
        throw CliError{kExitConfig, "eval needs --offline or --closed-loop"};
      }
      return cmd_eval(config_path, eval_offline, eval_closed, eval_ckpts,
                      eval_baseline, eval_mode_expect, eval_data, eval_out,
                      eval_stride, eval_jobs, eval_trace_dir);
    }
    if (extract->parsed()) {
      return cmd_extract_demo(config_path, demo_pcm, demo_features, demo_out);
    }
    if (gendemo->parsed()) {
      return cmd_gen_demo_inputs(config_path, gendemo_out);
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const config::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const harness::CheckpointMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCompat;
  } catch (const policy::EmptyDataset& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const harness::NoValidWindows& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
