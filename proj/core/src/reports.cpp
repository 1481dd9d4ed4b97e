#include "imit2d/reports.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace imit2d::reports {
namespace {

std::ofstream open_or_throw(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open report file for writing: " + path);
  return out;
}

}  // namespace

void write_offline_csv(const std::vector<OfflineRow>& rows, const std::string& path) {
  auto out = open_or_throw(path);
  out << "method,condition,action,rmse,dtw,icp,jerk,windows\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.condition << ',' << r.action << ','
        << r.metrics.rmse << ',' << r.metrics.dtw << ',' << r.metrics.icp << ','
        << r.metrics.jerk << ',' << r.metrics.windows << '\n';
  }
}

void write_episode_results_csv(const std::vector<harness::EpisodeResult>& results,
                               const std::string& path) {
  auto out = open_or_throw(path);
  out << "episode_id,success,min_distance,bounces_at_min\n";
  for (const auto& r : results) {
    out << r.episode_id << ',' << (r.success ? 1 : 0) << ',' << r.min_distance
        << ',' << r.bounces_at_min << '\n';
  }
}

void write_closed_loop_json(const harness::ClosedLoopOutcome& outcome,
                            const std::string& planner_name,
                            const std::string& perception_mode,
                            const std::string& path) {
  const int n = static_cast<int>(outcome.results.size());
  const int successes = outcome.successes();
  const auto [lo, hi] = harness::wilson_interval(successes, n);

  double min_dist_sum = 0.0;
  for (const auto& r : outcome.results) min_dist_sum += r.min_distance;

  nlohmann::json j;
  j["planner"] = planner_name;
  j["perception"] = perception_mode;
  j["episodes"] = n;
  j["successes"] = successes;
  j["success_rate"] = outcome.success_rate();
  j["wilson_95_low"] = lo;
  j["wilson_95_high"] = hi;
  j["mean_min_distance"] = n > 0 ? min_dist_sum / n : 0.0;
  if (perception_mode == "live") {
    j["estimator"] = {{"solves", outcome.live.solves},
                      {"failures", outcome.live.failures},
                      {"mean_position_error", outcome.live.mean_position_error},
                      {"max_position_error", outcome.live.max_position_error}};
  }
  auto out = open_or_throw(path);
  out << j.dump(2) << "\n";
}

void write_trace_csv(const harness::EpisodeTrace& trace, const std::string& path) {
  auto out = open_or_throw(path);
  out << "t,v_cmd,omega_cmd,v_left,v_right,x,y,theta\n";
  for (const auto& tick : trace.ticks) {
    out << tick.t << ',' << tick.v_cmd << ',' << tick.omega_cmd << ','
        << tick.v_left << ',' << tick.v_right << ',' << tick.chair.x << ','
        << tick.chair.y << ',' << tick.chair.theta << '\n';
  }
}

void write_trajectory_overlay_csv(const harness::Episode& ep,
                                  const std::string& path) {
  auto out = open_or_throw(path);
  out << "t,ball_x,ball_y,ball_z,chair_x,chair_y,ball_u,ball_v,chair_u,chair_v\n";
  for (Eigen::Index i = 0; i < ep.t.size(); ++i) {
    out << ep.t(i) << ',' << ep.ball_court(i, 0) << ',' << ep.ball_court(i, 1)
        << ',' << ep.ball_court(i, 2) << ',' << ep.chair_court(i, 0) << ','
        << ep.chair_court(i, 1) << ',' << ep.ball_image(i, 0) << ','
        << ep.ball_image(i, 1) << ',' << ep.chair_image(i, 0) << ','
        << ep.chair_image(i, 1) << '\n';
  }
}

void write_launch_scatter_csv(const std::vector<harness::Episode>& episodes,
                              const std::string& path) {
  auto out = open_or_throw(path);
  out << "episode_id,launch_speed,launch_height,bounce_x,bounce_y\n";
  for (const auto& ep : episodes) {
    if (ep.t.size() == 0) continue;
    double bx = ep.ball_court(ep.t.size() - 1, 0);
    double by = ep.ball_court(ep.t.size() - 1, 1);
    for (Eigen::Index i = 0; i < ep.t.size(); ++i) {
      if (ep.ball_bounce(i) >= 1) {
        bx = ep.ball_court(i, 0);
        by = ep.ball_court(i, 1);
        break;
      }
    }
    out << ep.id << ',' << ep.ball_vel.row(0).norm() << ','
        << ep.ball_court(0, 2) << ',' << bx << ',' << by << '\n';
  }
}

}  // namespace imit2d::reports
