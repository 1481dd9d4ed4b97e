#pragma once

#include <string>
#include <vector>

#include "imit2d/harness.hpp"

namespace imit2d::reports {

// One row of the offline benchmarking table.
struct OfflineRow {
  std::string method;
  std::string condition;  // "pre2d" / "post2d"
  std::string action;     // "image" / "court"
  harness::OfflineMetrics metrics;
};

// CSV with columns method,condition,action,rmse,dtw,icp,jerk,windows.
void write_offline_csv(const std::vector<OfflineRow>& rows, const std::string& path);

// Per-episode closed-loop CSV: id,success,min_distance,bounces_at_min.
void write_episode_results_csv(const std::vector<harness::EpisodeResult>& results,
                               const std::string& path);

// JSON summary: successes, rate, Wilson interval, distance stats, and the
// estimator statistics when the run used live perception.
void write_closed_loop_json(const harness::ClosedLoopOutcome& outcome,
                            const std::string& planner_name,
                            const std::string& perception_mode,
                            const std::string& path);

// Control trace rows (t, v_cmd, omega_cmd, v_l, v_r, pose).
void write_trace_csv(const harness::EpisodeTrace& trace, const std::string& path);

// Plot series: recorded court-frame trajectories of one episode.
void write_trajectory_overlay_csv(const harness::Episode& episode,
                                  const std::string& path);

// Plot series: landing point (first bounce) and launch parameters per episode.
void write_launch_scatter_csv(const std::vector<harness::Episode>& episodes,
                              const std::string& path);

}  // namespace imit2d::reports
