#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pursuit/pmc_filter.hpp"
#include "pursuit/rollout.hpp"

namespace pursuit::data {

struct TrajectoryRow {
  int t = 0;
  Vec2 evader_pos;
  Vec2 evader_vel;
  std::vector<Vec2> agent_pos;
  std::vector<world::Detection> detections;
  bool evading = false;
};

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string policy;
  std::string outcome;
  Vec2 evader_start;
  std::vector<TrajectoryRow> rows;

  bool operator==(const TrajectoryRecord&) const;
};

std::uint64_t env_config_hash(const world::EnvConfig& cfg);

TrajectoryRecord collect_episode(const world::EnvConfig& cfg,
                                 marl::TeamPolicy& policy, std::uint64_t seed,
                                 const std::string& policy_name);

// n_episodes rollouts with the given scripted policy, seeds base..base+n-1.
std::vector<TrajectoryRecord> collect_dataset(const world::EnvConfig& cfg,
                                              const std::string& policy_name,
                                              int n_episodes,
                                              std::uint64_t base_seed);

double aggregate_detection_rate(const std::vector<TrajectoryRecord>& records);

// JSON Lines, header object first then one object per timestep row.
void write_record(const TrajectoryRecord& rec, const std::string& path);
TrajectoryRecord read_record(const std::string& path);

struct FilterDataset {
  std::vector<filter::Sample> train;
  std::vector<filter::Sample> val;
  std::vector<filter::Sample> eval;
};

// One (input, target) pair per timestep; 70/10/20 split at trajectory
// granularity, a pure function of (trajectory seed, split_seed).
FilterDataset build_filter_dataset(const std::vector<TrajectoryRecord>& records,
                                   int t_max, std::uint64_t split_seed = 0);

struct ReportRow {
  std::string name;
  std::optional<double> detection_rate, closest_distance, reward;
  std::optional<double> ll, ade, ctp, desv, rt;
};

// Fixed column order, 4 significant digits, empty cells where a metric does
// not apply.
void emit_report(const std::vector<ReportRow>& rows, const std::string& path);

}  // namespace pursuit::data
