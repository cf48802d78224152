#include "pursuit/datastore.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pursuit::data {

using nlohmann::json;

bool TrajectoryRecord::operator==(const TrajectoryRecord& o) const {
  if (seed != o.seed || config_hash != o.config_hash || policy != o.policy ||
      outcome != o.outcome || !(evader_start == o.evader_start) ||
      rows.size() != o.rows.size())
    return false;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& a = rows[i];
    const auto& b = o.rows[i];
    if (a.t != b.t || !(a.evader_pos == b.evader_pos) ||
        !(a.evader_vel == b.evader_vel) || a.agent_pos != b.agent_pos ||
        a.evading != b.evading ||
        a.detections.size() != b.detections.size())
      return false;
    for (std::size_t j = 0; j < a.detections.size(); ++j) {
      const auto& da = a.detections[j];
      const auto& db = b.detections[j];
      if (da.timestep != db.timestep || da.agent != db.agent ||
          !(da.pos == db.pos) || !(da.vel == db.vel))
        return false;
    }
  }
  return true;
}

std::uint64_t env_config_hash(const world::EnvConfig& cfg) {
  std::ostringstream s;
  s.precision(17);
  s << cfg.grid << '|' << cfg.forest_fraction << '|' << cfg.terrain_seed << '|'
    << cfg.t_max << '|' << cfg.detection.v_min << '|' << cfg.detection.kappa
    << '|' << cfg.rewards.c_det << '|' << cfg.rewards.c_team << '|'
    << cfg.rewards.c_dist << '|' << cfg.hideout_eps << '|'
    << cfg.evader.max_speed << '|' << cfg.evader.w_v << '|'
    << cfg.evader.n_trigger << '|' << cfg.evader.t_evade << '|'
    << cfg.evader.dark_threshold << '|' << cfg.evader.randomize_start;
  for (const auto& a : cfg.agents)
    s << '|' << static_cast<int>(a.kind) << ',' << a.max_speed << ','
      << a.base_detect_radius << ',' << a.learnable << ',' << a.start.x << ','
      << a.start.y;
  for (const auto& h : cfg.hideouts)
    s << '|' << h.pos.x << ',' << h.pos.y << ',' << h.known_to_pursuers;
  std::uint64_t hsh = 14695981039346656037ull;
  for (char c : s.str()) {
    hsh ^= static_cast<std::uint8_t>(c);
    hsh *= 1099511628211ull;
  }
  return hsh;
}

TrajectoryRecord collect_episode(const world::EnvConfig& cfg,
                                 marl::TeamPolicy& policy, std::uint64_t seed,
                                 const std::string& policy_name) {
  world::Environment env(cfg, seed);
  policy.reset(env, seed);
  TrajectoryRecord rec;
  rec.seed = seed;
  rec.config_hash = env_config_hash(cfg);
  rec.policy = policy_name;
  rec.evader_start = env.evader_start();

  std::vector<world::Detection> last;
  while (!env.state().done) {
    auto actions = policy.act(env, last);
    world::StepResult sr = env.step(actions);
    last = sr.detections;
    TrajectoryRow row;
    row.t = env.state().t;
    row.evader_pos = env.state().evader_pos;
    row.evader_vel = env.state().evader_vel;
    row.agent_pos = env.state().agent_pos;
    row.detections = sr.detections;
    row.evading =
        env.evader_controller().mode() == evader::EvaderMode::Evade;
    rec.rows.push_back(std::move(row));
  }
  rec.outcome = env.state().outcome == world::Outcome::HideoutReached
                    ? "hideout_reached"
                    : "timeout";
  return rec;
}

std::vector<TrajectoryRecord> collect_dataset(const world::EnvConfig& cfg,
                                              const std::string& policy_name,
                                              int n_episodes,
                                              std::uint64_t base_seed) {
  std::unique_ptr<marl::TeamPolicy> policy;
  if (policy_name == "random")
    policy = marl::make_random_policy();
  else if (policy_name == "heuristic")
    policy = marl::make_heuristic_policy();
  else
    throw world::ConfigError("unknown collection policy: " + policy_name);

  std::vector<TrajectoryRecord> out;
  out.reserve(n_episodes);
  for (int e = 0; e < n_episodes; ++e)
    out.push_back(collect_episode(cfg, *policy, base_seed + e, policy_name));
  return out;
}

double aggregate_detection_rate(const std::vector<TrajectoryRecord>& records) {
  long detected = 0, total = 0;
  for (const auto& r : records)
    for (const auto& row : r.rows) {
      detected += row.detections.empty() ? 0 : 1;
      ++total;
    }
  return total == 0 ? 0.0 : static_cast<double>(detected) / total;
}

// ---------------------------------------------------------------------------
// JSONL round trip

namespace {

json vec_json(Vec2 v) { return json::array({v.x, v.y}); }
Vec2 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

void write_record(const TrajectoryRecord& rec, const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw world::ConfigError("cannot open record for write: " + path);
  json header = {{"type", "header"},
                 {"seed", rec.seed},
                 {"config_hash", rec.config_hash},
                 {"policy", rec.policy},
                 {"outcome", rec.outcome},
                 {"evader_start", vec_json(rec.evader_start)}};
  f << header.dump() << '\n';
  for (const auto& row : rec.rows) {
    json dets = json::array();
    for (const auto& d : row.detections)
      dets.push_back({{"k", d.timestep},
                      {"agent", d.agent},
                      {"pos", vec_json(d.pos)},
                      {"vel", vec_json(d.vel)}});
    json agents = json::array();
    for (Vec2 a : row.agent_pos) agents.push_back(vec_json(a));
    json r = {{"t", row.t},
              {"evader", vec_json(row.evader_pos)},
              {"evader_vel", vec_json(row.evader_vel)},
              {"agents", agents},
              {"detections", dets},
              {"evading", row.evading}};
    f << r.dump() << '\n';
  }
}

TrajectoryRecord read_record(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw world::ConfigError("cannot open record: " + path);
  TrajectoryRecord rec;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw std::runtime_error("parse error at line " +
                               std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      if (j.value("type", "") != "header")
        throw std::runtime_error("missing header at line 1 of " + path);
      rec.seed = j.at("seed").get<std::uint64_t>();
      rec.config_hash = j.at("config_hash").get<std::uint64_t>();
      rec.policy = j.at("policy").get<std::string>();
      rec.outcome = j.at("outcome").get<std::string>();
      rec.evader_start = vec_from(j.at("evader_start"));
      have_header = true;
      continue;
    }
    TrajectoryRow row;
    row.t = j.at("t").get<int>();
    row.evader_pos = vec_from(j.at("evader"));
    row.evader_vel = vec_from(j.at("evader_vel"));
    for (const auto& a : j.at("agents")) row.agent_pos.push_back(vec_from(a));
    for (const auto& d : j.at("detections"))
      row.detections.push_back({d.at("k").get<int>(), vec_from(d.at("pos")),
                                vec_from(d.at("vel")),
                                d.at("agent").get<int>()});
    row.evading = j.at("evading").get<bool>();
    rec.rows.push_back(std::move(row));
  }
  if (!have_header)
    throw std::runtime_error("empty record file: " + path);
  if (rec.rows.empty())
    throw std::runtime_error("zero-length trajectory in " + path);
  return rec;
}

// ---------------------------------------------------------------------------
// Filter dataset

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  return h;
}

}  // namespace

FilterDataset build_filter_dataset(const std::vector<TrajectoryRecord>& records,
                                   int t_max, std::uint64_t split_seed) {
  FilterDataset ds;
  for (const auto& rec : records) {
    double u = static_cast<double>(mix(rec.seed, split_seed) >> 11) /
               static_cast<double>(1ull << 53);
    auto* target = u < 0.7 ? &ds.train : (u < 0.8 ? &ds.val : &ds.eval);
    std::vector<world::Detection> log;
    for (const auto& row : rec.rows) {
      for (const auto& d : row.detections) log.push_back(d);
      filter::FilterInput in =
          filter::build_filter_input(log, row.t, rec.evader_start, t_max);
      target->push_back({in, row.evader_pos});
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string fmt4(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(4);
  s << *v;
  return s.str();
}

}  // namespace

void emit_report(const std::vector<ReportRow>& rows, const std::string& path) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw world::ConfigError("cannot open report for write: " + path);
  f << "model,detection_rate,closest_distance,reward,ll,ade,ctp,desv,rt\n";
  for (const auto& r : rows) {
    f << r.name << ',' << fmt4(r.detection_rate) << ','
      << fmt4(r.closest_distance) << ',' << fmt4(r.reward) << ',' << fmt4(r.ll)
      << ',' << fmt4(r.ade) << ',' << fmt4(r.ctp) << ',' << fmt4(r.desv) << ','
      << fmt4(r.rt) << '\n';
  }
}

}  // namespace pursuit::data
