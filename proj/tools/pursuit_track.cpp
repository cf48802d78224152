// Command-line front end for the pursuit-track pipeline: world generation,
// trajectory collection, filter training/evaluation, MARL training/evaluation
// and micro-benchmarks. Every subcommand writes a resolved-config snapshot
// next to its outputs so a run can be reproduced bit-for-bit from the seeds.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "pursuit/datastore.hpp"
#include "pursuit/maddpg.hpp"
#include "pursuit/pmc_filter.hpp"
#include "pursuit/presets.hpp"
#include "pursuit/rollout.hpp"
#include "pursuit/terrain_world.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pursuit;

namespace {

// ---------------------------------------------------------------------------
// Config plumbing

struct RunConfig {
  std::string preset_name = "desk";
  Preset preset = desk_preset();
  std::uint64_t seed = 1;
  std::string out = "out";
  int threads = 1;
};

json env_to_json(const world::EnvConfig& e) {
  json agents = json::array();
  for (const auto& a : e.agents)
    agents.push_back({{"kind", static_cast<int>(a.kind)},
                      {"max_speed", a.max_speed},
                      {"base_detect_radius", a.base_detect_radius},
                      {"learnable", a.learnable},
                      {"start", {a.start.x, a.start.y}}});
  json hideouts = json::array();
  for (const auto& h : e.hideouts)
    hideouts.push_back(
        {{"pos", {h.pos.x, h.pos.y}}, {"known", h.known_to_pursuers}});
  return {{"grid", e.grid},
          {"forest_fraction", e.forest_fraction},
          {"terrain_seed", e.terrain_seed},
          {"t_max", e.t_max},
          {"hideout_eps", e.hideout_eps},
          {"agents", agents},
          {"hideouts", hideouts},
          {"evader",
           {{"max_speed", e.evader.max_speed},
            {"base_detect_radius", e.evader.base_detect_radius},
            {"w_v", e.evader.w_v},
            {"n_trigger", e.evader.n_trigger},
            {"t_evade", e.evader.t_evade},
            {"dark_threshold", e.evader.dark_threshold},
            {"randomize_start", e.evader.randomize_start}}},
          {"detection",
           {{"v_min", e.detection.v_min}, {"kappa", e.detection.kappa}}},
          {"rewards",
           {{"c_det", e.rewards.c_det},
            {"c_team", e.rewards.c_team},
            {"c_dist", e.rewards.c_dist}}}};
}

void env_from_json(world::EnvConfig& e, const json& j) {
  e.grid = j.value("grid", e.grid);
  e.forest_fraction = j.value("forest_fraction", e.forest_fraction);
  e.terrain_seed = j.value("terrain_seed", e.terrain_seed);
  e.t_max = j.value("t_max", e.t_max);
  e.hideout_eps = j.value("hideout_eps", e.hideout_eps);
  if (j.contains("agents")) {
    e.agents.clear();
    for (const auto& a : j.at("agents")) {
      world::AgentSpec s;
      s.kind = static_cast<world::AgentKind>(a.value("kind", 1));
      s.max_speed = a.value("max_speed", s.max_speed);
      s.base_detect_radius = a.value("base_detect_radius", s.base_detect_radius);
      s.learnable = a.value("learnable", s.learnable);
      if (a.contains("start"))
        s.start = {a.at("start").at(0).get<double>(),
                   a.at("start").at(1).get<double>()};
      e.agents.push_back(s);
    }
  }
  if (j.contains("hideouts")) {
    e.hideouts.clear();
    for (const auto& h : j.at("hideouts"))
      e.hideouts.push_back({{h.at("pos").at(0).get<double>(),
                             h.at("pos").at(1).get<double>()},
                            h.value("known", false)});
  }
  if (j.contains("evader")) {
    const json& v = j.at("evader");
    e.evader.max_speed = v.value("max_speed", e.evader.max_speed);
    e.evader.base_detect_radius =
        v.value("base_detect_radius", e.evader.base_detect_radius);
    e.evader.w_v = v.value("w_v", e.evader.w_v);
    e.evader.n_trigger = v.value("n_trigger", e.evader.n_trigger);
    e.evader.t_evade = v.value("t_evade", e.evader.t_evade);
    e.evader.dark_threshold =
        v.value("dark_threshold", e.evader.dark_threshold);
    e.evader.randomize_start =
        v.value("randomize_start", e.evader.randomize_start);
  }
  if (j.contains("detection")) {
    e.detection.v_min = j.at("detection").value("v_min", e.detection.v_min);
    e.detection.kappa = j.at("detection").value("kappa", e.detection.kappa);
  }
  if (j.contains("rewards")) {
    e.rewards.c_det = j.at("rewards").value("c_det", e.rewards.c_det);
    e.rewards.c_team = j.at("rewards").value("c_team", e.rewards.c_team);
    e.rewards.c_dist = j.at("rewards").value("c_dist", e.rewards.c_dist);
  }
}

json marl_to_json(const marl::TrainConfig& c) {
  return {{"gamma", c.gamma},
          {"tau", c.tau},
          {"lr_actor", c.lr_actor},
          {"lr_critic", c.lr_critic},
          {"noise_scale", c.noise_scale},
          {"noise_decay", c.noise_decay},
          {"buffer_capacity", c.buffer_capacity},
          {"batch", c.batch},
          {"update_interval", c.update_interval},
          {"episodes", c.episodes},
          {"actor_hidden", c.actor_hidden},
          {"critic_hidden1", c.critic_hidden1},
          {"critic_hidden2", c.critic_hidden2}};
}

void marl_from_json(marl::TrainConfig& c, const json& j) {
  c.gamma = j.value("gamma", c.gamma);
  c.tau = j.value("tau", c.tau);
  c.lr_actor = j.value("lr_actor", c.lr_actor);
  c.lr_critic = j.value("lr_critic", c.lr_critic);
  c.noise_scale = j.value("noise_scale", c.noise_scale);
  c.noise_decay = j.value("noise_decay", c.noise_decay);
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  c.batch = j.value("batch", c.batch);
  c.update_interval = j.value("update_interval", c.update_interval);
  c.episodes = j.value("episodes", c.episodes);
  c.actor_hidden = j.value("actor_hidden", c.actor_hidden);
  c.critic_hidden1 = j.value("critic_hidden1", c.critic_hidden1);
  c.critic_hidden2 = j.value("critic_hidden2", c.critic_hidden2);
}

json filter_to_json(const filter::FilterHyper& h) {
  return {{"prior_hidden", h.prior_hidden},
          {"embed", h.embed},
          {"branch_hidden", h.branch_hidden},
          {"decoder_hidden", h.decoder_hidden},
          {"lr", h.lr},
          {"batch", h.batch},
          {"max_epochs", h.max_epochs},
          {"patience", h.patience}};
}

void filter_from_json(filter::FilterHyper& h, const json& j) {
  h.prior_hidden = j.value("prior_hidden", h.prior_hidden);
  h.embed = j.value("embed", h.embed);
  h.branch_hidden = j.value("branch_hidden", h.branch_hidden);
  h.decoder_hidden = j.value("decoder_hidden", h.decoder_hidden);
  h.lr = j.value("lr", h.lr);
  h.batch = j.value("batch", h.batch);
  h.max_epochs = j.value("max_epochs", h.max_epochs);
  h.patience = j.value("patience", h.patience);
}

void apply_config_file(RunConfig& rc, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw CLI::ValidationError("--config", "cannot open " + path);
  json j = json::parse(f);
  if (j.contains("env")) env_from_json(rc.preset.env, j.at("env"));
  if (j.contains("marl")) marl_from_json(rc.preset.marl, j.at("marl"));
  if (j.contains("filter")) filter_from_json(rc.preset.filter, j.at("filter"));
  rc.preset.collect_episodes =
      j.value("collect_episodes", rc.preset.collect_episodes);
  rc.preset.eval_episodes = j.value("eval_episodes", rc.preset.eval_episodes);
  rc.seed = j.value("seed", rc.seed);
}

void write_snapshot(const RunConfig& rc, const std::string& command,
                    const json& extra) {
  fs::create_directories(rc.out);
  json snap = {{"command", command},
               {"preset", rc.preset_name},
               {"seed", rc.seed},
               {"out", rc.out},
               {"collect_episodes", rc.preset.collect_episodes},
               {"eval_episodes", rc.preset.eval_episodes},
               {"env", env_to_json(rc.preset.env)},
               {"marl", marl_to_json(rc.preset.marl)},
               {"filter", filter_to_json(rc.preset.filter)}};
  for (auto it = extra.begin(); it != extra.end(); ++it) snap[it.key()] = *it;
  std::ofstream f(rc.out + "/run_config.json", std::ios::trunc);
  f << snap.dump(2) << '\n';
}

int worker_cap() {
  if (const char* env = std::getenv("PURSUIT_TRACK_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// ---------------------------------------------------------------------------
// Dataset / checkpoint helpers

std::vector<data::TrajectoryRecord> read_records(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".jsonl")
      paths.push_back(e.path().string());
  std::sort(paths.begin(), paths.end());
  if (paths.empty())
    throw world::ConfigError("no .jsonl trajectories under " + dir);
  std::vector<data::TrajectoryRecord> recs;
  recs.reserve(paths.size());
  for (const auto& p : paths) recs.push_back(data::read_record(p));
  return recs;
}

filter::ModelKind kind_from_name(const std::string& name) {
  if (name == "pmc") return filter::ModelKind::Pmc;
  if (name == "fc") return filter::ModelKind::Fc;
  throw world::ConfigError("unknown filter model: " + name);
}

// The checkpoint sidecar records everything needed to rebuild the network.
void write_filter_sidecar(const std::string& ckpt, const std::string& kind,
                          const filter::FilterHyper& h, int t_max) {
  std::ofstream f(ckpt + ".json", std::ios::trunc);
  f << json{{"kind", kind}, {"t_max", t_max}, {"hyper", filter_to_json(h)}}
           .dump(2)
    << '\n';
}

std::unique_ptr<filter::FilterModel> load_filter(const std::string& ckpt) {
  std::ifstream f(ckpt + ".json");
  if (!f)
    throw world::ConfigError("missing checkpoint sidecar " + ckpt + ".json");
  json j = json::parse(f);
  filter::FilterHyper h;
  filter_from_json(h, j.at("hyper"));
  auto model = filter::make_model(kind_from_name(j.at("kind")), h, 0,
                                  j.at("t_max").get<int>());
  grad::load_checkpoint(model->params(), ckpt);
  return model;
}

marl::AugmentMode mode_from_name(const std::string& name) {
  if (name == "base") return marl::AugmentMode::Base;
  if (name == "detections") return marl::AugmentMode::Detections;
  if (name == "filter") return marl::AugmentMode::Filter;
  throw world::ConfigError("unknown augmentation mode: " + name);
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_gen_world(const RunConfig& rc) {
  const auto& e = rc.preset.env;
  if (e.grid < 2 || e.grid > 4096)
    throw world::ConfigError("grid size out of range: " +
                             std::to_string(e.grid));
  if (e.forest_fraction < 0 || e.forest_fraction > 1)
    throw world::ConfigError("forest_fraction must be in [0,1]");
  world::TerrainMap terr =
      world::generate_terrain(e.terrain_seed, e.grid, e.forest_fraction);
  fs::create_directories(rc.out);
  terr.write_csv(rc.out + "/terrain.csv");
  json hideouts = json::array();
  for (const auto& h : e.hideouts)
    hideouts.push_back(
        {{"pos", {h.pos.x, h.pos.y}}, {"known", h.known_to_pursuers}});
  std::ofstream(rc.out + "/hideouts.json", std::ios::trunc)
      << hideouts.dump(2) << '\n';
  write_snapshot(rc, "gen-world", {});
  std::cout << "terrain " << e.grid << "x" << e.grid << " -> " << rc.out
            << "/terrain.csv\n";
  return 0;
}

int cmd_collect(const RunConfig& rc, const std::string& policy, int episodes) {
  if (policy != "random" && policy != "heuristic")
    throw world::ConfigError("unknown collection policy: " + policy);
  int n = episodes > 0 ? episodes : rc.preset.collect_episodes;
  std::string dir = rc.out + "/data/" + policy;
  fs::create_directories(dir);

  int workers = std::min(worker_cap(), n);
  std::vector<data::TrajectoryRecord> recs(n);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (int e = w; e < n; e += workers) {
        std::uint64_t seed = rc.seed + e;
        auto team = policy == "random" ? marl::make_random_policy()
                                       : marl::make_heuristic_policy();
        recs[e] = data::collect_episode(rc.preset.env, *team, seed, policy);
      }
    });
  for (auto& t : pool) t.join();
  for (const auto& rec : recs)
    data::write_record(rec, dir + "/" + std::to_string(rec.seed) + ".jsonl");

  write_snapshot(rc, "collect", {{"policy", policy}, {"episodes", n}});
  std::cout << "collected " << n << " episodes, aggregate detection rate "
            << data::aggregate_detection_rate(recs) << "\n";
  return 0;
}

int cmd_train_filter(const RunConfig& rc, const std::string& model_name,
                     const std::string& data_dir,
                     const std::string& resume_from) {
  auto recs = read_records(data_dir);
  data::FilterDataset ds =
      data::build_filter_dataset(recs, rc.preset.env.t_max, rc.seed);
  auto model = filter::make_model(kind_from_name(model_name), rc.preset.filter,
                                  rc.seed, rc.preset.env.t_max);
  if (!resume_from.empty()) grad::load_checkpoint(model->params(), resume_from);
  filter::TrainResult tr = filter::train_filter(*model, ds.train, ds.val,
                                                rc.preset.filter, rc.seed);

  fs::create_directories(rc.out);
  std::string ckpt = rc.out + "/" + model_name + ".ckpt";
  grad::save_checkpoint(model->params(), ckpt);
  write_filter_sidecar(ckpt, model_name, rc.preset.filter, rc.preset.env.t_max);
  {
    std::ofstream f(rc.out + "/" + model_name + "_curve.csv", std::ios::trunc);
    f.precision(17);
    f << "epoch,train_nll,val_nll\n";
    for (std::size_t e = 0; e < tr.train_nll.size(); ++e)
      f << e << ',' << tr.train_nll[e] << ',' << tr.val_nll[e] << '\n';
  }
  write_snapshot(rc, "train-filter",
                 {{"model", model_name},
                  {"data", data_dir},
                  {"train_samples", ds.train.size()},
                  {"val_samples", ds.val.size()}});
  std::cout << model_name << " best epoch " << tr.best_epoch << ", val NLL "
            << tr.val_nll[tr.best_epoch] << " -> " << ckpt << "\n";
  return 0;
}

int cmd_eval_filter(const RunConfig& rc,
                    const std::vector<std::string>& checkpoints,
                    const std::string& data_dir) {
  auto recs = read_records(data_dir);
  data::FilterDataset ds =
      data::build_filter_dataset(recs, rc.preset.env.t_max, rc.seed);
  if (ds.eval.empty()) throw world::ConfigError("evaluation split is empty");
  std::vector<filter::FilterInput> in;
  std::vector<Vec2> y;
  for (const auto& s : ds.eval) {
    in.push_back(s.first);
    y.push_back(s.second);
  }

  std::vector<data::ReportRow> rows;
  for (const auto& ckpt : checkpoints) {
    auto model = load_filter(ckpt);
    std::vector<filter::MixturePrediction> preds;
    model->predict_batch(in, preds);
    data::ReportRow row;
    row.name = fs::path(ckpt).stem().string();
    row.ll = filter::metric_ll(preds, y);
    row.ade = filter::metric_ade(preds, y);
    row.ctp = filter::metric_ctp(preds, y);
    row.desv = filter::metric_desv(preds, y);
    row.rt = filter::bench_runtime(*model);
    rows.push_back(row);
  }
  fs::create_directories(rc.out + "/reports");
  data::emit_report(rows, rc.out + "/reports/filter_metrics.csv");
  write_snapshot(rc, "eval-filter",
                 {{"checkpoints", checkpoints},
                  {"data", data_dir},
                  {"eval_samples", in.size()}});
  std::cout << rows.size() << " model(s) -> " << rc.out
            << "/reports/filter_metrics.csv\n";
  return 0;
}

int cmd_train_marl(const RunConfig& rc, const std::string& mode_name,
                   const std::string& filter_ckpt) {
  marl::AugmentMode mode = mode_from_name(mode_name);
  std::unique_ptr<filter::FilterModel> fmodel;
  if (mode == marl::AugmentMode::Filter) {
    if (filter_ckpt.empty())
      throw CLI::ValidationError("--filter-ckpt",
                                 "required for --mode filter");
    fmodel = load_filter(filter_ckpt);
  }
  marl::PolicySet ps;
  marl::MarlResult res = marl::train_marl(rc.preset.env, fmodel.get(), mode,
                                          rc.preset.marl, rc.seed, ps);
  fs::create_directories(rc.out);
  std::string ckpt = rc.out + "/policy_" + mode_name + ".ckpt";
  ps.save(ckpt);
  {
    std::vector<double> speeds;
    for (const auto& a : rc.preset.env.agents)
      if (a.learnable) speeds.push_back(a.max_speed);
    std::ofstream f(ckpt + ".json", std::ios::trunc);
    f << json{{"mode", mode_name},
              {"n_agents", speeds.size()},
              {"obs_dim", ps.obs_dim},
              {"max_speeds", speeds},
              {"marl", marl_to_json(rc.preset.marl)}}
             .dump(2)
      << '\n';
  }
  {
    std::ofstream f(rc.out + "/reward_curve_" + mode_name + ".csv",
                    std::ios::trunc);
    f.precision(17);
    f << "episode,team_reward\n";
    for (std::size_t e = 0; e < res.episode_reward.size(); ++e)
      f << e << ',' << res.episode_reward[e] << '\n';
  }
  write_snapshot(rc, "train-marl",
                 {{"mode", mode_name}, {"filter_ckpt", filter_ckpt}});
  std::cout << "trained " << res.episode_reward.size() << " episodes -> "
            << ckpt << "\n";
  return 0;
}

int cmd_eval_marl(const RunConfig& rc, const std::string& contender,
                  const std::string& policy_ckpt,
                  const std::string& filter_ckpt, int episodes) {
  int n = episodes > 0 ? episodes : rc.preset.eval_episodes;
  std::unique_ptr<filter::FilterModel> fmodel;
  if (!filter_ckpt.empty()) fmodel = load_filter(filter_ckpt);

  std::unique_ptr<marl::TeamPolicy> policy;
  marl::PolicySet ps;
  if (contender == "random") {
    policy = marl::make_random_policy();
  } else if (contender == "heuristic") {
    policy = marl::make_heuristic_policy();
  } else if (contender == "pmc-highest" || contender == "pmc-search") {
    if (!fmodel)
      throw CLI::ValidationError("--filter-ckpt",
                                 "required for filter-driven policies");
    policy = contender == "pmc-highest"
                 ? marl::make_pmc_highest_prob_policy(*fmodel)
                 : marl::make_pmc_search_policy(*fmodel);
  } else if (contender == "learned") {
    if (policy_ckpt.empty())
      throw CLI::ValidationError("--policy-ckpt", "required for learned");
    std::ifstream sf(policy_ckpt + ".json");
    if (!sf)
      throw world::ConfigError("missing checkpoint sidecar " + policy_ckpt +
                               ".json");
    json j = json::parse(sf);
    marl::AugmentMode mode = mode_from_name(j.at("mode"));
    if (mode == marl::AugmentMode::Filter && !fmodel)
      throw CLI::ValidationError("--filter-ckpt",
                                 "checkpoint was trained with filter inputs");
    marl::TrainConfig mc;
    marl_from_json(mc, j.at("marl"));
    ps = marl::make_policy_set(j.at("n_agents").get<int>(),
                               j.at("obs_dim").get<int>(),
                               j.at("max_speeds").get<std::vector<double>>(),
                               mc, 0);
    ps.load(policy_ckpt);
    policy = marl::make_learned_policy(ps, mode, fmodel.get(), 0.0);
  } else {
    throw world::ConfigError("unknown contender: " + contender);
  }

  marl::EvalReport rep =
      marl::evaluate_policy(rc.preset.env, *policy, n, rc.seed);
  fs::create_directories(rc.out + "/reports");
  std::string path = rc.out + "/reports/marl_" + contender + ".csv";
  {
    std::ofstream f(path, std::ios::trunc);
    f.precision(10);
    f << "model,detection_rate_mean,detection_rate_std,closest_distance_mean,"
         "closest_distance_std,reward_mean,reward_std\n";
    f << contender << ',' << rep.mean.detection_rate << ','
      << rep.stddev.detection_rate << ',' << rep.mean.closest_distance << ','
      << rep.stddev.closest_distance << ',' << rep.episode_reward_mean << ','
      << rep.episode_reward_std << '\n';
  }
  write_snapshot(rc, "eval-marl",
                 {{"contender", contender},
                  {"policy_ckpt", policy_ckpt},
                  {"filter_ckpt", filter_ckpt},
                  {"episodes", n}});
  std::cout << contender << ": detection rate " << rep.mean.detection_rate
            << " +/- " << rep.stddev.detection_rate << " over " << n
            << " episodes -> " << path << "\n";
  return 0;
}

int cmd_bench(const RunConfig& rc) {
  fs::create_directories(rc.out);
  std::ofstream f(rc.out + "/bench.csv", std::ios::trunc);
  f.precision(10);
  f << "model,batch,seconds_per_forward\n";
  for (const std::string& name : {std::string("pmc"), std::string("fc")}) {
    auto model = filter::make_model(kind_from_name(name), rc.preset.filter,
                                    rc.seed, rc.preset.env.t_max);
    double sec = filter::bench_runtime(*model, 128);
    f << name << ",128," << sec << '\n';
    std::cout << name << ": " << sec << " s per batch-128 forward\n";
  }
  write_snapshot(rc, "bench", {});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pursuit-track: adversary search-and-tracking pipeline"};
  app.require_subcommand(1);

  RunConfig rc;
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file overriding preset");
  app.add_option("--seed", rc.seed, "base RNG seed");
  app.add_option("--out", rc.out, "output directory");
  app.add_option("--preset", rc.preset_name, "desk | paper-shape")
      ->check(CLI::IsMember({"desk", "paper-shape"}));

  auto* gen = app.add_subcommand("gen-world", "generate terrain + hideouts");

  std::string policy = "heuristic";
  int episodes = 0;
  auto* collect = app.add_subcommand("collect", "roll out scripted episodes");
  collect->add_option("--policy", policy, "random | heuristic")
      ->check(CLI::IsMember({"random", "heuristic"}));
  collect->add_option("--episodes", episodes, "episode count (preset default)");

  std::string model_name = "pmc", data_dir, resume_from;
  auto* trainf = app.add_subcommand("train-filter", "fit a mixture filter");
  trainf->add_option("--model", model_name, "pmc | fc")
      ->check(CLI::IsMember({"pmc", "fc"}));
  trainf->add_option("--data", data_dir, "trajectory directory")->required();
  trainf->add_option("--resume-from", resume_from, "checkpoint to resume");

  std::vector<std::string> checkpoints;
  std::string eval_data;
  auto* evalf = app.add_subcommand("eval-filter", "filter metrics report");
  evalf->add_option("--checkpoints", checkpoints, "filter checkpoints")
      ->required();
  evalf->add_option("--data", eval_data, "trajectory directory")->required();

  std::string mode_name = "base", filter_ckpt;
  auto* trainm = app.add_subcommand("train-marl", "train the pursuit team");
  trainm->add_option("--mode", mode_name, "base | detections | filter")
      ->check(CLI::IsMember({"base", "detections", "filter"}));
  trainm->add_option("--filter-ckpt", filter_ckpt, "frozen filter checkpoint");

  std::string contender = "heuristic", policy_ckpt, eval_filter_ckpt;
  int eval_episodes = 0;
  auto* evalm = app.add_subcommand("eval-marl", "evaluate a pursuit team");
  evalm->add_option("--contender", contender,
                    "random | heuristic | pmc-highest | pmc-search | learned");
  evalm->add_option("--policy-ckpt", policy_ckpt, "learned policy checkpoint");
  evalm->add_option("--filter-ckpt", eval_filter_ckpt, "filter checkpoint");
  evalm->add_option("--episodes", eval_episodes, "episodes (default 50)");

  auto* bench = app.add_subcommand("bench", "filter forward-pass timings");

  CLI11_PARSE(app, argc, argv);

  try {
    if (rc.preset_name == "paper-shape") rc.preset = paper_shape_preset();
    if (!config_path.empty()) apply_config_file(rc, config_path);

    if (gen->parsed()) return cmd_gen_world(rc);
    if (collect->parsed()) return cmd_collect(rc, policy, episodes);
    if (trainf->parsed())
      return cmd_train_filter(rc, model_name, data_dir, resume_from);
    if (evalf->parsed()) return cmd_eval_filter(rc, checkpoints, eval_data);
    if (trainm->parsed()) return cmd_train_marl(rc, mode_name, filter_ckpt);
    if (evalm->parsed())
      return cmd_eval_marl(rc, contender, policy_ckpt, eval_filter_ckpt,
                           eval_episodes);
    if (bench->parsed()) return cmd_bench(rc);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
