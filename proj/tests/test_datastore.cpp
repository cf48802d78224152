#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pursuit/datastore.hpp"

using namespace pursuit;
using namespace pursuit::data;

namespace {

world::EnvConfig tiny_env() {
  world::EnvConfig cfg = world::EnvConfig::defaults();
  cfg.grid = 16;
  cfg.t_max = 40;
  return cfg;
}

struct TempFile {
  std::string path;
  explicit TempFile(std::string p) : path(std::move(p)) {}
  ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("env_config_hash tracks every field that shapes an episode") {
  world::EnvConfig a = tiny_env();
  world::EnvConfig b = a;
  CHECK(env_config_hash(a) == env_config_hash(b));
  b.t_max += 1;
  CHECK(env_config_hash(a) != env_config_hash(b));
  b = a;
  b.agents[0].max_speed *= 2;
  CHECK(env_config_hash(a) != env_config_hash(b));
  b = a;
  b.hideouts[0].known_to_pursuers = !b.hideouts[0].known_to_pursuers;
  CHECK(env_config_hash(a) != env_config_hash(b));
  b = a;
  b.evader.w_v += 0.5;
  CHECK(env_config_hash(a) != env_config_hash(b));
}

TEST_CASE("collect_episode produces a coherent trajectory") {
  world::EnvConfig cfg = tiny_env();
  auto policy = marl::make_random_policy();
  TrajectoryRecord rec = collect_episode(cfg, *policy, 42, "random");
  CHECK(rec.seed == 42);
  CHECK(rec.policy == "random");
  CHECK(rec.config_hash == env_config_hash(cfg));
  REQUIRE(!rec.rows.empty());
  CHECK(rec.rows.size() <= static_cast<std::size_t>(cfg.t_max));
  CHECK((rec.outcome == "hideout_reached" || rec.outcome == "timeout"));
  // timesteps are 1..n and agent rosters are complete
  for (std::size_t i = 0; i < rec.rows.size(); ++i) {
    CHECK(rec.rows[i].t == static_cast<int>(i) + 1);
    CHECK(rec.rows[i].agent_pos.size() == cfg.agents.size());
  }
  // repeat with the same seed is identical
  auto policy2 = marl::make_random_policy();
  CHECK(collect_episode(cfg, *policy2, 42, "random") == rec);
}

TEST_CASE("collect_dataset") {
  world::EnvConfig cfg = tiny_env();
  auto recs = collect_dataset(cfg, "heuristic", 3, 100);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].seed == 100);
  CHECK(recs[2].seed == 102);
  CHECK(recs[0].policy == "heuristic");
  double rate = aggregate_detection_rate(recs);
  CHECK(rate >= 0);
  CHECK(rate <= 1);
  CHECK_THROWS_AS(collect_dataset(cfg, "nonsense", 1, 0), world::ConfigError);
}

TEST_CASE("jsonl record round trip") {
  world::EnvConfig cfg = tiny_env();
  auto policy = marl::make_heuristic_policy();
  TrajectoryRecord rec = collect_episode(cfg, *policy, 7, "heuristic");

  TempFile f("record_roundtrip_test.jsonl");
  write_record(rec, f.path);
  TrajectoryRecord back = read_record(f.path);
  CHECK(back == rec);

  SUBCASE("writes are byte-stable") {
    std::string first = slurp(f.path);
    write_record(rec, f.path);
    CHECK(slurp(f.path) == first);
  }

  SUBCASE("header line is a JSON object tagged as header") {
    std::ifstream in(f.path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line.find("\"type\":\"header\"") != std::string::npos);
  }
}

TEST_CASE("read_record rejects malformed input") {
  SUBCASE("missing file") {
    CHECK_THROWS_AS(read_record("no_such_file.jsonl"), world::ConfigError);
  }

  SUBCASE("no header") {
    TempFile f("record_bad_header_test.jsonl");
    std::ofstream(f.path) << "{\"t\":1}\n";
    CHECK_THROWS_WITH_AS(read_record(f.path),
                         doctest::Contains("missing header"),
                         std::runtime_error);
  }

  SUBCASE("broken json names the line") {
    TempFile f("record_bad_json_test.jsonl");
    std::ofstream(f.path)
        << "{\"type\":\"header\",\"seed\":1,\"config_hash\":2,"
           "\"policy\":\"x\",\"outcome\":\"timeout\",\"evader_start\":[0,0]}\n"
        << "{not json\n";
    CHECK_THROWS_WITH_AS(read_record(f.path), doctest::Contains("line 2"),
                         std::runtime_error);
  }

  SUBCASE("header with no rows") {
    TempFile f("record_empty_test.jsonl");
    std::ofstream(f.path)
        << "{\"type\":\"header\",\"seed\":1,\"config_hash\":2,"
           "\"policy\":\"x\",\"outcome\":\"timeout\",\"evader_start\":[0,0]}\n";
    CHECK_THROWS_WITH_AS(read_record(f.path),
                         doctest::Contains("zero-length"), std::runtime_error);
  }
}

TEST_CASE("filter dataset splits at trajectory granularity") {
  world::EnvConfig cfg = tiny_env();
  auto recs = collect_dataset(cfg, "random", 40, 1000);
  FilterDataset ds = build_filter_dataset(recs, cfg.t_max, 5);

  std::size_t total_rows = 0;
  for (const auto& r : recs) total_rows += r.rows.size();
  CHECK(ds.train.size() + ds.val.size() + ds.eval.size() == total_rows);
  // roughly 70/10/20 by trajectory count; with 40 trajectories allow slack
  CHECK(ds.train.size() > ds.eval.size());
  CHECK(!ds.train.empty());
  CHECK(!ds.eval.empty());

  SUBCASE("split is a pure function of seeds") {
    FilterDataset ds2 = build_filter_dataset(recs, cfg.t_max, 5);
    CHECK(ds2.train.size() == ds.train.size());
    CHECK(ds2.val.size() == ds.val.size());
    FilterDataset ds3 = build_filter_dataset(recs, cfg.t_max, 6);
    // a different split seed shuffles membership (sizes very likely differ,
    // but membership must differ somewhere: compare first train input)
    bool same = ds3.train.size() == ds.train.size();
    if (same)
      same = ds3.train.front().first.v == ds.train.front().first.v &&
             ds3.train.back().first.v == ds.train.back().first.v;
    CHECK_FALSE(same);
  }

  SUBCASE("targets are the evader positions") {
    const auto& r0 = recs.front().rows.front();
    bool found = false;
    auto scan = [&](const std::vector<filter::Sample>& set) {
      for (const auto& s : set)
        if (s.second == r0.evader_pos) found = true;
    };
    scan(ds.train);
    scan(ds.val);
    scan(ds.eval);
    CHECK(found);
  }
}

TEST_CASE("csv report format") {
  TempFile f("report_test.csv");
  ReportRow a;
  a.name = "pmc";
  a.detection_rate = 0.123456;
  a.ll = -1.5;
  a.rt = 0.000125;
  ReportRow b;
  b.name = "random";
  b.reward = -0.5;
  emit_report({a, b}, f.path);

  std::ifstream in(f.path);
  std::string header, l1, l2;
  REQUIRE(std::getline(in, header));
  REQUIRE(std::getline(in, l1));
  REQUIRE(std::getline(in, l2));
  CHECK(header ==
        "model,detection_rate,closest_distance,reward,ll,ade,ctp,desv,rt");
  CHECK(l1 == "pmc,0.1235,,,-1.5,,,,0.000125");
  CHECK(l2 == "random,,,-0.5,,,,,");
  std::string extra;
  CHECK_FALSE(std::getline(in, extra));
}

TEST_CASE("evaluate_policy aggregates episode metrics") {
  world::EnvConfig cfg = tiny_env();
  auto policy = marl::make_heuristic_policy();
  marl::EvalReport rep = marl::evaluate_policy(cfg, *policy, 4, 50);
  CHECK(rep.episodes.size() == 4);
  double mean_rate = 0;
  for (const auto& e : rep.episodes) mean_rate += e.metrics.detection_rate;
  mean_rate /= 4;
  CHECK(rep.mean.detection_rate == doctest::Approx(mean_rate).epsilon(1e-12));
  CHECK(rep.mean.closest_distance >= 0);
  CHECK(rep.stddev.detection_rate >= 0);
}
