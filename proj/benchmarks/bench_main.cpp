// Micro-benchmarks for the hot paths: filter forward passes, terrain
// planning, environment stepping and a MADDPG critic update.

#include <benchmark/benchmark.h>

#include <random>

#include "pursuit/maddpg.hpp"
#include "pursuit/pmc_filter.hpp"
#include "pursuit/presets.hpp"
#include "pursuit/rollout.hpp"
#include "pursuit/terrain_world.hpp"

namespace {

using namespace pursuit;

std::vector<double> random_inputs(int batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(static_cast<std::size_t>(batch) * filter::kInputDim);
  for (double& v : xs) v = u(rng);
  return xs;
}

void BM_FilterForward(benchmark::State& state, filter::ModelKind kind) {
  filter::FilterHyper h;
  auto model = filter::make_model(kind, h, 1, 300);
  int batch = static_cast<int>(state.range(0));
  auto xs = random_inputs(batch, 2);
  for (auto _ : state) {
    grad::Tape t;
    filter::MixtureHead head = model->forward(t, xs.data(), batch);
    benchmark::DoNotOptimize(head.mu.id);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

void BM_FilterTrainStep(benchmark::State& state) {
  filter::FilterHyper h;
  auto model = filter::make_model(filter::ModelKind::Pmc, h, 1, 300);
  const int batch = 128;
  auto xs = random_inputs(batch, 2);
  auto ys = random_inputs(1, 3);
  std::vector<double> targets(static_cast<std::size_t>(batch) * 2, 0.5);
  grad::AdamState opt;
  for (auto _ : state) {
    grad::Tape t;
    filter::MixtureHead head = model->forward(t, xs.data(), batch);
    grad::Value loss = filter::nll_loss(t, head, targets.data(), batch);
    model->params().zero_grad();
    t.backward(loss);
    grad::adam_step(model->params(), opt);
  }
  (void)ys;
}

void BM_AstarPlan(benchmark::State& state) {
  world::TerrainMap terr = world::generate_terrain(7, 64, 0.45);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (auto _ : state) {
    Vec2 a{u(rng), u(rng)}, b{u(rng), u(rng)};
    auto path = evader::astar_plan(terr, a, b, 2.0);
    benchmark::DoNotOptimize(path.size());
  }
}

void BM_EnvStep(benchmark::State& state) {
  Preset pre = desk_preset();
  world::Environment env(pre.env, 5);
  std::vector<Vec2> actions(env.num_learnable(), Vec2{0.001, 0.001});
  for (auto _ : state) {
    auto r = env.step(actions);
    benchmark::DoNotOptimize(r.done);
    if (r.done) env.reset(5);
  }
}

void BM_CriticUpdate(benchmark::State& state) {
  marl::TrainConfig cfg;
  const int n = 3, obs = 9;
  marl::PolicySet ps = marl::make_policy_set(n, obs, {0.01, 0.01, 0.02}, cfg, 1);
  marl::ReplayBuffer buf(1024);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 512; ++i) {
    marl::Transition tr;
    tr.obs.assign(n * obs, u(rng));
    tr.next_obs.assign(n * obs, u(rng));
    tr.act.assign(n * 2, 0.005);
    tr.rewards.assign(n, u(rng));
    tr.done = false;
    buf.push(tr);
  }
  std::vector<std::size_t> idx(cfg.batch);
  for (auto& v : idx) v = rng() % buf.size();
  for (auto _ : state) {
    double loss = marl::critic_update(ps, buf, idx, 0, cfg);
    benchmark::DoNotOptimize(loss);
  }
}

}  // namespace

BENCHMARK_CAPTURE(BM_FilterForward, pmc, pursuit::filter::ModelKind::Pmc)
    ->Arg(1)
    ->Arg(128);
BENCHMARK_CAPTURE(BM_FilterForward, fc, pursuit::filter::ModelKind::Fc)
    ->Arg(1)
    ->Arg(128);
BENCHMARK(BM_FilterTrainStep);
BENCHMARK(BM_AstarPlan);
BENCHMARK(BM_EnvStep);
BENCHMARK(BM_CriticUpdate);

BENCHMARK_MAIN();
