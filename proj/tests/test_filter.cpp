#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "pursuit/pmc_filter.hpp"

using namespace pursuit;
using namespace pursuit::filter;

namespace {

FilterHyper tiny_hyper() {
  FilterHyper h;
  h.prior_hidden = 8;
  h.embed = 8;
  h.branch_hidden = 8;
  h.decoder_hidden = 8;
  h.batch = 32;
  return h;
}

world::Detection det(int t, Vec2 pos, Vec2 vel) {
  world::Detection d;
  d.timestep = t;
  d.pos = pos;
  d.vel = vel;
  return d;
}

}  // namespace

TEST_CASE("build_filter_input") {
  const int t_max = 400;
  Vec2 start{0.1, 0.7};

  SUBCASE("empty log pads both slots with (start, 0, t/t_max)") {
    FilterInput in = build_filter_input({}, 100, start, t_max);
    CHECK(in.start() == start);
    CHECK(in.t_norm() == doctest::Approx(0.25));
    for (int s = 0; s < 2; ++s) {
      CHECK(in.slot_pos(s) == start);
      CHECK(in.slot_vel(s) == Vec2{0, 0});
      CHECK(in.slot_staleness(s) == doctest::Approx(0.25));
    }
  }

  SUBCASE("latest detection lands in slot 0") {
    std::vector<world::Detection> log = {det(10, {0.2, 0.2}, {0.01, 0}),
                                         det(40, {0.3, 0.4}, {0, 0.02})};
    FilterInput in = build_filter_input(log, 50, start, t_max);
    CHECK(in.slot_pos(0) == Vec2{0.3, 0.4});
    CHECK(in.slot_vel(0) == Vec2{0, 0.02});
    CHECK(in.slot_staleness(0) == doctest::Approx(10.0 / t_max));
    CHECK(in.slot_pos(1) == Vec2{0.2, 0.2});
    CHECK(in.slot_staleness(1) == doctest::Approx(40.0 / t_max));
  }

  SUBCASE("one detection pads only slot 1") {
    std::vector<world::Detection> log = {det(5, {0.6, 0.6}, {0, 0})};
    FilterInput in = build_filter_input(log, 20, start, t_max);
    CHECK(in.slot_pos(0) == Vec2{0.6, 0.6});
    CHECK(in.slot_pos(1) == start);
    CHECK(in.slot_staleness(1) == doctest::Approx(0.05));
  }

  SUBCASE("negative time rejected") {
    CHECK_THROWS_AS(build_filter_input({}, -1, start, t_max),
                    world::ContractError);
  }
}

TEST_CASE("motion extrapolation") {
  MotionState m{{0.3, 0.4}, {0.01, -0.02}, 10};
  CHECK(motion_extrapolate(m, 10) == Vec2{0.3, 0.4});
  Vec2 p = motion_extrapolate(m, 15);
  CHECK(p.x == doctest::Approx(0.35).epsilon(1e-12));
  CHECK(p.y == doctest::Approx(0.30).epsilon(1e-12));
  // clamps at the map border
  Vec2 q = motion_extrapolate(m, 100);
  CHECK(q.y == 0.0);
  CHECK_THROWS_AS(motion_extrapolate(m, 9), world::ContractError);

  SUBCASE("extrapolate_input agrees with motion_extrapolate") {
    const int t_max = 400;
    std::vector<world::Detection> log = {det(10, {0.3, 0.4}, {0.01, -0.02})};
    FilterInput in = build_filter_input(log, 15, {0.1, 0.1}, t_max);
    CHECK(dist(extrapolate_input(in, t_max), motion_extrapolate(m, 15)) <
          1e-12);
  }
}

TEST_CASE("nll_value analytic oracles") {
  MixturePrediction pred;
  pred.lambda[0] = 1.0;
  pred.mu[0] = {0.5, 0.5};
  pred.sigma[0] = {1.0, 1.0};
  for (int j = 1; j < kNumComponents; ++j) {
    pred.lambda[j] = 0.0;
    pred.mu[j] = {0, 0};
    pred.sigma[j] = {1, 1};
  }
  // unit-sigma Gaussian evaluated at its mean: nll = log(2*pi)
  CHECK(nll_value(pred, {0.5, 0.5}) ==
        doctest::Approx(std::log(2 * std::numbers::pi)).epsilon(1e-9));
  // one sigma out along x adds 1/2
  CHECK(nll_value(pred, {1.5, 0.5}) ==
        doctest::Approx(std::log(2 * std::numbers::pi) + 0.5).epsilon(1e-9));

  SUBCASE("two equal components at the same spot halve nothing") {
    pred.lambda[0] = 0.5;
    pred.lambda[1] = 0.5;
    pred.mu[1] = pred.mu[0];
    CHECK(nll_value(pred, {0.5, 0.5}) ==
          doctest::Approx(std::log(2 * std::numbers::pi)).epsilon(1e-9));
  }

  SUBCASE("far targets stay finite via log-sum-exp") {
    // the zero-weight components floor at lambda = 1e-300, so the best
    // log-density is roughly -0.5 * |y - mu|^2 - log(1e-300)
    pred.sigma[0] = {1e-3, 1e-3};
    double v = nll_value(pred, {100.0, 100.0});
    CHECK(std::isfinite(v));
    CHECK(v > 1e4);
  }
}

TEST_CASE("tape nll matches the scalar oracle") {
  for (ModelKind kind : {ModelKind::Pmc, ModelKind::Fc}) {
    auto model = make_model(kind, tiny_hyper(), 3, 400);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(0, 1);
    const int b = 6;
    std::vector<FilterInput> ins(b);
    std::vector<double> xs(b * kInputDim), ys(b * 2);
    for (int i = 0; i < b; ++i) {
      for (double& v : ins[i].v) v = uni(rng);
      std::copy(ins[i].v.begin(), ins[i].v.end(), xs.begin() + i * kInputDim);
      ys[2 * i] = uni(rng);
      ys[2 * i + 1] = uni(rng);
    }
    std::vector<MixturePrediction> preds;
    model->predict_batch(ins, preds);
    double expect = 0;
    for (int i = 0; i < b; ++i)
      expect += nll_value(preds[i], {ys[2 * i], ys[2 * i + 1]});
    expect /= b;

    grad::Tape t;
    MixtureHead head = model->forward(t, xs.data(), b);
    double got = t.scalar_val(nll_loss(t, head, ys.data(), b));
    CHECK(got == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("prediction invariants") {
  for (ModelKind kind : {ModelKind::Pmc, ModelKind::Fc}) {
    auto model = make_model(kind, tiny_hyper(), 11, 400);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> uni(0, 1);
    for (int it = 0; it < 50; ++it) {
      FilterInput in;
      for (double& v : in.v) v = uni(rng);
      MixturePrediction p = model->predict(in);
      double sum = 0;
      for (int j = 0; j < kNumComponents; ++j) {
        CHECK(p.lambda[j] >= 0);
        sum += p.lambda[j];
        CHECK(p.sigma[j].x >= kSigmaMin);
        CHECK(p.sigma[j].y >= kSigmaMin);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
      // same input, same output
      MixturePrediction q = model->predict(in);
      CHECK(p.lambda == q.lambda);
      CHECK(p.mu == q.mu);
    }
  }
}

TEST_CASE("gradient check of the full training loss") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> uni(0, 1);
  const int b = 3;
  std::vector<double> xs(b * kInputDim), ys(b * 2);
  for (double& v : xs) v = uni(rng);
  for (double& v : ys) v = uni(rng);
  for (ModelKind kind : {ModelKind::Pmc, ModelKind::Fc}) {
    auto model = make_model(kind, tiny_hyper(), 17, 400);
    double err = grad::grad_check(model->params(), [&](grad::Tape& t) {
      MixtureHead head = model->forward(t, xs.data(), b);
      return nll_loss(t, head, ys.data(), b);
    });
    CHECK(err < 1e-4);
  }
}

TEST_CASE("disk_probability") {
  MixturePrediction pred;
  pred.lambda[0] = 1.0;
  pred.mu[0] = {0.5, 0.5};
  pred.sigma[0] = {0.02, 0.02};
  for (int j = 1; j < kNumComponents; ++j) pred.sigma[j] = {1, 1};

  SUBCASE("isotropic closed form") {
    double delta = 0.05;
    double expect = 1.0 - std::exp(-delta * delta / (2 * 0.02 * 0.02));
    CHECK(disk_probability(pred, {0.5, 0.5}, delta) ==
          doctest::Approx(expect).epsilon(2e-3));
  }

  SUBCASE("mass far from the mixture is negligible") {
    CHECK(disk_probability(pred, {0.0, 0.0}, 0.05) < 1e-6);
  }

  SUBCASE("delta must be positive") {
    CHECK_THROWS_AS(disk_probability(pred, {0.5, 0.5}, 0.0),
                    world::ConfigError);
  }
}

TEST_CASE("aggregate metrics") {
  MixturePrediction tight;
  tight.lambda[0] = 1.0;
  tight.mu[0] = {0.4, 0.6};
  tight.sigma[0] = {kSigmaMin, kSigmaMin};
  for (int j = 1; j < kNumComponents; ++j) tight.sigma[j] = {1, 1};

  SUBCASE("ade is the distance to the weighted mean") {
    MixturePrediction two{};
    two.lambda[0] = 0.5;
    two.lambda[1] = 0.5;
    two.mu[0] = {0.0, 0.0};
    two.mu[1] = {1.0, 0.0};
    for (auto& s : two.sigma) s = {1, 1};
    CHECK(metric_ade({two}, {{0.5, 0.0}}) == doctest::Approx(0.0));
    CHECK(metric_ade({two}, {{0.5, 0.3}}) == doctest::Approx(0.3));
  }

  SUBCASE("ctp hits when mass concentrates at the target") {
    CHECK(metric_ctp({tight, tight}, {{0.4, 0.6}, {0.9, 0.9}}) ==
          doctest::Approx(0.5));
  }

  SUBCASE("ll averages -nll") {
    std::vector<MixturePrediction> preds = {tight, tight};
    std::vector<Vec2> ys = {{0.4, 0.6}, {0.41, 0.6}};
    double expect = -(nll_value(tight, ys[0]) + nll_value(tight, ys[1])) / 2;
    CHECK(metric_ll(preds, ys) == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("desv is near zero for a calibrated Gaussian") {
    MixturePrediction g{};
    g.lambda[0] = 1.0;
    g.mu[0] = {0.5, 0.5};
    g.sigma[0] = {0.05, 0.08};
    for (int j = 1; j < kNumComponents; ++j) g.sigma[j] = {1, 1};
    std::mt19937_64 rng(123);
    std::normal_distribution<double> nx(0.5, 0.05), ny(0.5, 0.08);
    const int n = 20000;
    std::vector<MixturePrediction> preds(n, g);
    std::vector<Vec2> ys(n);
    for (auto& y : ys) y = {nx(rng), ny(rng)};
    CHECK(std::abs(metric_desv(preds, ys)) < 0.015);
  }

  SUBCASE("mismatched lengths rejected") {
    CHECK_THROWS_AS(metric_ll({tight}, {}), world::ContractError);
  }
}

TEST_CASE("training reduces validation nll and is reproducible") {
  // learnable synthetic task: target equals the latest detection position
  auto make_data = [](int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.1, 0.9);
    std::vector<Sample> out;
    for (int i = 0; i < n; ++i) {
      Vec2 pos{uni(rng), uni(rng)};
      std::vector<world::Detection> log = {det(50, pos, {0, 0})};
      out.push_back({build_filter_input(log, 60, {0.1, 0.1}, 400), pos});
    }
    return out;
  };
  auto train_set = make_data(512, 1);
  auto val_set = make_data(128, 2);

  FilterHyper h = tiny_hyper();
  h.max_epochs = 12;
  h.batch = 64;

  for (ModelKind kind : {ModelKind::Pmc, ModelKind::Fc}) {
    auto a = make_model(kind, h, 33, 400);
    TrainResult ra = train_filter(*a, train_set, val_set, h, 77);
    REQUIRE(!ra.val_nll.empty());
    CHECK(ra.val_nll[ra.best_epoch] < ra.val_nll.front());

    auto b = make_model(kind, h, 33, 400);
    TrainResult rb = train_filter(*b, train_set, val_set, h, 77);
    CHECK(grad::checkpoint_checksum(a->params()) ==
          grad::checkpoint_checksum(b->params()));
    CHECK(ra.val_nll == rb.val_nll);
  }
}

TEST_CASE("model checkpoint round trip preserves predictions") {
  auto a = make_model(ModelKind::Pmc, tiny_hyper(), 5, 400);
  std::string path = "filter_ckpt_test.bin";
  grad::save_checkpoint(a->params(), path);
  auto b = make_model(ModelKind::Pmc, tiny_hyper(), 99, 400);
  grad::load_checkpoint(b->params(), path);
  std::remove(path.c_str());

  FilterInput in;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> uni(0, 1);
  for (double& v : in.v) v = uni(rng);
  MixturePrediction pa = a->predict(in), pb = b->predict(in);
  CHECK(pa.lambda == pb.lambda);
  CHECK(pa.mu == pb.mu);
  CHECK(pa.sigma == pb.sigma);
}

TEST_CASE("bench_runtime returns a sane median") {
  auto m = make_model(ModelKind::Pmc, tiny_hyper(), 1, 400);
  double sec = bench_runtime(*m, 32, 21);
  CHECK(sec > 0);
  CHECK(sec < 1.0);
  CHECK_THROWS_AS(bench_runtime(*m, 0), world::ConfigError);
}
