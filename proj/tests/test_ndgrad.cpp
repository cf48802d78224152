#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "pursuit/ndgrad.hpp"

using namespace pursuit::grad;

TEST_CASE("matmul forward") {
  Tape t;
  Value a = t.leaf({1, 2, 3, 4}, 2, 2);
  Value b = t.leaf({1, 1}, 2, 1);
  Value c = t.matmul(a, b);
  CHECK(t.val(c)[0] == 3);
  CHECK(t.val(c)[1] == 7);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> uni(-1, 1);
  std::vector<double> m(12);
  for (double& v : m) v = uni(rng);
  std::vector<double> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  Value A = t.leaf(m, 4, 3);
  Value AI = t.matmul(A, t.leaf(eye, 3, 3));
  for (int i = 0; i < 12; ++i) CHECK(t.val(AI)[i] == doctest::Approx(m[i]));
}

TEST_CASE("matmul shape error names both shapes") {
  Tape t;
  Value a = t.leaf({1, 2}, 1, 2);
  Value b = t.leaf({1, 2, 3}, 1, 3);
  CHECK_THROWS_WITH_AS(t.matmul(a, b), doctest::Contains("1x2"),
                       DimensionError);
}

TEST_CASE("matmul gradient vs finite differences") {
  ParamStore ps;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> uni(-1, 1);
  Param& A = ps.add("A", 3, 4);
  Param& B = ps.add("B", 4, 2);
  for (double& v : A.data) v = uni(rng);
  for (double& v : B.data) v = uni(rng);
  double err = grad_check(ps, [&](Tape& t) {
    return t.sum_all(t.matmul(t.param(A), t.param(B)));
  });
  CHECK(err < 1e-4);
}

TEST_CASE("activations") {
  Tape t;
  Value x = t.leaf({0.0}, 1, 1);
  CHECK(t.val(t.sigmoid(x))[0] == 0.5);
  CHECK(t.val(t.softplus(x))[0] == doctest::Approx(std::log(2)).epsilon(1e-12));
  CHECK_THROWS_AS(t.log(t.leaf({-1.0}, 1, 1)), DomainError);
  CHECK_THROWS_AS(t.log(x), DomainError);

  ParamStore ps;
  Param& p = ps.add("x", 1, 1);
  p.data[0] = 0.0;
  double err =
      grad_check(ps, [&](Tape& tt) { return tt.sum_all(tt.tanh(tt.param(p))); });
  // tanh'(0) = 1
  ps.zero_grad();
  Tape t2;
  t2.backward(t2.sum_all(t2.tanh(t2.param(p))));
  CHECK(p.grad[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(err < 1e-6);
}

TEST_CASE("softmax") {
  Tape t;
  Value s = t.softmax_rows(t.leaf({0.0, 0.0}, 1, 2));
  CHECK(t.val(s)[0] == 0.5);
  CHECK(t.val(s)[1] == 0.5);

  Value big = t.softmax_rows(t.leaf({1000.0, 1000.0}, 1, 2));
  CHECK(t.val(big)[0] == 0.5);
  CHECK(t.val(big)[1] == 0.5);

  Value v = t.softmax_rows(t.leaf({1.0, 2.0, 3.0}, 1, 3));
  double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(t.val(v)[i] - std::exp(i + 1.0) / z) < 1e-12);
}

TEST_CASE("softmax positivity and normalization fuzz") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> uni(-50, 50);
  for (int it = 0; it < 200; ++it) {
    Tape t;
    std::vector<double> logits(8);
    for (double& l : logits) l = uni(rng);
    Value s = t.softmax_rows(t.leaf(logits, 1, 8));
    double sum = 0;
    for (double v : t.val(s)) {
      CHECK(v > 0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("backward basics") {
  ParamStore ps;
  Param& x = ps.add("x", 1, 1);
  x.data[0] = 3.0;

  SUBCASE("x^2 at 3") {
    Tape t;
    Value v = t.param(x);
    t.backward(t.sum_all(t.mul(v, v)));
    CHECK(x.grad[0] == doctest::Approx(6.0));
  }
  SUBCASE("unreachable parameter keeps zero grad") {
    Tape t;
    Value c = t.leaf({5.0}, 1, 1);
    t.param(x);  // on the tape but not feeding the loss
    t.backward(t.sum_all(c));
    CHECK(x.grad[0] == 0.0);
  }
  SUBCASE("non-scalar loss rejected") {
    Tape t;
    Value v = t.leaf({1.0, 2.0}, 1, 2);
    CHECK_THROWS_AS(t.backward(v), ContractError);
  }
  SUBCASE("second backward accumulates additively") {
    Tape t;
    Value v = t.param(x);
    Value loss = t.sum_all(t.mul(v, v));
    t.backward(loss);
    t.backward(loss);
    CHECK(x.grad[0] == doctest::Approx(12.0));
  }
}

TEST_CASE("two-layer net gradient check") {
  ParamStore ps;
  std::mt19937_64 rng(4);
  Linear l1 = make_linear(ps, "l1", 5, 7, rng);
  Linear l2 = make_linear(ps, "l2", 7, 1, rng);
  std::uniform_real_distribution<double> uni(-1, 1);
  std::vector<double> input(10);
  for (double& v : input) v = uni(rng);
  double err = grad_check(ps, [&](Tape& t) {
    Value x = t.leaf(input, 2, 5);
    return t.mean_all(apply_linear(t, l2, t.tanh(apply_linear(t, l1, x))));
  });
  CHECK(err < 1e-4);
}

TEST_CASE("relu far from kink is clean under finite differences") {
  ParamStore ps;
  Param& w = ps.add("w", 1, 1);
  w.data[0] = 2.0;  // relu input 2*3=6, far from 0
  double err = grad_check(ps, [&](Tape& t) {
    return t.sum_all(t.relu(t.scale(t.param(w), 3.0)));
  });
  CHECK(err < 1e-6);
}

TEST_CASE("adam") {
  SUBCASE("zero gradient is a fixed point") {
    ParamStore ps;
    Param& p = ps.add("p", 2, 2);
    p.data = {1, 2, 3, 4};
    AdamState st;
    ps.zero_grad();
    adam_step(ps, st);
    CHECK(p.data == std::vector<double>{1, 2, 3, 4});
  }
  SUBCASE("first step is lr-sized with bias correction") {
    ParamStore ps;
    Param& p = ps.add("p", 1, 1);
    p.data[0] = 1.0;
    p.grad[0] = 1.0;
    AdamState st;
    st.cfg.lr = 0.1;
    adam_step(ps, st);
    // mhat = g, vhat = g^2 -> step = lr * g/(|g|+eps) ~ 0.1
    CHECK(p.data[0] == doctest::Approx(0.9).epsilon(1e-6));
  }
  SUBCASE("determinism") {
    auto run = [] {
      ParamStore ps;
      std::mt19937_64 rng(9);
      Linear l = make_linear(ps, "l", 4, 4, rng);
      AdamState st;
      for (int i = 0; i < 10; ++i) {
        ps.zero_grad();
        Tape t;
        Value x = t.leaf({1, 2, 3, 4}, 1, 4);
        t.backward(t.mean_all(apply_linear(t, l, x)));
        adam_step(ps, st);
      }
      return checkpoint_checksum(ps);
    };
    CHECK(run() == run());
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  ParamStore ps;
  std::mt19937_64 rng(11);
  make_linear(ps, "a", 6, 5, rng);
  make_linear(ps, "b", 5, 2, rng);
  auto path = std::filesystem::temp_directory_path() / "ndg_test.ckpt";
  save_checkpoint(ps, path.string());

  ParamStore loaded;
  load_checkpoint(loaded, path.string());
  CHECK(checkpoint_checksum(loaded) == checkpoint_checksum(ps));
  std::filesystem::remove(path);
}
