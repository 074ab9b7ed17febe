#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <limits>

#include "dysuse/adam.hpp"
#include "dysuse/rng.hpp"
#include "dysuse/tensor.hpp"
#include "grad_check.hpp"

using namespace dysuse;

TEST_CASE("op forward values") {
  Tape tape;
  SECTION("relu1 caps both sides") {
    const Tensor x = make_constant({3}, {-0.3, 0.4, 1.7});
    const auto y = tape.relu1(x).value();
    CHECK(y == std::vector<double>{0.0, 0.4, 1.0});
  }
  SECTION("masked softmax keeps only unmasked entries") {
    const double inf = std::numeric_limits<double>::infinity();
    const Tensor x = make_constant({1, 2}, {2.718, -4.0});
    const Tensor m = make_constant({1, 2}, {0.0, -inf});
    const auto y = tape.softmax_masked(x, m).value();
    CHECK(y[0] == 1.0);
    CHECK(y[1] == 0.0);
  }
  SECTION("fully masked rows are all zero") {
    const double inf = std::numeric_limits<double>::infinity();
    const Tensor x = make_constant({2, 2}, {1.0, 2.0, 3.0, 4.0});
    const Tensor m = make_constant({2, 2}, {-inf, -inf, 0.0, 0.0});
    const auto y = tape.softmax_masked(x, m).value();
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] + y[3] == Catch::Approx(1.0).margin(1e-15));
  }
  SECTION("softmax rows sum to one when any entry is open") {
    const Tensor x = make_constant({2, 3}, {0.3, -1.0, 2.0, 0.0, 0.0, 0.0});
    const Tensor m = make_constant({3}, {0.0, 0.0, 0.0});
    const auto y = tape.softmax_masked(x, m).value();
    CHECK(y[0] + y[1] + y[2] == Catch::Approx(1.0).margin(1e-12));
    CHECK(y[3] == Catch::Approx(1.0 / 3.0).margin(1e-15));
  }
  SECTION("mae of identical vectors is zero") {
    const Tensor a = make_constant({2}, {0.2, 0.8});
    CHECK(tape.mae(a, a).scalar() == 0.0);
  }
  SECTION("mae hand value") {
    const Tensor a = make_constant({2}, {0.1, 0.9});
    const Tensor b = make_constant({2}, {0.2, 0.7});
    CHECK(tape.mae(a, b).scalar() == Catch::Approx(0.15).margin(1e-15));
  }
  SECTION("matmul hand value") {
    const Tensor a = make_constant({2, 2}, {1, 2, 3, 4});
    const Tensor b = make_constant({2, 1}, {5, 6});
    const auto y = tape.matmul(a, b).value();
    CHECK(y == std::vector<double>{17, 39});
  }
  SECTION("shape mismatches throw") {
    const Tensor a = make_constant({2, 2}, {1, 2, 3, 4});
    const Tensor b = make_constant({3, 1}, {1, 2, 3});
    CHECK_THROWS_AS(tape.matmul(a, b), ValidationError);
    CHECK_THROWS_AS(tape.mae(a, b), ValidationError);
    CHECK_THROWS_AS(tape.add(a, b), ValidationError);
  }
}

TEST_CASE("backward basics") {
  SECTION("linear map gradient is the input") {
    const Tensor w = make_param({3}, {0.5, -1.0, 2.0});
    const Tensor x = make_constant({3}, {1.0, 2.0, 3.0});
    Tape tape;
    const Tensor loss = tape.sum(tape.mul(w, x));
    tape.backward(loss);
    CHECK(w.grad() == std::vector<double>{1.0, 2.0, 3.0});
  }
  SECTION("relu1 piecewise slopes") {
    const Tensor x = make_param({3}, {0.5, 1.5, -0.5});
    Tape tape;
    tape.backward(tape.sum(tape.relu1(x)));
    CHECK(x.grad() == std::vector<double>{1.0, 0.0, 0.0});
  }
  SECTION("backward requires a scalar") {
    const Tensor x = make_param({2}, {1.0, 2.0});
    Tape tape;
    const Tensor y = tape.mul(x, make_scalar(2.0));
    CHECK_THROWS_AS(tape.backward(y), ValidationError);
  }
  SECTION("grads accumulate across backward calls until zeroed") {
    const Tensor x = make_param({1}, {3.0});
    Tape tape;
    const Tensor l1 = tape.sum(tape.mul(x, make_scalar(2.0)));
    tape.backward(l1);
    Tape tape2;
    const Tensor l2 = tape2.sum(tape2.mul(x, make_scalar(2.0)));
    tape2.backward(l2);
    CHECK(x.grad()[0] == 4.0);
    zero_grad({x});
    CHECK(x.grad()[0] == 0.0);
  }
}

TEST_CASE("finite-difference gradient checks per op") {
  SeqRng rng(2024, 0);
  auto rand_vec = [&](std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.next_range(lo, hi);
    return v;
  };

  SECTION("matmul + sigmoid + sum") {
    const Tensor a = make_param({3, 4}, rand_vec(12, -1, 1));
    const Tensor b = make_param({4, 2}, rand_vec(8, -1, 1));
    check_gradients({a, b}, [&](Tape& t) { return t.sum(t.sigmoid(t.matmul(a, b))); });
  }
  SECTION("add broadcast variants") {
    const Tensor a = make_param({3, 4}, rand_vec(12, -1, 1));
    const Tensor row = make_param({4}, rand_vec(4, -1, 1));
    const Tensor s = make_param({1}, rand_vec(1, -1, 1));
    check_gradients({a, row, s},
                    [&](Tape& t) { return t.sum(t.sigmoid(t.add(t.add(a, row), s))); });
  }
  SECTION("mul variants") {
    const Tensor a = make_param({3, 4}, rand_vec(12, -1, 1));
    const Tensor b = make_param({3, 4}, rand_vec(12, -1, 1));
    const Tensor col = make_param({3, 1}, rand_vec(3, -1, 1));
    const Tensor s = make_param({1}, rand_vec(1, 0.5, 1.5));
    check_gradients({a, b, col, s},
                    [&](Tape& t) { return t.sum(t.mul(t.mul(t.mul(a, b), col), s)); });
  }
  SECTION("concat + leaky_relu") {
    const Tensor a = make_param({3, 2}, rand_vec(6, -1, 1));
    const Tensor b = make_param({3, 3}, rand_vec(9, -1, 1));
    check_gradients({a, b},
                    [&](Tape& t) { return t.sum(t.leaky_relu(t.concat_cols(a, b), 0.01)); });
  }
  SECTION("gather/scatter") {
    const Tensor a = make_param({4, 3}, rand_vec(12, -1, 1));
    const std::vector<std::size_t> idx = {0, 2, 2, 3, 1};
    check_gradients({a}, [&](Tape& t) {
      return t.sum(t.sigmoid(t.scatter_sum_rows(t.gather_rows(a, idx), idx, 4)));
    });
  }
  SECTION("batched attention ops") {
    const Tensor q = make_param({2, 3}, rand_vec(6, -1, 1));
    const Tensor k = make_param({2, 3}, rand_vec(6, -1, 1));
    const Tensor v = make_param({2, 3}, rand_vec(6, -1, 1));
    const double inf = std::numeric_limits<double>::infinity();
    const Tensor mask = make_constant({3, 3}, {0, -inf, -inf, 0, 0, -inf, 0, 0, 0});
    check_gradients({q, k, v}, [&](Tape& t) {
      const Tensor beta = t.softmax_masked(t.batch_outer(q, k), mask);
      return t.sum(t.batch_matvec(beta, v));
    });
  }
  SECTION("stack/select") {
    const Tensor a = make_param({4, 1}, rand_vec(4, -1, 1));
    const Tensor b = make_param({4, 1}, rand_vec(4, -1, 1));
    check_gradients({a, b}, [&](Tape& t) {
      const Tensor s = t.stack_cols({a, b});
      return t.sum(t.mul(t.select_col(s, 0), t.select_col(s, 1)));
    });
  }
  SECTION("mae away from ties") {
    const Tensor a = make_param({5}, rand_vec(5, 0.1, 0.9));
    const Tensor b = make_constant({5}, rand_vec(5, -0.9, -0.1));
    check_gradients({a}, [&](Tape& t) { return t.mae(a, b); });
  }
  SECTION("random 20-parameter composite") {
    const Tensor w1 = make_param({2, 4}, rand_vec(8, -1, 1));
    const Tensor w2 = make_param({4, 2}, rand_vec(8, -1, 1));
    const Tensor bias = make_param({2}, rand_vec(2, -0.5, 0.5));
    const Tensor scale_p = make_param({1}, rand_vec(1, 0.5, 1.5));
    const Tensor x = make_constant({3, 2}, rand_vec(6, -1, 1));
    const Tensor target = make_constant({3, 2}, rand_vec(6, 0.0, 1.0));
    check_gradients({w1, w2, bias, scale_p}, [&](Tape& t) {
      Tensor h = t.leaky_relu(t.matmul(x, w1), 0.01);
      h = t.add(t.matmul(h, w2), bias);
      h = t.mul(t.sigmoid(h), scale_p);
      return t.mae(h, target);
    });
  }
}

TEST_CASE("adam optimizer") {
  SECTION("zero gradient leaves parameters unchanged") {
    const Tensor p = make_param({2}, {1.0, -2.0});
    AdamOptimizer adam(0.1);
    zero_grad({p});
    adam.step({p});
    CHECK(p.value() == std::vector<double>{1.0, -2.0});
  }
  SECTION("first step is about -lr for unit gradient") {
    const Tensor p = make_param({1}, {0.0});
    AdamOptimizer adam(0.1);
    p.raw()->grad[0] = 1.0;
    adam.step({p});
    // bias-corrected: lr * g / (sqrt(g^2) + eps)
    CHECK(p.value()[0] == Catch::Approx(-0.1).margin(1e-8));
  }
  SECTION("repeated identical gradients move monotonically") {
    const Tensor p = make_param({1}, {0.0});
    AdamOptimizer adam(0.05);
    double prev = 0.0;
    for (int i = 0; i < 5; ++i) {
      p.raw()->grad[0] = 1.0;
      adam.step({p});
      CHECK(p.value()[0] < prev);
      prev = p.value()[0];
    }
  }
}
