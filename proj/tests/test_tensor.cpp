#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "stnp/rng.hpp"
#include "stnp/tensor.hpp"
#include "support/finite_diff.hpp"

using namespace stnp;
using stnp::testing::finite_diff;
using stnp::testing::max_rel_error;

namespace {

Tensor random_param(Shape shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(static_cast<size_t>(numel(shape)));
  for (auto& x : v) x = scale * rng.normal();
  return Tensor::param(std::move(shape), std::move(v));
}

// Gradient check of a scalar-valued graph against central differences.
double grad_check(Tensor& param, const std::function<Tensor()>& graph) {
  Tape tape;
  std::vector<double> analytic;
  {
    Tape::Scope scope(tape);
    Tensor loss = graph();
    tape.backward(loss);
    analytic = tape.grad(param);
  }
  auto numeric = finite_diff(param, [&] { return graph().value(); });
  return max_rel_error(analytic, numeric);
}

}  // namespace

TEST_CASE("conv1d worked examples") {
  Tensor x = Tensor::from({1, 3}, {1, 2, 3});

  SUBCASE("identity kernel") {
    Tensor w = Tensor::from({1, 1, 1}, {1});
    Tensor y = conv1d(x, w, {}, 0);
    CHECK(y.values() == std::vector<double>{1, 2, 3});
  }
  SUBCASE("box kernel, pad 1") {
    Tensor w = Tensor::from({1, 1, 3}, {1, 1, 1});
    Tensor y = conv1d(x, w, Tensor::from({1}, {0}), 1);
    CHECK(y.values() == std::vector<double>{3, 6, 5});
  }
  SUBCASE("zero kernel gives constant bias") {
    Tensor w = Tensor::zeros({2, 1, 3});
    Tensor b = Tensor::from({2}, {0.5, -1.5});
    Tensor y = conv1d(x, w, b, 1);
    for (long p = 0; p < 3; ++p) {
      CHECK(y.at(0, p) == 0.5);
      CHECK(y.at(1, p) == -1.5);
    }
  }
  SUBCASE("shape errors name the offending dimension") {
    Tensor w = Tensor::from({1, 2, 1}, {1, 1});
    CHECK_THROWS_AS(conv1d(x, w, {}, 0), ShapeError);
    Tensor weven = Tensor::from({1, 1, 2}, {1, 1});
    CHECK_THROWS_AS(conv1d(x, weven, {}, 0), ShapeError);
  }
}

TEST_CASE("conv1d translation equivariance on the grid") {
  Rng rng(7);
  const long L = 32, s = 5;
  Tensor w = random_param({3, 2, 5}, rng);
  Tensor b = random_param({3}, rng);
  std::vector<double> base(2 * L);
  for (auto& v : base) v = rng.normal();
  // shifted input: x2[c][i] = x1[c][i - s] on the interior
  std::vector<double> shifted(2 * L, 0.0);
  for (long c = 0; c < 2; ++c)
    for (long i = s; i < L; ++i) shifted[c * L + i] = base[c * L + i - s];
  Tensor y1 = conv1d(Tensor::from({2, L}, base), w, b, 2);
  Tensor y2 = conv1d(Tensor::from({2, L}, shifted), w, b, 2);
  // compare on an interior window untouched by either zero-pad boundary
  double worst = 0.0;
  for (long c = 0; c < 3; ++c)
    for (long i = s + 2; i < L - 2; ++i)
      worst = std::max(worst, std::abs(y2.at(c, i) - y1.at(c, i - s)));
  CHECK(worst <= 1e-12);
}

TEST_CASE("affine worked examples") {
  SUBCASE("identity weight") {
    Tensor x = Tensor::from({2}, {3.0, -4.0});
    Tensor y = affine(x, Tensor::eye(2), Tensor::zeros({2}));
    CHECK(y.values() == std::vector<double>{3.0, -4.0});
  }
  SUBCASE("hand matrix product") {
    Tensor x = Tensor::from({1, 2}, {1, 2});
    Tensor w = Tensor::from({2, 1}, {1, 1});
    Tensor y = affine(x, w, Tensor::from({1}, {0.0}));
    CHECK(y.at(0, 0) == 3.0);
  }
  SUBCASE("zero weight broadcasts bias") {
    Tensor x = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6});
    Tensor y = affine(x, Tensor::zeros({2, 2}), Tensor::from({2}, {7, 8}));
    for (long i = 0; i < 3; ++i) {
      CHECK(y.at(i, 0) == 7.0);
      CHECK(y.at(i, 1) == 8.0);
    }
  }
  SUBCASE("dimension mismatch") {
    Tensor x = Tensor::from({3}, {1, 2, 3});
    CHECK_THROWS_AS(affine(x, Tensor::eye(2), {}), ShapeError);
  }
}

TEST_CASE("pointwise examples and domain errors") {
  CHECK(relu(Tensor::scalar(-1.0)).value() == 0.0);
  CHECK(softplus(Tensor::scalar(0.0)).value() == doctest::Approx(std::log(2.0)));
  Tensor x = Tensor::from({3}, {1, -2, 3});
  CHECK(mul(x, Tensor::scalar(1.0)).values() == x.values());
  CHECK_THROWS_AS(log(Tensor::scalar(0.0)), DomainError);
  CHECK_THROWS_AS(log(Tensor::scalar(-1.0)), DomainError);
  CHECK_THROWS_AS(div(x, Tensor::scalar(0.0)), DomainError);
  CHECK_THROWS_AS(sqrt(Tensor::scalar(-1e-9)), DomainError);
}

TEST_CASE("broadcasting follows numpy rules") {
  Tensor a = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor row = Tensor::from({3}, {10, 20, 30});
  Tensor col = Tensor::from({2, 1}, {100, 200});
  Tensor r = add(a, row);
  CHECK(r.at(1, 2) == 36);
  Tensor c = add(a, col);
  CHECK(c.at(1, 0) == 204);
  CHECK_THROWS_AS(add(a, Tensor::from({4}, {1, 2, 3, 4})), ShapeError);
}

TEST_CASE("reductions") {
  Tensor x = Tensor::from({3}, {1, 2, 3});
  CHECK(sum(x).value() == 6.0);
  CHECK(mean(x).value() == 2.0);
  CHECK(max(x).value() == 3.0);

  SUBCASE("log_sum_exp of equal values") {
    Tensor v = Tensor::full({4}, 2.5);
    CHECK(log_sum_exp(v).value() == doctest::Approx(2.5 + std::log(4.0)));
  }
  SUBCASE("log_sum_exp is overflow-safe") {
    Tensor big = Tensor::from({2}, {1000.0, 1000.0});
    CHECK(log_sum_exp(big).value() ==
          doctest::Approx(1000.0 + std::log(2.0)));
  }
  SUBCASE("Jensen bounds") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> v(8);
      for (auto& e : v) e = rng.uniform(-5.0, 5.0);
      Tensor t = Tensor::from({8}, v);
      const double lse = log_sum_exp(t).value();
      CHECK(lse >= mean(t).value());
      CHECK(lse <= max(t).value() + std::log(8.0));
    }
  }
  SUBCASE("axis reductions") {
    Tensor m = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor s0 = sum(m, 0);
    CHECK(s0.values() == std::vector<double>{5, 7, 9});
    Tensor s1 = sum(m, 1);
    CHECK(s1.values() == std::vector<double>{6, 15});
    Tensor m1 = mean(m, 1);
    CHECK(m1.values() == std::vector<double>{2, 5});
  }
}

TEST_CASE("backward matches finite differences on primitives") {
  Rng rng(11);

  SUBCASE("d(x^2)/dx at x=3 is 6") {
    Tensor x = Tensor::param({}, {3.0});
    Tape tape;
    {
      Tape::Scope scope(tape);
      Tensor loss = square(x);
      tape.backward(loss);
    }
    CHECK(tape.grad(x)[0] == doctest::Approx(6.0).epsilon(1e-10));
  }
  SUBCASE("gradient of a constant is zero") {
    Tensor x = Tensor::param({2}, {1.0, 2.0});
    Tape tape;
    {
      Tape::Scope scope(tape);
      Tensor loss = Tensor::scalar(5.0);
      tape.backward(loss);
    }
    CHECK(tape.grad(x) == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("relu subgradient away from the kink") {
    Tensor x = Tensor::param({2}, {-1.0, 2.0});
    Tape tape;
    {
      Tape::Scope scope(tape);
      tape.backward(sum(relu(x)));
    }
    CHECK(tape.grad(x) == std::vector<double>{0.0, 1.0});
  }
  SUBCASE("pointwise chain") {
    Tensor x = random_param({6}, rng, 0.5);
    // keep away from relu kink and log/sqrt domain edges
    for (auto& v : x.values()) v = 0.3 + std::abs(v);
    auto graph = [&] {
      Tensor y = mul(softplus(x), tanh(x));
      y = add(y, exp(neg(x)));
      y = sub(y, log(x));
      y = add(y, sqrt(x));
      y = add(y, cos(x));
      return sum(square(y));
    };
    CHECK(grad_check(x, graph) <= 1e-4);
  }
  SUBCASE("broadcast binary ops") {
    Tensor a = random_param({3, 4}, rng);
    Tensor b = random_param({4}, rng);
    for (auto& v : b.values()) v = 1.5 + std::abs(v);
    auto graph = [&] { return sum(square(div(a, b))); };
    CHECK(grad_check(a, graph) <= 1e-4);
    CHECK(grad_check(b, graph) <= 1e-4);
  }
  SUBCASE("affine") {
    Tensor x = random_param({3, 4}, rng);
    Tensor w = random_param({4, 2}, rng);
    Tensor b = random_param({2}, rng);
    auto graph = [&] { return sum(square(affine(x, w, b))); };
    CHECK(grad_check(x, graph) <= 1e-4);
    CHECK(grad_check(w, graph) <= 1e-4);
    CHECK(grad_check(b, graph) <= 1e-4);
  }
  SUBCASE("matmul and transpose") {
    Tensor a = random_param({3, 4}, rng);
    Tensor b = random_param({4, 2}, rng);
    auto graph = [&] { return sum(square(matmul(transpose(matmul(a, b)), a))); };
    CHECK(grad_check(a, graph) <= 1e-4);
    CHECK(grad_check(b, graph) <= 1e-4);
  }
  SUBCASE("conv1d") {
    Tensor x = random_param({2, 9}, rng);
    Tensor w = random_param({3, 2, 3}, rng);
    Tensor b = random_param({3}, rng);
    auto graph = [&] { return sum(square(conv1d(x, w, b, 1))); };
    CHECK(grad_check(x, graph) <= 1e-4);
    CHECK(grad_check(w, graph) <= 1e-4);
    CHECK(grad_check(b, graph) <= 1e-4);
  }
  SUBCASE("reductions") {
    Tensor x = random_param({2, 5}, rng);
    auto lse = [&] { return log_sum_exp(reshape(x, {10})); };
    CHECK(grad_check(x, lse) <= 1e-4);
    auto mx = [&] { return sum(square(max(x, 1))); };
    CHECK(grad_check(x, mx) <= 1e-4);
    auto mn = [&] { return sum(square(mean(x, 0))); };
    CHECK(grad_check(x, mn) <= 1e-4);
  }
  SUBCASE("concat and select") {
    Tensor a = random_param({2, 3}, rng);
    Tensor b = random_param({1, 3}, rng);
    auto graph = [&] {
      Tensor c = concat({a, b}, 0);
      return add(sum(square(c)), select(reshape(c, {9}), 4));
    };
    CHECK(grad_check(a, graph) <= 1e-4);
    CHECK(grad_check(b, graph) <= 1e-4);
  }
  SUBCASE("cholesky solve") {
    // SPD matrix built as M M^T + 5 I so FD perturbations stay PD
    Tensor m = random_param({3, 3}, rng);
    Tensor y = random_param({3}, rng);
    auto graph = [&] {
      Tensor a = add(matmul(m, transpose(m)), mul(Tensor::eye(3), Tensor::scalar(5.0)));
      return sum(square(cholesky_solve(a, y)));
    };
    CHECK(grad_check(m, graph) <= 1e-4);
    CHECK(grad_check(y, graph) <= 1e-4);
  }
}

TEST_CASE("backward requires a scalar loss") {
  Tensor x = Tensor::param({2}, {1.0, 2.0});
  Tape tape;
  Tape::Scope scope(tape);
  Tensor y = square(x);
  CHECK_THROWS_AS(tape.backward(y), ShapeError);
}

TEST_CASE("cholesky_solve rejects indefinite matrices") {
  Tensor a = Tensor::from({2, 2}, {1.0, 0.0, 0.0, -1.0});
  Tensor b = Tensor::from({2}, {1.0, 1.0});
  CHECK_THROWS_AS(cholesky_solve(a, b), NumericalError);
}

TEST_CASE("adam") {
  AdamConfig cfg;
  SUBCASE("zero gradient leaves parameter unchanged") {
    cfg.weight_decay = 0.0;
    std::vector<double> theta{1.0, -2.0}, m, v;
    adam_update(theta, {0.0, 0.0}, m, v, 1, cfg);
    CHECK(theta == std::vector<double>{1.0, -2.0});
  }
  SUBCASE("first step magnitude") {
    cfg.lr = 1e-3;
    cfg.weight_decay = 0.0;
    std::vector<double> theta{0.0}, m, v;
    adam_update(theta, {1.0}, m, v, 1, cfg);
    CHECK(theta[0] == doctest::Approx(-1e-3).epsilon(1e-6));
  }
  SUBCASE("repeated steps move against the gradient sign") {
    cfg.weight_decay = 0.0;
    std::vector<double> theta{0.5}, m, v;
    double prev = theta[0];
    for (long t = 1; t <= 2; ++t) {
      adam_update(theta, {2.0}, m, v, t, cfg);
      CHECK(theta[0] < prev);
      prev = theta[0];
    }
  }
  SUBCASE("decoupled weight decay pulls toward zero") {
    cfg.weight_decay = 0.1;
    cfg.lr = 1e-2;
    std::vector<double> theta{1.0}, m, v;
    adam_update(theta, {0.0}, m, v, 1, cfg);
    CHECK(theta[0] == doctest::Approx(1.0 - 1e-2 * 0.1 * 1.0));
  }
}

TEST_CASE("tape gradient accumulates over reuse") {
  Tensor x = Tensor::param({}, {2.0});
  Tape tape;
  {
    Tape::Scope scope(tape);
    Tensor y = mul(x, x);      // x^2
    Tensor z = add(y, mul(x, Tensor::scalar(3.0)));  // x^2 + 3x
    tape.backward(z);
  }
  CHECK(tape.grad(x)[0] == doctest::Approx(7.0));  // 2x + 3 at x=2
}
