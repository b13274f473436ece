#include <cmath>
#include <limits>

#include "doctest.h"
#include "ntlab/errors.hpp"
#include "ntlab/gradcheck.hpp"
#include "support/gradient_suite.hpp"

using namespace ntlab;
using namespace ntlab::ad;
using ntlab::testing::random_tensor;

TEST_CASE("backward of the identity and of a constant") {
  Graph g;
  Var x = g.variable(Tensor::scalar(3.0));
  g.backward(x);
  CHECK(g.grad(x).item() == 1.0);

  Graph h;
  Var y = h.variable(Tensor::scalar(3.0));
  Var c = h.constant(Tensor::scalar(5.0));
  h.backward(c);
  CHECK(h.grad(y).item() == 0.0);
}

TEST_CASE("squared residual of a 3x3 linear map matches central differences") {
  const Tensor w = random_tensor(3, 3, 1);
  const Tensor t = random_tensor(1, 3, 2);
  auto f = [&](Graph& g, Var x) {
    Var r = sub(matmul(x, g.constant(w)), g.constant(t));
    return matmul(mul(r, r), g.constant(Tensor({3, 1}, 1.0)));
  };
  CHECK(finite_diff_check(f, random_tensor(1, 3, 3), 1e-6) < 1e-5);
}

TEST_CASE("unreached parameters get zero gradient") {
  Parameter used("used", random_tensor(2, 2, 4));
  Parameter unused("unused", random_tensor(2, 2, 5));
  unused.grad.fill(9.0);
  unused.zero_grad();
  Graph g;
  g.param(unused);
  g.backward(ntlab::testing::reduce(g, tanh(g.param(used))));
  for (double v : unused.grad.data()) CHECK(v == 0.0);
}

TEST_CASE("backward needs a scalar loss") {
  Graph g;
  Var x = g.variable(random_tensor(2, 2, 6));
  CHECK_THROWS_AS(g.backward(tanh(x)), ContractError);
}

TEST_CASE("grad_reverse") {
  SUBCASE("forward identity") {
    Graph g;
    const Tensor x = Tensor::row({1.5, -2.0});
    CHECK(grad_reverse(g.variable(x), 0.3).value() == x);
  }
  SUBCASE("mu = 0 blocks the gradient") {
    Graph g;
    Var x = g.variable(Tensor::row({1.0, 2.0}));
    g.backward(grad_reverse(x, 0.0), Tensor::row({5.0, -3.0}));
    CHECK(g.grad(x)[0] == 0.0);
    CHECK(g.grad(x)[1] == 0.0);
  }
  SUBCASE("mu = 0.5 maps g to -g/2") {
    Graph g;
    Var x = g.variable(Tensor::row({1.0, 2.0}));
    g.backward(grad_reverse(x, 0.5), Tensor::row({2.0, -4.0}));
    CHECK(g.grad(x)[0] == -1.0);
    CHECK(g.grad(x)[1] == 2.0);
  }
  SUBCASE("negative mu") {
    Graph g;
    CHECK_THROWS_AS(grad_reverse(g.variable(Tensor::scalar(1.0)), -0.1), ConfigError);
  }
}

TEST_CASE("stop_grad") {
  Graph g;
  Var x = g.variable(Tensor::scalar(0.3));
  Var s = stop_grad(x);
  CHECK(s.value().item() == 0.3);
  g.backward(s, Tensor::scalar(7.0));
  CHECK(g.grad(x).item() == 0.0);

  Graph h;
  Var y = h.variable(Tensor::scalar(2.0));
  h.backward(mul(stop_grad(y), y));
  CHECK(h.grad(y).item() == 2.0);
}

TEST_CASE("finite_diff_check on simple functions") {
  const Tensor p = random_tensor(2, 3, 7);
  auto quadratic = [](Graph& g, Var x) { return ntlab::testing::reduce(g, mul(x, x)); };
  auto linear = [](Graph& g, Var x) { return ntlab::testing::reduce(g, scale(x, 3.0)); };
  auto curved = [](Graph& g, Var x) { return ntlab::testing::reduce(g, tanh(scale(x, 2.0))); };
  CHECK(finite_diff_check(quadratic, p, 1e-6) < 1e-7);
  CHECK(finite_diff_check(linear, p, 1e-6) < 1e-9);
  CHECK(finite_diff_check(curved, p, 1e-6) < 1e-5);
}

TEST_CASE("finite_diff_check errors") {
  auto f = [](Graph& g, Var x) { return ntlab::testing::reduce(g, x); };
  CHECK_THROWS_AS(finite_diff_check(f, Tensor::scalar(1.0), 0.0), ConfigError);
  const Tensor bad = Tensor::scalar(std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(finite_diff_check(f, bad, 1e-6), OracleError);
}

TEST_CASE("every primitive and composite passes the gradient check") {
  for (const auto& c : ntlab::testing::all_gradient_cases()) {
    CAPTURE(c.name);
    CHECK(c.run() < ntlab::testing::kGradTolerance);
  }
}

TEST_CASE("backward is linear in the upstream gradient") {
  const Tensor x0 = random_tensor(3, 4, 8);
  const Tensor w = random_tensor(4, 2, 9);
  const Tensor g1 = random_tensor(3, 2, 10), g2 = random_tensor(3, 2, 11);
  auto grad_for = [&](const Tensor& up) {
    Graph g;
    Var x = g.variable(x0);
    g.backward(sigmoid(matmul(tanh(x), g.constant(w))), up);
    return g.grad(x);
  };
  Tensor sum = g1;
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += g2[i];
  const Tensor a = grad_for(g1), b = grad_for(g2), ab = grad_for(sum);
  for (std::size_t i = 0; i < ab.size(); ++i) CHECK(ab[i] == doctest::Approx(a[i] + b[i]).epsilon(1e-12));
}

TEST_CASE("repeated backward passes are bitwise identical") {
  Graph g;
  Var x = g.variable(random_tensor(3, 3, 12));
  Var loss = ntlab::testing::reduce(g, tanh(mul(x, x)));
  g.backward(loss);
  const Tensor first = g.grad(x);
  g.zero_grad();
  g.backward(loss);
  CHECK(g.grad(x) == first);
}

TEST_CASE("shape errors") {
  Graph g;
  Var a = g.variable(random_tensor(2, 3, 13));
  Var b = g.variable(random_tensor(2, 2, 14));
  CHECK_THROWS_AS(matmul(a, b), ShapeError);
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(add_row(a, b), ShapeError);
  CHECK_THROWS_AS(concat_cols(a, g.variable(random_tensor(3, 1, 15))), ShapeError);
  CHECK_THROWS_AS(softmax_xent(a, {0}), ShapeError);
  CHECK_THROWS_AS(softmax_xent(a, {0, 3}), DomainError);
}

TEST_CASE("log rejects non-positive input") {
  Graph g;
  CHECK_THROWS_AS(log(g.variable(Tensor::row({1.0, 0.0}))), DomainError);
}

TEST_CASE("fused losses stay finite at extreme logits") {
  Graph g;
  Var z = g.variable(Tensor::matrix(2, 1, {800.0, -800.0}));
  Var l = bce_logits(z, {0.0, 1.0});
  CHECK(l.value().all_finite());
  CHECK(l.value()[0] == doctest::Approx(800.0));
  Var s = softmax_xent(g.variable(Tensor::matrix(1, 3, {1000.0, 0.0, -1000.0})), {2});
  CHECK(s.value().item() == doctest::Approx(2000.0));
}

TEST_CASE("clamped_odds") {
  Graph g;
  Var d = g.variable(Tensor::row({0.5, 0.8, 1.0 - 1e-12, 0.0}));
  const Tensor o = clamped_odds(d, 1e-3).value();
  CHECK(o[0] == 1.0);
  CHECK(o[1] == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(o[2] == doctest::Approx(999.0).epsilon(1e-12));
  CHECK(o[3] == doctest::Approx(1.0 / 999.0).epsilon(1e-12));
}
