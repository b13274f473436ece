#pragma once

// Finite-difference checks over every primitive op and every composite loss.
// Shared by the unit tests and the acceptance binary.

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ntlab/gradcheck.hpp"
#include "ntlab/networks.hpp"
#include "ntlab/objectives.hpp"

namespace ntlab::testing {

inline constexpr double kGradStep = 1e-6;
inline constexpr double kGradTolerance = 1e-5;

struct GradCase {
  std::string name;
  std::function<double()> run;  // max relative error
};

inline Tensor random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -1.0,
                            double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Entries with |v| in [0.2, 1] and random sign, away from the relu kink.
inline Tensor off_zero_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(0.2, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t = Tensor::zeros(rows, cols);
  for (double& v : t.data()) v = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

/// Generic linear functional of v: sum_ij w_ij v_ij / rows, as a 1x1 node.
inline ad::Var reduce(ad::Graph& g, ad::Var v, std::uint64_t seed = 99) {
  const std::size_t rows = v.value().rows(), cols = v.value().cols();
  ad::Var w = g.constant(random_tensor(rows, cols, seed));
  ad::Var ones = g.constant(Tensor({cols, 1}, 1.0));
  return ad::matmul(ad::mean_rows(ad::mul(v, w)), ones);
}

inline ModelDims small_dims() { return {2, 5, 4, 6, 3}; }

inline Batches small_batches(std::uint64_t seed) {
  Batches b;
  b.source.x = random_tensor(5, 2, seed + 1, -2.0, 2.0);
  b.source.y = {0, 2, 1, 1, 0};
  b.source.perturbed = {false, true, false, false, true};
  b.target_labeled.x = random_tensor(3, 2, seed + 2, -2.0, 2.0);
  b.target_labeled.y = {2, 0, 1};
  b.target_unlabeled = random_tensor(4, 2, seed + 3, -2.0, 2.0);
  return b;
}

namespace detail {

inline double leaf_case(const std::function<ad::Var(ad::Graph&, ad::Var)>& op, const Tensor& point) {
  return ad::finite_diff_check([&](ad::Graph& g, ad::Var x) { return reduce(g, op(g, x)); }, point, kGradStep);
}

inline double scalar_of(const std::function<ad::Var(ad::Graph&)>& f) {
  ad::Graph g;
  return f(g).value().item();
}

// Source gate weights at the current parameters, as a plain tensor.
inline Tensor frozen_omega(ModelTriple& m, const Batches& b) {
  ad::Graph g;
  const Embedded e = embed(g, m.F, b);
  return gate_weights(g, m.D, e.source, b.source.y).omega.value();
}

inline double gated_value(ModelTriple& m, const Batches& b, const Tensor& omega, double lambda) {
  ad::Graph g;
  const Embedded e = embed(g, m.F, b);
  return gated_clf_loss(g, m.C, e, b, g.constant(omega), lambda).value().item();
}

inline std::vector<ad::Parameter*> params_of(ModelTriple& m, char net) {
  std::vector<ad::Parameter*> out;
  for (ad::Parameter* p : m.parameters()) {
    if (p->name.front() == net) out.push_back(p);
  }
  return out;
}

}  // namespace detail

inline std::vector<GradCase> primitive_cases() {
  using namespace ad;
  using detail::leaf_case;
  const Tensor a = random_tensor(4, 3, 11);
  const Tensor b = random_tensor(4, 3, 12);
  const Tensor w = random_tensor(3, 5, 13);
  const Tensor row = random_tensor(1, 3, 14);
  const Tensor logits = random_tensor(4, 3, 15, -2.0, 2.0);
  const std::vector<int> labels = {2, 0, 1, 2};
  const Tensor z = random_tensor(4, 1, 16, -3.0, 3.0);
  const std::vector<double> targets = {1.0, 0.0, 0.3, 1.0};
  const double mu = 0.7;

  std::vector<GradCase> cases;
  auto add_case = [&](std::string name, std::function<double()> run) { cases.push_back({std::move(name), std::move(run)}); };

  add_case("matmul lhs", [=] { return leaf_case([=](Graph& g, Var x) { return matmul(x, g.constant(w)); }, a); });
  add_case("matmul rhs", [=] { return leaf_case([=](Graph& g, Var x) { return matmul(g.constant(a), x); }, w); });
  add_case("add", [=] { return leaf_case([=](Graph& g, Var x) { return add(x, g.constant(b)); }, a); });
  add_case("add_row matrix", [=] { return leaf_case([=](Graph& g, Var x) { return add_row(x, g.constant(row)); }, a); });
  add_case("add_row row", [=] { return leaf_case([=](Graph& g, Var x) { return add_row(g.constant(a), x); }, row); });
  add_case("sub lhs", [=] { return leaf_case([=](Graph& g, Var x) { return sub(x, g.constant(b)); }, a); });
  add_case("sub rhs", [=] { return leaf_case([=](Graph& g, Var x) { return sub(g.constant(a), x); }, b); });
  add_case("mul", [=] { return leaf_case([=](Graph& g, Var x) { return mul(x, g.constant(b)); }, a); });
  add_case("mul self", [=] { return leaf_case([](Graph&, Var x) { return mul(x, x); }, a); });
  add_case("scale", [=] { return leaf_case([](Graph&, Var x) { return scale(x, -2.5); }, a); });
  add_case("tanh", [=] { return leaf_case([](Graph&, Var x) { return tanh(x); }, logits); });
  add_case("relu", [] { return leaf_case([](Graph&, Var x) { return relu(x); }, off_zero_tensor(4, 3, 17)); });
  add_case("sigmoid", [=] { return leaf_case([](Graph&, Var x) { return sigmoid(x); }, logits); });
  add_case("log", [] { return leaf_case([](Graph&, Var x) { return log(x); }, random_tensor(4, 3, 18, 0.5, 2.0)); });
  add_case("mean_rows", [=] { return leaf_case([](Graph&, Var x) { return mean_rows(x); }, a); });
  add_case("softmax_xent", [=] { return leaf_case([=](Graph&, Var x) { return softmax_xent(x, labels); }, logits); });
  add_case("bce_logits", [=] { return leaf_case([=](Graph&, Var x) { return bce_logits(x, targets); }, z); });
  add_case("concat_cols lhs", [=] { return leaf_case([=](Graph& g, Var x) { return concat_cols(x, g.constant(z)); }, a); });
  add_case("concat_cols rhs", [=] { return leaf_case([=](Graph& g, Var x) { return concat_cols(g.constant(a), x); }, z); });
  add_case("clamped_odds", [] {
    return leaf_case([](Graph&, Var x) { return clamped_odds(x, 1e-3); }, random_tensor(4, 3, 19, 0.1, 0.9));
  });
  // The reversed gradient is the derivative of -mu times the forward value.
  add_case("grad_reverse", [=] {
    Parameter p("p", a);
    std::vector<Parameter*> ps = {&p};
    return finite_diff_check([&](Graph& g) { return reduce(g, grad_reverse(g.param(p), mu)); },
                             [&] { return -mu * detail::scalar_of([&](Graph& g) { return reduce(g, g.param(p)); }); },
                             ps, kGradStep);
  });
  add_case("stop_grad", [=] {
    Parameter p("p", a);
    std::vector<Parameter*> ps = {&p};
    return finite_diff_check([&](Graph& g) { return reduce(g, stop_grad(g.param(p))); }, [] { return 0.0; }, ps,
                             kGradStep);
  });
  return cases;
}

inline std::vector<GradCase> composite_cases() {
  std::vector<GradCase> cases;
  const double mu = 0.6;
  const double lambda = 0.8;

  cases.push_back({"classification loss", [] {
                     ModelTriple m = ModelTriple::init(small_dims(), 21);
                     const Batches b = small_batches(21);
                     return ad::finite_diff_check([&](ad::Graph& g) { return clf_loss(g, m, b); }, m.parameters(),
                                                  kGradStep);
                   }});

  // Descending the reversed value moves D up the value and F down mu times it.
  auto adversarial = [mu](bool augmented, std::uint64_t seed) {
    ModelTriple m = ModelTriple::init(small_dims(), seed);
    const Batches b = small_batches(seed);
    auto graph = [&](ad::Graph& g) { return augmented ? aug_adv_loss(g, m, b, mu) : marginal_adv_loss(g, m, b, mu); };
    auto value = [&] { return detail::scalar_of(graph); };
    const auto d = detail::params_of(m, 'D');
    const auto f = detail::params_of(m, 'F');
    const double err_d = ad::finite_diff_check(graph, value, d, kGradStep);
    const double err_f = ad::finite_diff_check(graph, [&] { return -mu * value(); }, f, kGradStep);
    return std::max(err_d, err_f);
  };
  cases.push_back({"marginal adversarial loss", [=] { return adversarial(false, 22); }});
  cases.push_back({"augmented adversarial loss", [=] { return adversarial(true, 23); }});

  // omega sits behind stop_grad: compare against the loss with omega frozen.
  cases.push_back({"gated classification loss", [=] {
                     ModelTriple m = ModelTriple::init(small_dims(), 24);
                     const Batches b = small_batches(24);
                     const Tensor omega = detail::frozen_omega(m, b);
                     return ad::finite_diff_check([&](ad::Graph& g) { return gated_clf_loss(g, m, b, lambda); },
                                                  [&] { return detail::gated_value(m, b, omega, lambda); },
                                                  m.parameters(), kGradStep);
                   }});

  auto total = [=](Variant v, std::uint64_t seed) {
    ModelTriple m = ModelTriple::init(small_dims(), seed);
    const Batches b = small_batches(seed);
    ObjectiveOptions opts;
    opts.mu = mu;
    opts.lambda = lambda;
    const bool gated = wiring_for(v).gated;
    const Tensor omega = gated ? detail::frozen_omega(m, b) : Tensor();
    auto graph = [&](ad::Graph& g) { return total_objective(g, m, b, v, opts).objective; };
    auto clf = [&] {
      return gated ? detail::gated_value(m, b, omega, lambda)
                   : detail::scalar_of([&](ad::Graph& g) { return clf_loss(g, m, b); });
    };
    auto adv = [&] {
      return detail::scalar_of([&](ad::Graph& g) { return gated ? aug_adv_loss(g, m, b) : marginal_adv_loss(g, m, b); });
    };
    std::vector<ad::Parameter*> fc = detail::params_of(m, 'F');
    for (ad::Parameter* p : detail::params_of(m, 'C')) fc.push_back(p);
    const double err_fc = ad::finite_diff_check(graph, [&] { return clf() + mu * adv(); }, fc, kGradStep);
    const double err_d = ad::finite_diff_check(graph, [&] { return -adv(); }, detail::params_of(m, 'D'), kGradStep);
    return std::max(err_fc, err_d);
  };
  cases.push_back({"total objective (base)", [=] { return total(Variant::base, 25); }});
  cases.push_back({"total objective (gate)", [=] { return total(Variant::gate, 26); }});
  return cases;
}

inline std::vector<GradCase> all_gradient_cases() {
  std::vector<GradCase> cases = primitive_cases();
  for (GradCase& c : composite_cases()) cases.push_back(std::move(c));
  return cases;
}

}  // namespace ntlab::testing
