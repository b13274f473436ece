#include <cmath>

#include "doctest.h"
#include "ntlab/errors.hpp"
#include "ntlab/objectives.hpp"
#include "support/gradient_suite.hpp"

using namespace ntlab;
using ntlab::testing::random_tensor;
using ntlab::testing::small_batches;
using ntlab::testing::small_dims;

namespace {

double value_of(const std::function<ad::Var(ad::Graph&)>& f) {
  ad::Graph g;
  return f(g).value().item();
}

}  // namespace

TEST_CASE("classification loss of a uniform predictor is 2 ln 3") {
  ModelTriple m = ModelTriple::zeros(small_dims());
  const Batches b = small_batches(1);
  CHECK(value_of([&](ad::Graph& g) { return clf_loss(g, m, b); }) == doctest::Approx(2.0 * std::log(3.0)));
}

TEST_CASE("classification loss on a hand-set single example") {
  ad::Graph g;
  ad::Var logits = g.constant(Tensor::matrix(1, 3, {1.0, 2.0, 3.0}));
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0)));
  CHECK(ad::softmax_xent(logits, {0}).value().item() == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("near-perfect predictions drive the classification loss to zero") {
  ad::Graph g;
  ad::Var logits = g.constant(Tensor::matrix(2, 3, {60.0, 0.0, 0.0, 0.0, 0.0, 60.0}));
  const double l = ad::mean_rows(ad::softmax_xent(logits, {0, 2})).value().item();
  CHECK(l >= 0.0);
  CHECK(l < 1e-20);
}

TEST_CASE("classification loss needs at least one labeled batch") {
  ModelTriple m = ModelTriple::init(small_dims(), 1);
  Batches b;
  b.target_unlabeled = random_tensor(3, 2, 1);
  ad::Graph g;
  CHECK_THROWS_AS(clf_loss(g, m, b), ContractError);
}

TEST_CASE("adversarial values with D fixed at one half") {
  ModelTriple m = ModelTriple::zeros(small_dims());
  const Batches b = small_batches(2);
  CHECK(value_of([&](ad::Graph& g) { return marginal_adv_loss(g, m, b); }) ==
        doctest::Approx(2.0 * std::log(0.5)));
  CHECK(value_of([&](ad::Graph& g) { return aug_adv_loss(g, m, b); }) == doctest::Approx(4.0 * std::log(0.5)));
}

TEST_CASE("the GAN value is bounded above by zero") {
  ModelTriple m = ModelTriple::init(small_dims(), 3);
  for (double& v : m.D.out.weight.value.data()) v *= 30.0;
  const Batches b = small_batches(3);
  CHECK(value_of([&](ad::Graph& g) { return marginal_adv_loss(g, m, b); }) < 0.0);
  CHECK(value_of([&](ad::Graph& g) { return aug_adv_loss(g, m, b); }) < 0.0);
}

TEST_CASE("augmented loss without labeled target adds only the source joint term") {
  ModelTriple m = ModelTriple::init(small_dims(), 4);
  Batches b = small_batches(4);
  b.target_labeled = {};
  const double aug = value_of([&](ad::Graph& g) { return aug_adv_loss(g, m, b); });
  const double marginal = value_of([&](ad::Graph& g) { return marginal_adv_loss(g, m, b); });
  const double joint_source = value_of([&](ad::Graph& g) {
    return adversarial_loss(g, m.D, embed(g, m.F, b), b, AdvTerms{false, false, false, true});
  });
  CHECK(aug == doctest::Approx(marginal + joint_source).epsilon(1e-13));
}

TEST_CASE("augmented loss restricted to nil terms equals the marginal loss") {
  ModelTriple m = ModelTriple::init(small_dims(), 5);
  const Batches b = small_batches(5);
  const double nil_only = value_of(
      [&](ad::Graph& g) { return adversarial_loss(g, m.D, embed(g, m.F, b), b, AdvTerms::marginal()); });
  CHECK(nil_only == value_of([&](ad::Graph& g) { return marginal_adv_loss(g, m, b); }));
}

TEST_CASE("adversarial loss with no active term is an error") {
  ModelTriple m = ModelTriple::init(small_dims(), 6);
  const Batches b = small_batches(6);
  ad::Graph g;
  CHECK_THROWS_AS(adversarial_loss(g, m.D, embed(g, m.F, b), b, AdvTerms::none()), ConfigError);
}

TEST_CASE("omega from d") {
  CHECK(omega_from_d(0.5) == 1.0);
  CHECK(omega_from_d(0.8) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(omega_from_d(1.0 - 1e-12) == doctest::Approx(999.0).epsilon(1e-12));
  CHECK(omega_from_d(1e-12) == doctest::Approx(1.0 / 999.0).epsilon(1e-12));
  double prev = 0.0;
  for (double d = 1e-3; d <= 1.0 - 1e-3; d += 1e-3) {
    const double w = omega_from_d(d);
    CHECK(w > prev);
    prev = w;
  }
}

TEST_CASE("gate_weight rejects the nil label") {
  const ModelTriple m = ModelTriple::init(small_dims(), 7);
  CHECK_THROWS_AS(gate_weight(m.D, m.F, {0.0, 0.0}, std::nullopt), ContractError);
  const GateWeight w = gate_weight(m.D, m.F, {0.0, 0.0}, 1);
  CHECK(w.omega == doctest::Approx(omega_from_d(w.raw_d)).epsilon(1e-15));
}

TEST_CASE("gated loss reduces to the plain loss at omega 1 and lambda 1") {
  ModelTriple m = ModelTriple::init(small_dims(), 8);
  for (ad::Parameter* p : m.parameters()) {
    if (p->name.front() == 'D') p->value.fill(0.0);
  }
  const Batches b = small_batches(8);
  CHECK(value_of([&](ad::Graph& g) { return gated_clf_loss(g, m, b, 1.0); }) ==
        value_of([&](ad::Graph& g) { return clf_loss(g, m, b); }));
}

TEST_CASE("gated loss with lambda 0 is the labeled target term") {
  ModelTriple m = ModelTriple::init(small_dims(), 9);
  const Batches b = small_batches(9);
  Batches target_only = b;
  target_only.source = {};
  CHECK(value_of([&](ad::Graph& g) { return gated_clf_loss(g, m, b, 0.0); }) ==
        doctest::Approx(value_of([&](ad::Graph& g) { return clf_loss(g, m, target_only); })).epsilon(1e-14));
}

TEST_CASE("gated source term with omegas 2 and 0") {
  ModelTriple m = ModelTriple::init(small_dims(), 10);
  Batches b;
  b.source.x = random_tensor(2, 2, 10);
  b.source.y = {1, 2};
  ad::Graph g;
  const Embedded e = embed(g, m.F, b);
  const Tensor per = ad::softmax_xent(classifier_logits(g, m.C, e.source), b.source.y).value();
  ad::Var omega = g.constant(Tensor::matrix(2, 1, {2.0, 0.0}));
  const double got = gated_clf_loss(g, m.C, e, b, omega, 1.0).value().item();
  CHECK(got == doctest::Approx((2.0 * per[0] + 0.0) / 2.0).epsilon(1e-14));
}

TEST_CASE("no gradient reaches D through omega") {
  ModelTriple m = ModelTriple::init(small_dims(), 11);
  const Batches b = small_batches(11);
  m.zero_grad();
  {
    ad::Graph g;
    g.backward(gated_clf_loss(g, m, b, 1.0));
  }
  for (ad::Parameter* p : m.parameters()) {
    if (p->name.front() != 'D') continue;
    for (double v : p->grad.data()) CHECK(v == 0.0);
  }
  // The weights themselves do depend on D.
  auto omegas = [&] {
    ad::Graph g;
    return gate_weights(g, m.D, embed(g, m.F, b).source, b.source.y).omega.value();
  };
  const Tensor before = omegas();
  m.D.out.bias.value[0] += 0.5;
  CHECK_FALSE(omegas() == before);
}

TEST_CASE("total objective") {
  ModelTriple m = ModelTriple::init(small_dims(), 12);
  const Batches b = small_batches(12);
  const double clf = value_of([&](ad::Graph& g) { return clf_loss(g, m, b); });
  const double adv = value_of([&](ad::Graph& g) { return marginal_adv_loss(g, m, b); });

  SUBCASE("mu = 0 leaves the classification loss") {
    ad::Graph g;
    ObjectiveOptions o;
    o.mu = 0.0;
    const LossBundle l = total_objective(g, m, b, Variant::base, o);
    CHECK(l.total == clf);
  }
  SUBCASE("base uses the plain and marginal terms") {
    ad::Graph g;
    ObjectiveOptions o;
    o.mu = 0.4;
    const LossBundle l = total_objective(g, m, b, Variant::base, o);
    CHECK(l.clf_loss == doctest::Approx(clf).epsilon(1e-14));
    CHECK(l.adv_loss == doctest::Approx(adv).epsilon(1e-14));
    CHECK(l.total == doctest::Approx(clf - 0.4 * adv).epsilon(1e-14));
    CHECK(l.omegas.empty());
  }
  SUBCASE("gate uses the gated and augmented terms") {
    ad::Graph g;
    ObjectiveOptions o;
    o.mu = 0.4;
    const LossBundle l = total_objective(g, m, b, Variant::gate, o);
    const double gated = value_of([&](ad::Graph& h) { return gated_clf_loss(h, m, b, 1.0); });
    const double aug = value_of([&](ad::Graph& h) { return aug_adv_loss(h, m, b); });
    CHECK(l.clf_loss == doctest::Approx(gated).epsilon(1e-14));
    CHECK(l.adv_loss == doctest::Approx(aug).epsilon(1e-14));
    CHECK(l.total == doctest::Approx(gated - 0.4 * aug).epsilon(1e-14));
    CHECK(l.omegas.size() == b.source.size());
  }
  SUBCASE("gate without warmup weights uses omega 1") {
    ad::Graph g;
    ObjectiveOptions o;
    o.gate_enabled = false;
    const LossBundle l = total_objective(g, m, b, Variant::gate, o);
    CHECK(l.clf_loss == doctest::Approx(clf).epsilon(1e-14));
  }
  SUBCASE("gated variants need a source batch") {
    Batches no_source = b;
    no_source.source = {};
    ad::Graph g;
    CHECK_THROWS_AS(total_objective(g, m, no_source, Variant::gate, {}), ConfigError);
  }
  SUBCASE("negative mu") {
    ad::Graph g;
    ObjectiveOptions o;
    o.mu = -1.0;
    CHECK_THROWS_AS(total_objective(g, m, b, Variant::base, o), ConfigError);
  }
}

TEST_CASE("losses stay finite for extreme inputs") {
  ModelTriple m = ModelTriple::init(small_dims(), 13);
  for (ad::Parameter* p : m.parameters()) {
    for (double& v : p->value.data()) v *= 40.0;
  }
  Batches b = small_batches(13);
  for (double& v : b.source.x.data()) v *= 1e3;
  for (double v : {value_of([&](ad::Graph& g) { return clf_loss(g, m, b); }),
                   value_of([&](ad::Graph& g) { return gated_clf_loss(g, m, b, 1.0); }),
                   value_of([&](ad::Graph& g) { return aug_adv_loss(g, m, b); })}) {
    CHECK(std::isfinite(v));
  }
}
