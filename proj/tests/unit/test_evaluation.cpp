#include <cmath>
#include <random>

#include "doctest.h"
#include "ntlab/errors.hpp"
#include "ntlab/evaluation.hpp"

using namespace ntlab;

namespace {

std::vector<Example> labeled_set(std::vector<std::pair<double, int>> pts) {
  std::vector<Example> out;
  for (auto [x, y] : pts) out.push_back({{x, 0.0}, y, false, false});
  return out;
}

// Class 0 when the first coordinate is negative, otherwise class 1.
Tensor sign_predictor(const Tensor& x) {
  Tensor p = Tensor::zeros(x.rows(), 2);
  for (std::size_t i = 0; i < x.rows(); ++i) p(i, x(i, 0) < 0.0 ? 0 : 1) = 1.0;
  return p;
}

TrainConfig quick() {
  TrainConfig c;
  c.steps = 60;
  c.hidden = 16;
  c.feature_dim = 8;
  c.disc_hidden = 16;
  c.seed = 2;
  return c;
}

}  // namespace

TEST_CASE("expected risk") {
  SUBCASE("perfect classifier") {
    const auto test = labeled_set({{-1, 0}, {-2, 0}, {1, 1}, {3, 1}});
    CHECK(expected_risk(Predictor(sign_predictor), test).risk == 0.0);
  }
  SUBCASE("one error in four") {
    const auto test = labeled_set({{-1, 0}, {-2, 1}, {1, 1}, {3, 1}});
    const RiskEstimate r = expected_risk(Predictor(sign_predictor), test);
    CHECK(r.risk == 0.25);
    CHECK(r.n_test == 4);
  }
  SUBCASE("random guessing over three classes") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> cls(0, 2);
    std::vector<Example> test;
    for (int i = 0; i < 9000; ++i) test.push_back({{0.0}, cls(rng), false, false});
    std::mt19937_64 guess(6);
    Predictor h = [&](const Tensor& x) {
      Tensor p = Tensor::zeros(x.rows(), 3);
      for (std::size_t i = 0; i < x.rows(); ++i) p(i, static_cast<std::size_t>(cls(guess))) = 1.0;
      return p;
    };
    const double sd = std::sqrt(9000.0 * (2.0 / 3.0) * (1.0 / 3.0)) / 9000.0;
    CHECK(std::abs(expected_risk(h, test).risk - 2.0 / 3.0) <= 4.0 * sd);
  }
  SUBCASE("cross-entropy") {
    Predictor h = [](const Tensor& x) { return Tensor(std::vector<std::size_t>{x.rows(), 2}, 0.5); };
    const RiskEstimate r = expected_risk(h, labeled_set({{0, 0}, {0, 1}}), LossKind::cross_entropy);
    CHECK(r.risk == doctest::Approx(std::log(2.0)));
  }
  SUBCASE("empty test set") {
    CHECK_THROWS_AS(expected_risk(Predictor(sign_predictor), {}), DomainError);
  }
}

TEST_CASE("reports pair risks and flag negative transfer") {
  const NTGReport worse = make_report({0.3, LossKind::zero_one, 10}, {0.2, LossKind::zero_one, 10}, Variant::base);
  CHECK(worse.ntg == doctest::Approx(0.1));
  CHECK(worse.ntc);
  const NTGReport same = make_report({0.2, LossKind::zero_one, 10}, {0.2, LossKind::zero_one, 10}, Variant::base);
  CHECK(same.ntg == 0.0);
  CHECK_FALSE(same.ntc);
}

TEST_CASE("the source-ignoring stub has a zero gap") {
  DomainSetup s = DomainSetup::standard();
  s.n_source = 200;
  s.n_target = 100;
  const DomainData d = make_domain_data(s, 0.7, 0.7, 30.0, 3);
  const NTGReport r = negative_transfer_gap(d, quick(), Variant::source_ignoring_stub);
  CHECK(r.ntg == 0.0);
  CHECK_FALSE(r.ntc);
}

TEST_CASE("weight statistics") {
  const DomainSetup s = DomainSetup::standard();
  const ModelTriple zero = ModelTriple::zeros({2, 4, 4, 4, 3});

  SUBCASE("untrained discriminator") {
    const DomainData d = make_domain_data(s, 0.5, 0.5, 10.0, 1);
    const WeightStats w = weight_stats(zero.D, zero.F, d.source);
    CHECK(*w.mean_omega_perturbed == 1.0);
    CHECK(*w.mean_omega_clean == 1.0);
    CHECK(w.d_histogram[kHistogramBins / 2] == d.source.size());
    CHECK(w.n_perturbed + w.n_clean == d.source.size());
  }
  SUBCASE("no perturbation leaves the perturbed group absent") {
    const DomainData d = make_domain_data(s, 0.0, 0.0, 10.0, 1);
    const WeightStats w = weight_stats(zero.D, zero.F, d.source);
    CHECK_FALSE(w.mean_omega_perturbed.has_value());
    CHECK(w.n_clean == d.source.size());
  }
}

TEST_CASE("ratio fit error") {
  const ScenarioSpec t = gaussian_1d(1.0, 1.0), s = gaussian_1d(-1.0, 1.0);
  const auto grid = ratio_grid(t, s, -2.0, 2.0, 101);
  REQUIRE(grid.size() == 101);
  RatioFunction half = [](const std::vector<double>&, int) { return 1.0; };

  SUBCASE("identical specs and d = 0.5") { CHECK(ratio_fit_error(half, t, t, grid) == 0.0); }
  SUBCASE("d = 0.5 against shifted Gaussians") {
    // r(x) = exp(2x), so |1 - r| / r = |exp(-2x) - 1|.
    double expected = 0.0;
    for (int i = 0; i <= 100; ++i) expected += std::abs(std::exp(-2.0 * (-2.0 + 0.04 * i)) - 1.0);
    expected /= 101.0;
    CHECK(ratio_fit_error(half, t, s, grid) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("the analytic discriminator has zero error") {
    RatioFunction exact = [](const std::vector<double>& x, int) { return std::exp(2.0 * x[0]); };
    CHECK(ratio_fit_error(exact, t, s, grid) < 1e-12);
  }
  SUBCASE("zero-parameter discriminator through the model overload") {
    const ModelTriple m = ModelTriple::zeros({1, 4, 4, 4, 1});
    CHECK(ratio_fit_error(m.D, m.F, t, t, grid) == 0.0);
  }
  SUBCASE("empty grid") { CHECK_THROWS_AS(ratio_fit_error(half, t, s, {}), DomainError); }
}

TEST_CASE("ratio grid applies the density floor") {
  const ScenarioSpec t = gaussian_1d(1.0, 1.0), s = gaussian_1d(-1.0, 1.0);
  const auto grid = ratio_grid(t, s, -4.0, 4.0, 101);
  CHECK(grid.size() < 101);
  for (const auto& [x, y] : grid) {
    CHECK(std::exp(log_joint_density(t, x, y)) > 1e-3);
    CHECK(std::exp(log_joint_density(s, x, y)) > 1e-3);
  }
}

TEST_CASE("seed summaries") {
  const SeedSummary s = summarize({1.0, 2.0, 3.0, 4.0});
  CHECK(s.mean == 2.5);
  CHECK(s.stddev == doctest::Approx(std::sqrt(5.0 / 3.0)));
  CHECK(s.stderr_ == doctest::Approx(std::sqrt(5.0 / 3.0) / 2.0));
  CHECK(summarize({7.0}).stddev == 0.0);
}

TEST_CASE("spearman") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3, 4}, {1, 1, 2, 3}) == doctest::Approx(0.9486832980505138));
}
