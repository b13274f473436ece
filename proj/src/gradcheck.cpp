#include "ntlab/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ntlab/errors.hpp"

namespace ntlab::ad {

namespace {

void check_step(double h) {
  if (!(h > 0.0)) throw ConfigError("finite_diff_check: step h must be positive");
}

double finite(double v) {
  if (!std::isfinite(v)) throw OracleError("finite_diff_check: non-finite function value");
  return v;
}

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace

double finite_diff_check(const LeafFunction& f, const Tensor& point, double h) {
  check_step(h);
  Tensor analytic;
  {
    Graph g;
    Var x = g.variable(point);
    Var y = f(g, x);
    finite(y.value().item());
    g.backward(y);
    analytic = g.grad(x);
  }
  auto eval = [&](const Tensor& p) {
    Graph g;
    return finite(f(g, g.variable(p)).value().item());
  };
  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + h;
    const double up = eval(probe);
    probe[i] = point[i] - h;
    const double down = eval(probe);
    probe[i] = point[i];
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

double finite_diff_check(const ParamFunction& analytic, const std::function<double()>& numeric,
                         std::span<Parameter* const> params, double h) {
  check_step(h);
  for (Parameter* p : params) p->zero_grad();
  {
    Graph g;
    Var y = analytic(g);
    finite(y.value().item());
    g.backward(y);
  }
  double worst = 0.0;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = finite(numeric());
      p->value[i] = saved - h;
      const double down = finite(numeric());
      p->value[i] = saved;
      worst = std::max(worst, relative_error(p->grad[i], (up - down) / (2.0 * h)));
    }
  }
  return worst;
}

double finite_diff_check(const ParamFunction& f, std::span<Parameter* const> params, double h) {
  auto numeric = [&f] {
    Graph g;
    return f(g).value().item();
  };
  return finite_diff_check(f, numeric, params, h);
}

}  // namespace ntlab::ad
