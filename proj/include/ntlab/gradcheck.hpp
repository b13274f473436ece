#pragma once

#include <functional>
#include <span>

#include "ntlab/autodiff.hpp"

namespace ntlab::ad {

/// Builds a scalar from a leaf holding the point being differentiated.
using LeafFunction = std::function<Var(Graph&, Var)>;
/// Builds a scalar from the current parameter values.
using ParamFunction = std::function<Var(Graph&)>;

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
/// Throws OracleError on a non-finite evaluation and ConfigError when h <= 0.
double finite_diff_check(const LeafFunction& f, const Tensor& point, double h);

/// Same measure over every entry of a set of parameters.
double finite_diff_check(const ParamFunction& f, std::span<Parameter* const> params, double h);

/// Variant where the differentiated graph and the evaluated scalar differ.
/// Used for graphs routed through grad_reverse, whose gradient is the
/// derivative of a different scalar than the one they compute.
double finite_diff_check(const ParamFunction& analytic, const std::function<double()>& numeric,
                         std::span<Parameter* const> params, double h);

}  // namespace ntlab::ad
