#pragma once

#include <functional>
#include <vector>

#include "unica/tape.hpp"
#include "unica/tensor.hpp"

namespace unica {

// Builds a scalar on the given tape from the current parameter values.
using ScalarFn = std::function<Var(Tape&)>;

enum class Stencil {
    central2,  // (f(x + h) - f(x - h)) / 2h
    central4,  // (-f(x + 2h) + 8 f(x + h) - 8 f(x - h) + f(x - 2h)) / 12h
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t worst_param = 0;  // index into the params list
    std::size_t worst_index = 0;  // flat coordinate within that parameter
    std::size_t coordinates = 0;
};

/// Compares reverse-mode gradients of `f` against central differences for
/// every coordinate of every parameter.
///
/// Error per coordinate is |analytic - numeric| / max(1e-8, |numeric|).
/// Parameter values are restored afterwards; grads are left holding the
/// analytic gradient. Throws NumericError if f evaluates to a non-finite value.
GradCheckResult finite_diff_check(const ScalarFn& f, const std::vector<Parameter*>& params, double h = 1e-6,
                                  Stencil stencil = Stencil::central2);

}  // namespace unica
