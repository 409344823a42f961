#include "unica/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "unica/errors.hpp"

namespace unica {
namespace {

double evaluate(const ScalarFn& f) {
    Tape tape(false);
    const double v = f(tape).value().item();
    if (!std::isfinite(v)) throw NumericError("finite_diff_check: function value is not finite");
    return v;
}

}  // namespace

GradCheckResult finite_diff_check(const ScalarFn& f, const std::vector<Parameter*>& params, double h, Stencil stencil) {
    for (auto* p : params) p->zero_grad();
    {
        Tape tape;
        Var loss = f(tape);
        if (!std::isfinite(loss.value().item())) throw NumericError("finite_diff_check: function value is not finite");
        tape.backward(loss);
    }
    GradCheckResult res;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = *params[pi];
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double orig = p.value[i];
            auto at = [&](double step) {
                p.value[i] = orig + step;
                const double v = evaluate(f);
                p.value[i] = orig;
                return v;
            };
            const double numeric = stencil == Stencil::central2
                                       ? (at(h) - at(-h)) / (2.0 * h)
                                       : (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            const double analytic = p.frozen ? 0.0 : p.grad[i];
            const double abs_err = std::abs(analytic - numeric);
            const double err = abs_err / std::max(1e-8, std::abs(numeric));
            res.max_abs_error = std::max(res.max_abs_error, abs_err);
            ++res.coordinates;
            if (err > res.max_rel_error) {
                res.max_rel_error = err;
                res.worst_param = pi;
                res.worst_index = i;
            }
        }
    }
    return res;
}

}  // namespace unica
