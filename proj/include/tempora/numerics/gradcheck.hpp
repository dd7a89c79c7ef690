#pragma once

#include <functional>
#include <span>
#include <vector>

#include "tempora/numerics/tape.hpp"

namespace tempora::numerics {

struct GradCheckResult {
    // max over coordinates of |analytic - numeric| / max(1, |numeric|)
    double max_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    std::size_t coordinates = 0;
};

using ScalarFn = std::function<Var(Tape&, Var)>;
using MultiScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

// Compares reverse-mode gradients with central differences
// (f(x + eps e_i) - f(x - eps e_i)) / 2 eps at every coordinate.
GradCheckResult finite_difference_check(const ScalarFn& f, const Tensor& x, double eps);
GradCheckResult finite_difference_check(const MultiScalarFn& f, const std::vector<Tensor>& inputs, double eps);

} // namespace tempora::numerics
