#include "tempora/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tempora::numerics {
namespace {

double evaluate(const MultiScalarFn& f, const std::vector<Tensor>& inputs) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const Tensor& t : inputs) vars.push_back(tape.constant(t));
    return f(tape, vars).item();
}

} // namespace

GradCheckResult finite_difference_check(const MultiScalarFn& f, const std::vector<Tensor>& inputs, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("finite_difference_check: eps must be positive");

    std::vector<Tensor> analytic;
    {
        Tape tape;
        std::vector<Var> vars;
        for (const Tensor& t : inputs) vars.push_back(tape.leaf(t));
        const Var loss = f(tape, vars);
        tape.backward(loss);
        for (const Var& v : vars) analytic.push_back(tape.grad(v));
    }

    GradCheckResult result;
    std::vector<Tensor> probe = inputs;
    for (std::size_t in = 0; in < inputs.size(); ++in) {
        for (std::size_t i = 0; i < inputs[in].size(); ++i) {
            const double x0 = inputs[in][i];
            probe[in][i] = x0 + eps;
            const double fp = evaluate(f, probe);
            probe[in][i] = x0 - eps;
            const double fm = evaluate(f, probe);
            probe[in][i] = x0;
            const double numeric = (fp - fm) / (2.0 * eps);
            const double err = std::abs(analytic[in][i] - numeric) / std::max(1.0, std::abs(numeric));
            if (err > result.max_error || std::isnan(err)) {
                result.max_error = err;
                result.worst_input = in;
                result.worst_index = i;
            }
            ++result.coordinates;
        }
    }
    return result;
}

GradCheckResult finite_difference_check(const ScalarFn& f, const Tensor& x, double eps) {
    return finite_difference_check(
        [&f](Tape& tape, std::span<const Var> vars) { return f(tape, vars[0]); }, std::vector<Tensor>{x}, eps);
}

} // namespace tempora::numerics
