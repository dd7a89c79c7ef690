#include "tempora/model/params.hpp"

#include <cmath>
#include <stdexcept>

namespace tempora::model {

using numerics::Tensor;

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

std::size_t ParameterSet::add(std::string name, Tensor value) {
    for (const auto& p : params_) {
        if (p.name == name) throw std::invalid_argument("duplicate parameter name " + name);
    }
    params_.push_back({std::move(name), std::move(value)});
    return params_.size() - 1;
}

std::size_t ParameterSet::add_glorot(std::string name, numerics::Shape shape, std::size_t fan_in, std::size_t fan_out,
                                     Rng& rng) {
    const double bound = glorot_bound(fan_in, fan_out);
    Tensor t(std::move(shape), 0.0);
    for (double& v : t.values()) v = rng.uniform(-bound, bound);
    return add(std::move(name), std::move(t));
}

std::size_t ParameterSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

std::size_t ParameterSet::index(std::string_view name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name == name) return i;
    }
    throw std::out_of_range("unknown parameter " + std::string(name));
}

std::vector<numerics::Var> ParameterSet::bind(numerics::Tape& tape) const {
    std::vector<numerics::Var> vars;
    vars.reserve(params_.size());
    for (const auto& p : params_) vars.push_back(tape.leaf(p.value));
    return vars;
}

bool ParameterSet::all_finite() const {
    for (const auto& p : params_) {
        if (!p.value.all_finite()) return false;
    }
    return true;
}

} // namespace tempora::model
