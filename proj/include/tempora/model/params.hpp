#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tempora/common/rng.hpp"
#include "tempora/numerics/tape.hpp"
#include "tempora/numerics/tensor.hpp"

namespace tempora::model {

struct Parameter {
    std::string name;
    numerics::Tensor value;
    bool operator==(const Parameter&) const = default;
};

// Named parameter arrays in a fixed registration order.
class ParameterSet {
public:
    std::size_t add(std::string name, numerics::Tensor value);
    // Glorot-uniform matrix with the given fans.
    std::size_t add_glorot(std::string name, numerics::Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

    std::size_t size() const { return params_.size(); }
    std::size_t scalar_count() const;
    Parameter& operator[](std::size_t i) { return params_[i]; }
    const Parameter& operator[](std::size_t i) const { return params_[i]; }
    std::size_t index(std::string_view name) const;
    const numerics::Tensor& get(std::string_view name) const { return params_[index(name)].value; }
    numerics::Tensor& get(std::string_view name) { return params_[index(name)].value; }

    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }

    // Leaves on `tape`, one per parameter, in registration order.
    std::vector<numerics::Var> bind(numerics::Tape& tape) const;
    bool all_finite() const;
    bool operator==(const ParameterSet&) const = default;

private:
    std::vector<Parameter> params_;
};

double glorot_bound(std::size_t fan_in, std::size_t fan_out);

} // namespace tempora::model
