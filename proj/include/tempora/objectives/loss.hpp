#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "tempora/model/hybrid.hpp"
#include "tempora/numerics/ops.hpp"

namespace tempora::objectives {

using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

enum class RewardKind { Smape, Cpoi };
RewardKind parse_reward_kind(std::string_view name);
std::string_view reward_kind_name(RewardKind k);

struct RlConfig {
    std::size_t actions = 11;
    double grid_low = 0.8;
    double grid_high = 1.25;
    double baseline_decay = 0.99;
    RewardKind reward = RewardKind::Smape;
    double price = 1.0; // CPOI reward only
    double cost = 0.5;
    std::vector<bool> mask; // empty, or one flag per action; false disables it
};

struct LossConfig {
    double l2 = 1e-4;
    double input_grad = 1e-3;
    double smoothness = 1e-3;
    double rl = 0.1;
    double entropy = -0.01; // sign is free; negative rewards exploration
    double flat = 0.0;
    double fd_eps = 1e-3;
    RlConfig policy;

    void validate() const;
    nlohmann::json to_json() const;
};

// K multipliers spaced evenly in log space over [low, high]; the grid must
// hit 1.0, which is then stored exactly.
std::vector<double> action_grid(std::size_t k, double low, double high);

// mean((preds - targets)^2)
Var mse(Var preds, const Tensor& targets);
// sum of squares over every entry of every parameter
Var l2_penalty(std::span<const Var> params);
// mean(((f(x + eps u) - f(x)) / eps)^2) over the entries of f. `fx` reuses an
// existing evaluation of f(x).
Var input_gradient_penalty(const std::function<Var(Var)>& f, Var x, const Tensor& u, double eps,
                           std::optional<Var> fx = {});
// Random direction per leading row of `shape`, unit norm over the rest.
Tensor unit_directions(const numerics::Shape& shape, std::uint64_t seed);
// mean over rows of sum_s (path[s+1] - path[s])^2; zero for a single column.
Var temporal_smoothness(Var path);
// -mean(log pi(a_b | s_b) * advantage_b); advantages are constants.
Var rl_policy_loss(Var logits, std::span<const std::size_t> actions, std::span<const double> advantages);
// mean over rows of -sum_a pi(a) log pi(a)
Var entropy_bonus(Var logits);
// Replaces disabled actions' logits with a large negative constant.
Var apply_action_mask(Var logits, const std::vector<bool>& mask);
// One draw per row from softmax(logits) by inverse CDF.
std::vector<std::size_t> sample_actions(const Tensor& logits, std::uint64_t seed);

// Reward of an adjusted forecast on one window, original units.
double reward(const RlConfig& cfg, std::span<const double> forecast, std::span<const double> actual, double multiplier);

// Running baseline R-hat: the first batch's mean reward, then an
// exponential moving average.
struct RewardBaseline {
    double value = 0.0;
    bool initialized = false;

    double reference(double batch_mean) const { return initialized ? value : batch_mean; }
    void update(double batch_mean, double decay);
    bool operator==(const RewardBaseline&) const = default;
};

struct PrimaryParts {
    Var mse, l2, input_grad, smooth;
};
// mse + l2*l2 + input_grad*penalty + smoothness*smooth
Var primary_loss(const PrimaryParts& parts, const LossConfig& cfg);
// primary + rl*L_RL + entropy*H + flat*F
Var total_loss(Var primary, Var rl_loss, Var entropy, Var flatness, const LossConfig& cfg);

struct StepSeeds {
    std::uint64_t direction = 0;
    std::uint64_t action = 0;
};

// Frozen policy sample; lets a caller replay a step with the same actions
// and advantages.
struct PolicySample {
    std::vector<std::size_t> actions;
    std::vector<double> rewards;
    std::vector<double> advantages;
};

struct BatchTerms {
    Var total, primary;
    PrimaryParts parts;
    Var rl, entropy, flat;
    PolicySample policy;
    double mean_reward = 0.0;
};

// Full objective for one batch. `fixed` replays a previous policy sample
// instead of drawing a new one.
BatchTerms batch_objective(Tape& tape, const model::HybridForecaster& model, std::span<const Var> p,
                           const model::Batch& batch, const LossConfig& cfg, const StepSeeds& seeds,
                           const RewardBaseline& baseline, const PolicySample* fixed = nullptr);

// Primary loss only; used for validation.
Var batch_primary(Tape& tape, const model::HybridForecaster& model, std::span<const Var> p, const model::Batch& batch,
                  const LossConfig& cfg, std::uint64_t direction_seed);

} // namespace tempora::objectives
