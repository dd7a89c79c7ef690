#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "tempora/common/error.hpp"
#include "tempora/dataset/panel.hpp"
#include "tempora/numerics/gradcheck.hpp"
#include "tempora/objectives/loss.hpp"

namespace tempora::objectives {
namespace {

using numerics::Shape;

Var c(Tape& t, Tensor v) { return t.constant(std::move(v)); }

TEST(Primary, PerfectFitWithZeroCoefficientsIsZero) {
    Tape t;
    const Var m = mse(c(t, Tensor::vector({1, 2, 3})), Tensor::vector({1, 2, 3}));
    LossConfig cfg{0, 0, 0, 0, 0, 0, 1e-3, {}};
    const Var z = c(t, Tensor::scalar(0.0));
    EXPECT_EQ(primary_loss({m, z, z, z}, cfg).item(), 0.0);
}

TEST(Primary, MseOfTwoPoints) {
    Tape t;
    EXPECT_EQ(mse(c(t, Tensor::vector({1, 4})), Tensor::vector({1, 2})).item(), 2.0);
}

TEST(Primary, L2OfSingleParameter) {
    Tape t;
    const Var theta = t.leaf(Tensor::vector({3.0}));
    LossConfig cfg{1.0, 0, 0, 0, 0, 0, 1e-3, {}};
    const Var z = c(t, Tensor::scalar(0.0));
    const Var l2 = l2_penalty(std::vector<Var>{theta});
    EXPECT_EQ(primary_loss({z, l2, z, z}, cfg).item(), 9.0);
    EXPECT_THROW(mse(c(t, Tensor()), Tensor()), Error);
}

TEST(InputGradient, ConstantFunctionHasNoPenalty) {
    Tape t;
    const Var x = t.leaf(Tensor::vector({0.3, -1.0}));
    const auto f = [&](Var) { return t.constant(Tensor::vector({5.0})); };
    EXPECT_EQ(input_gradient_penalty(f, x, unit_directions(Shape{1, 2}, 1), 1e-3).item(), 0.0);
}

TEST(InputGradient, LinearScalarFunctionGivesSlopeSquared) {
    for (double u : {1.0, -1.0}) {
        Tape t;
        const Var x = t.leaf(Tensor::vector({0.7}));
        const auto f = [&](Var xv) { return numerics::scale(xv, 2.5); };
        EXPECT_NEAR(input_gradient_penalty(f, x, Tensor::vector({u}), 1e-3).item(), 6.25, 1e-9);
    }
}

TEST(InputGradient, MonteCarloMeanForSumMatchesProjectedGradient) {
    // For f(x) = sum(x) in n dimensions, E[(1 . u)^2] over unit u is |1|^2 / n = 1.
    const std::size_t n = 12;
    const Tensor dirs = unit_directions(Shape{1000, n}, 99);
    double total = 0.0;
    for (std::size_t r = 0; r < 1000; ++r) {
        Tape t;
        const Var x = t.leaf(Tensor(Shape{n}, 0.5));
        Tensor u(Shape{n});
        std::copy(dirs.data() + r * n, dirs.data() + (r + 1) * n, u.data());
        total += input_gradient_penalty([](Var xv) { return numerics::sum(xv); }, x, u, 1e-3).item();
    }
    EXPECT_NEAR(total / 1000.0, 1.0, 0.15);
}

TEST(InputGradient, DirectionsAreUnitAndSeeded) {
    const Tensor a = unit_directions(Shape{3, 4, 5}, 7);
    EXPECT_EQ(a, unit_directions(Shape{3, 4, 5}, 7));
    EXPECT_NE(a, unit_directions(Shape{3, 4, 5}, 8));
    for (std::size_t r = 0; r < 3; ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < 20; ++i) s += a[r * 20 + i] * a[r * 20 + i];
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Smoothness, ForwardDifferencesPerRow) {
    Tape t;
    const Var path = c(t, Tensor::matrix({{1, 2, 4}, {0, 0, 0}}));
    EXPECT_EQ(temporal_smoothness(path).item(), (1.0 + 4.0) / 2.0);
    EXPECT_EQ(temporal_smoothness(c(t, Tensor::matrix({{3}, {4}}))).item(), 0.0);
}

TEST(Policy, ZeroAdvantageGivesZeroLoss) {
    Tape t;
    const Var logits = t.leaf(Tensor::matrix({{0.3, -1.0, 2.0}, {1.0, 1.0, 0.0}}));
    const std::vector<std::size_t> a{2, 0};
    EXPECT_EQ(rl_policy_loss(logits, a, std::vector<double>{0.0, 0.0}).item(), 0.0);
}

TEST(Policy, UniformPolicySingleSample) {
    Tape t;
    const Var logits = t.leaf(Tensor::matrix({{0.0, 0.0, 0.0}}));
    EXPECT_NEAR(rl_policy_loss(logits, std::vector<std::size_t>{1}, std::vector<double>{1.0}).item(), std::log(3.0),
                1e-15);
}

TEST(Policy, MaskedToIdentityLeavesForecastUnchanged) {
    const auto grid = action_grid(11, 0.8, 1.25);
    const std::size_t identity = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), 1.0) - grid.begin());
    ASSERT_LT(identity, grid.size());
    std::vector<bool> mask(11, false);
    mask[identity] = true;
    Tape t;
    const Var logits = apply_action_mask(t.leaf(Tensor(Shape{50, 11}, 0.4)), mask);
    const auto actions = sample_actions(logits.value(), 3);
    for (std::size_t a : actions) EXPECT_EQ(a, identity);
    const std::vector<double> f{10.0, 12.5}, y{9.0, 13.0};
    RlConfig rl;
    EXPECT_EQ(reward(rl, f, y, grid[identity]), reward(rl, f, y, 1.0));
    EXPECT_NEAR(entropy_bonus(logits).item(), 0.0, 1e-12);
}

TEST(Policy, GridIsLogUniformAndContainsIdentity) {
    const auto g = action_grid(11, 0.8, 1.25);
    ASSERT_EQ(g.size(), 11u);
    EXPECT_DOUBLE_EQ(g.front(), 0.8);
    EXPECT_DOUBLE_EQ(g.back(), 1.25);
    EXPECT_EQ(g[5], 1.0);
    for (std::size_t i = 2; i < g.size(); ++i) EXPECT_NEAR(g[i] / g[i - 1], g[1] / g[0], 1e-12);
    EXPECT_THROW(action_grid(10, 0.8, 1.25), Error);
    EXPECT_EQ(action_grid(1, 0.8, 1.25), std::vector<double>{1.0});
}

TEST(Policy, SmapeRewardOfAdjustedForecast) {
    RlConfig rl;
    const std::vector<double> f{100.0}, y{110.0};
    EXPECT_NEAR(reward(rl, f, y, 1.1), 0.0, 1e-12);
    EXPECT_NEAR(reward(rl, f, y, 1.0), -200.0 * 10.0 / 210.0, 1e-12);
    rl.reward = RewardKind::Cpoi;
    EXPECT_EQ(reward(rl, std::vector<double>{10.0}, std::vector<double>{8.0}, 1.0), 3.0);
}

TEST(Policy, BaselineStartsAtFirstMeanThenAverages) {
    RewardBaseline b;
    EXPECT_EQ(b.reference(-4.0), -4.0);
    b.update(-4.0, 0.99);
    EXPECT_EQ(b.value, -4.0);
    b.update(-2.0, 0.99);
    EXPECT_DOUBLE_EQ(b.value, 0.99 * -4.0 + 0.01 * -2.0);
    EXPECT_EQ(b.reference(100.0), b.value);
}

TEST(Entropy, UniformSaturatedAndDegenerate) {
    Tape t;
    EXPECT_NEAR(entropy_bonus(c(t, Tensor(Shape{4, 11}, 0.2))).item(), std::log(11.0), 1e-12);
    Tensor peaked(Shape{1, 11}, 0.0);
    peaked[3] = 30.0;
    EXPECT_LT(entropy_bonus(c(t, peaked)).item(), 1e-9);
    EXPECT_EQ(entropy_bonus(c(t, Tensor(Shape{2, 1}, 0.7))).item(), 0.0);
}

TEST(Entropy, BoundedByLogK) {
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t k = 1 + rng.below(12);
        Tensor l(Shape{1, k});
        for (double& v : l.values()) v = rng.uniform(-20, 20);
        Tape t;
        const double h = entropy_bonus(c(t, l)).item();
        EXPECT_GE(h, -1e-15);
        EXPECT_LE(h, std::log(static_cast<double>(k)) + 1e-12);
    }
}

TEST(Total, Reductions) {
    Tape t;
    LossConfig cfg;
    cfg.rl = 0.5;
    cfg.entropy = 0.0;
    cfg.flat = 0.0;
    const Var s = [&](double v) { return c(t, Tensor::scalar(v)); }(2.0);
    const Var one = c(t, Tensor::scalar(1.0));
    const Var zero = c(t, Tensor::scalar(0.0));
    EXPECT_EQ(total_loss(s, one, one, one, cfg).item(), 2.5);
    cfg.rl = 0.0;
    EXPECT_EQ(total_loss(s, one, one, one, cfg).item(), 2.0);
    EXPECT_EQ(total_loss(zero, zero, zero, zero, cfg).item(), 0.0);
}

model::ModelConfig toy_model() {
    model::ModelConfig c;
    c.lookback = 4;
    c.horizons = {1, 2};
    c.tcn.channels = 2;
    c.tcn.projection = 3;
    c.hidden = 3;
    c.d_k = 2;
    c.country_dim = 2;
    c.horizon_dim = 2;
    c.head_hidden = 3;
    c.policy_actions = 3;
    c.n_countries = 3;
    return c;
}

std::vector<dataset::WindowSample> toy_windows(const model::ModelConfig& c) {
    const auto panel = dataset::synth_generate(4, 2, 40);
    const dataset::WindowConfig wc{c.lookback, c.horizons, dataset::TargetMode::Demand};
    const auto scaling = dataset::fit_scaling(panel, wc.target, 30);
    std::vector<dataset::WindowSample> out;
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t t = 10; t < 13; ++t) out.push_back(dataset::build_window(panel, scaling, wc, i, t));
    return out;
}

LossConfig toy_loss() {
    LossConfig cfg;
    cfg.l2 = 1e-2;
    cfg.input_grad = 1e-1;
    cfg.smoothness = 1e-1;
    cfg.rl = 0.5;
    cfg.entropy = -0.2;
    cfg.policy.actions = 3;
    return cfg;
}

TEST(Total, AuxiliaryCoefficientsOffEqualsMseExactly) {
    const auto mc = toy_model();
    const auto m = model::HybridForecaster::init(mc, 2);
    const auto ws = toy_windows(mc);
    const auto batch = model::make_batch(ws);
    LossConfig cfg = toy_loss();
    cfg.l2 = cfg.input_grad = cfg.smoothness = cfg.rl = cfg.entropy = cfg.flat = 0.0;
    Tape t;
    const auto p = m.params().bind(t);
    const auto terms = batch_objective(t, m, p, batch, cfg, {1, 2}, {});
    EXPECT_EQ(terms.total.item(), terms.parts.mse.item());
    Tape t2;
    const auto fw = m.forward(t2, m.params().bind(t2), batch);
    EXPECT_EQ(terms.total.item(), mse(fw.preds, batch.target_scaled).item());
}

TEST(Total, GradientMatchesFiniteDifferencesOnToyModel) {
    for (auto decode : {model::DecodeStrategy::Direct, model::DecodeStrategy::Recursive}) {
        auto mc = toy_model();
        mc.decode = decode;
        const auto m = model::HybridForecaster::init(mc, 5);
        const auto ws = toy_windows(mc);
        const auto batch = model::make_batch(ws);
        const LossConfig cfg = toy_loss();
        PolicySample frozen;
        {
            Tape t;
            frozen = batch_objective(t, m, m.params().bind(t), batch, cfg, {11, 12}, {}).policy;
        }
        std::vector<Tensor> inputs;
        for (const auto& p : m.params()) inputs.push_back(p.value);
        const numerics::MultiScalarFn f = [&](Tape& t, std::span<const Var> p) {
            return batch_objective(t, m, p, batch, cfg, {11, 12}, {}, &frozen).total;
        };
        EXPECT_LT(numerics::finite_difference_check(f, inputs, 1e-5).max_error, 1e-4)
            << model::decode_strategy_name(decode);
    }
}

TEST(Total, ZeroAdvantageGivesZeroPolicyGradient) {
    const auto mc = toy_model();
    const auto m = model::HybridForecaster::init(mc, 5);
    const auto ws = toy_windows(mc);
    const auto batch = model::make_batch(ws);
    LossConfig cfg = toy_loss();
    cfg.l2 = cfg.input_grad = cfg.smoothness = cfg.entropy = 0.0;
    PolicySample frozen;
    frozen.actions.assign(batch.size(), 1);
    frozen.rewards.assign(batch.size(), -3.0);
    frozen.advantages.assign(batch.size(), 0.0);
    const std::size_t w = m.params().index("policy.W");
    std::vector<Tensor> inputs{m.params()[w].value};
    const numerics::MultiScalarFn f = [&](Tape& t, std::span<const Var> x) {
        auto p = m.params().bind(t);
        p[w] = x[0];
        return batch_objective(t, m, p, batch, cfg, {1, 2}, {}, &frozen).rl;
    };
    Tape t;
    auto p = m.params().bind(t);
    const Var loss = batch_objective(t, m, p, batch, cfg, {1, 2}, {}, &frozen).rl;
    t.backward(loss);
    for (double g : t.grad(p[w]).values()) EXPECT_EQ(g, 0.0);
    EXPECT_EQ(numerics::finite_difference_check(f, inputs, 1e-5).max_error, 0.0);
}

TEST(Total, FlatnessTermIsNonnegativeAndSeeded) {
    const auto mc = toy_model();
    const auto m = model::HybridForecaster::init(mc, 5);
    const auto ws = toy_windows(mc);
    const auto batch = model::make_batch(ws);
    LossConfig cfg = toy_loss();
    cfg.flat = 0.1;
    double first = 0.0;
    for (int rep = 0; rep < 2; ++rep) {
        Tape t;
        const auto terms = batch_objective(t, m, m.params().bind(t), batch, cfg, {3, 4}, {});
        EXPECT_GT(terms.flat.item(), 0.0);
        if (rep == 0) first = terms.total.item();
        else EXPECT_EQ(first, terms.total.item());
    }
}

TEST(Config, RejectsNegativeCoefficients) {
    LossConfig cfg;
    cfg.validate();
    cfg.l2 = -1.0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg = {};
    cfg.fd_eps = 0.0;
    EXPECT_THROW(cfg.validate(), Error);
}

} // namespace
} // namespace tempora::objectives
