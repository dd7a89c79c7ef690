#include "tempora/objectives/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tempora/common/error.hpp"
#include "tempora/common/rng.hpp"

namespace tempora::objectives {

namespace ops = numerics;
using numerics::Shape;

RewardKind parse_reward_kind(std::string_view name) {
    if (name == "smape") return RewardKind::Smape;
    if (name == "cpoi") return RewardKind::Cpoi;
    throw input_error("unknown reward kind '" + std::string(name) + "' (smape|cpoi)");
}

std::string_view reward_kind_name(RewardKind k) { return k == RewardKind::Smape ? "smape" : "cpoi"; }

void LossConfig::validate() const {
    for (const auto& [name, v] : {std::pair{"loss.l2", l2}, {"loss.input_grad", input_grad},
                                  {"loss.smoothness", smoothness}, {"loss.rl", rl}, {"loss.flat", flat}}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw input_error(std::string(name) + " must be finite and >= 0");
    }
    if (!std::isfinite(entropy)) throw input_error("loss.entropy must be finite");
    if (!(fd_eps > 0.0)) throw input_error("loss.fd_eps must be > 0");
    if (!(policy.baseline_decay >= 0.0 && policy.baseline_decay < 1.0)) {
        throw input_error("loss.baseline_decay must lie in [0, 1)");
    }
    if (!(policy.price > policy.cost && policy.cost > 0.0)) throw input_error("reward price must exceed cost > 0");
    if (!policy.mask.empty() && policy.mask.size() != policy.actions) {
        throw input_error("action mask needs one flag per action");
    }
    action_grid(policy.actions, policy.grid_low, policy.grid_high);
}

nlohmann::json LossConfig::to_json() const {
    return {{"l2", l2},
            {"input_grad", input_grad},
            {"smoothness", smoothness},
            {"rl", rl},
            {"entropy", entropy},
            {"flat", flat},
            {"fd_eps", fd_eps},
            {"actions", policy.actions},
            {"grid_low", policy.grid_low},
            {"grid_high", policy.grid_high},
            {"baseline_decay", policy.baseline_decay},
            {"reward", reward_kind_name(policy.reward)},
            {"reward_price", policy.price},
            {"reward_cost", policy.cost}};
}

std::vector<double> action_grid(std::size_t k, double low, double high) {
    if (k < 1) throw input_error("action grid needs at least one action");
    if (k == 1) return {1.0};
    if (!(low > 0.0) || !(high > low)) throw input_error("action grid needs 0 < low < high");
    std::vector<double> g(k);
    const double a = std::log(low), b = std::log(high);
    bool has_identity = false;
    for (std::size_t i = 0; i < k; ++i) {
        g[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(k - 1));
        if (std::abs(g[i] - 1.0) < 1e-12) {
            g[i] = 1.0;
            has_identity = true;
        }
    }
    if (!has_identity) throw input_error("action grid must contain the identity multiplier 1.0");
    return g;
}

Var mse(Var preds, const Tensor& targets) {
    if (preds.value().size() == 0) throw input_error("empty batch");
    return ops::mean(ops::square(ops::sub(preds, preds.tape->constant(targets.reshaped(preds.shape())))));
}

Var l2_penalty(std::span<const Var> params) {
    if (params.empty()) throw std::invalid_argument("l2_penalty: no parameters");
    Var total = ops::sum_squares(params[0]);
    for (std::size_t i = 1; i < params.size(); ++i) total = ops::add(total, ops::sum_squares(params[i]));
    return total;
}

Var input_gradient_penalty(const std::function<Var(Var)>& f, Var x, const Tensor& u, double eps,
                           std::optional<Var> fx) {
    if (!(eps > 0.0)) throw std::invalid_argument("input_gradient_penalty: eps must be > 0");
    Tensor step = u.reshaped(x.shape());
    for (double& v : step.values()) v *= eps;
    const Var base = fx ? *fx : f(x);
    const Var moved = f(ops::add(x, x.tape->constant(std::move(step))));
    return ops::mean(ops::square(ops::scale(ops::sub(moved, base), 1.0 / eps)));
}

Tensor unit_directions(const Shape& shape, std::uint64_t seed) {
    Tensor u(shape, 0.0);
    if (u.size() == 0) return u;
    const std::size_t rows = shape.empty() ? 1 : shape[0];
    const std::size_t width = u.size() / rows;
    Rng rng(seed);
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = u.data() + r * width;
        double norm = 0.0;
        while (norm == 0.0) {
            for (std::size_t i = 0; i < width; ++i) {
                row[i] = rng.normal();
                norm += row[i] * row[i];
            }
        }
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < width; ++i) row[i] /= norm;
    }
    return u;
}

Var temporal_smoothness(Var path) {
    const std::size_t rows = path.shape()[0];
    const std::size_t s = path.value().size() / rows;
    if (s < 2) return path.tape->constant(Tensor::scalar(0.0));
    const Var d = ops::sub(ops::slice_lastdim(path, 1, s), ops::slice_lastdim(path, 0, s - 1));
    return ops::scale(ops::sum_squares(d), 1.0 / static_cast<double>(rows));
}

Var rl_policy_loss(Var logits, std::span<const std::size_t> actions, std::span<const double> advantages) {
    const std::size_t rows = logits.shape()[0];
    if (actions.size() != rows || advantages.size() != rows) {
        throw std::invalid_argument("rl_policy_loss: one action and advantage per row required");
    }
    const Var lp = ops::select_per_row(ops::log_softmax_lastdim(logits), {actions.begin(), actions.end()});
    const Var adv = logits.tape->constant(Tensor(Shape{rows}, {advantages.begin(), advantages.end()}));
    return ops::scale(ops::sum(ops::mul(lp, adv)), -1.0 / static_cast<double>(rows));
}

Var entropy_bonus(Var logits) {
    const std::size_t rows = logits.shape()[0];
    const Var plogp = ops::mul(ops::softmax_lastdim(logits), ops::log_softmax_lastdim(logits));
    return ops::scale(ops::sum(plogp), -1.0 / static_cast<double>(rows));
}

Var apply_action_mask(Var logits, const std::vector<bool>& mask) {
    if (mask.empty()) return logits;
    if (mask.size() != logits.value().last_extent()) throw std::invalid_argument("apply_action_mask: width mismatch");
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) {
        throw input_error("action mask disables every action");
    }
    Tensor offset(Shape{mask.size()}, 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i) offset[i] = mask[i] ? 0.0 : -1e30;
    return ops::add_row(logits, logits.tape->constant(std::move(offset)));
}

std::vector<std::size_t> sample_actions(const Tensor& logits, std::uint64_t seed) {
    const std::size_t k = logits.last_extent();
    const std::size_t rows = logits.size() / k;
    Rng rng(seed);
    std::vector<std::size_t> out(rows);
    std::vector<double> p(k);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* l = logits.data() + r * k;
        const double mx = *std::max_element(l, l + k);
        double z = 0.0;
        for (std::size_t a = 0; a < k; ++a) z += (p[a] = std::exp(l[a] - mx));
        const double u = rng.uniform() * z;
        double cum = 0.0;
        std::size_t pick = k;
        for (std::size_t a = 0; a < k; ++a) {
            cum += p[a];
            if (u < cum && p[a] > 0.0) {
                pick = a;
                break;
            }
        }
        if (pick == k) {
            pick = 0;
            for (std::size_t a = 0; a < k; ++a)
                if (p[a] > 0.0) pick = a;
        }
        out[r] = pick;
    }
    return out;
}

double reward(const RlConfig& cfg, std::span<const double> forecast, std::span<const double> actual, double multiplier) {
    if (forecast.size() != actual.size() || forecast.empty()) throw std::invalid_argument("reward: size mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < forecast.size(); ++i) {
        const double f = forecast[i] * multiplier;
        const double y = actual[i];
        if (cfg.reward == RewardKind::Smape) {
            const double den = std::abs(y) + std::abs(f);
            total += den == 0.0 ? 0.0 : std::abs(f - y) / den;
        } else {
            const double q = std::max(0.0, std::round(f));
            total += cfg.price * std::min(q, y) - cfg.cost * q;
        }
    }
    const auto n = static_cast<double>(forecast.size());
    return cfg.reward == RewardKind::Smape ? -200.0 * total / n : total / n;
}

void RewardBaseline::update(double batch_mean, double decay) {
    if (!initialized) {
        value = batch_mean;
        initialized = true;
    } else {
        value = decay * value + (1.0 - decay) * batch_mean;
    }
}

Var primary_loss(const PrimaryParts& parts, const LossConfig& cfg) {
    Var total = parts.mse;
    total = ops::add(total, ops::scale(parts.l2, cfg.l2));
    total = ops::add(total, ops::scale(parts.input_grad, cfg.input_grad));
    return ops::add(total, ops::scale(parts.smooth, cfg.smoothness));
}

Var total_loss(Var primary, Var rl_loss, Var entropy, Var flatness, const LossConfig& cfg) {
    Var total = ops::add(primary, ops::scale(rl_loss, cfg.rl));
    total = ops::add(total, ops::scale(entropy, cfg.entropy));
    return ops::add(total, ops::scale(flatness, cfg.flat));
}

namespace {

struct PrimaryEval {
    model::Forward fw;
    PrimaryParts parts;
    Var primary;
};

PrimaryEval primary_eval(Tape& tape, const model::HybridForecaster& model, std::span<const Var> p,
                         const model::Batch& batch, const LossConfig& cfg, std::uint64_t direction_seed) {
    if (batch.size() == 0 || !batch.has_targets()) throw input_error("empty batch or windows without targets");
    PrimaryEval e;
    e.fw = model.forward(tape, p, batch);
    const Var zero = tape.constant(Tensor::scalar(0.0));
    e.parts.mse = mse(e.fw.preds, batch.target_scaled);
    e.parts.l2 = cfg.l2 != 0.0 ? l2_penalty(p) : zero;
    if (cfg.input_grad != 0.0) {
        const Var x = tape.constant(batch.x);
        const auto f = [&](Var xv) { return model.forward(tape, p, batch, xv).preds; };
        e.parts.input_grad =
            input_gradient_penalty(f, x, unit_directions(batch.x.shape(), direction_seed), cfg.fd_eps, e.fw.preds);
    } else {
        e.parts.input_grad = zero;
    }
    e.parts.smooth = cfg.smoothness != 0.0 ? temporal_smoothness(e.fw.path) : zero;
    e.primary = primary_loss(e.parts, cfg);
    return e;
}

} // namespace

Var batch_primary(Tape& tape, const model::HybridForecaster& model, std::span<const Var> p, const model::Batch& batch,
                  const LossConfig& cfg, std::uint64_t direction_seed) {
    return primary_eval(tape, model, p, batch, cfg, direction_seed).primary;
}

BatchTerms batch_objective(Tape& tape, const model::HybridForecaster& model, std::span<const Var> p,
                           const model::Batch& batch, const LossConfig& cfg, const StepSeeds& seeds,
                           const RewardBaseline& baseline, const PolicySample* fixed) {
    PrimaryEval e = primary_eval(tape, model, p, batch, cfg, seeds.direction);
    BatchTerms t;
    t.primary = e.primary;
    t.parts = e.parts;
    const Var zero = tape.constant(Tensor::scalar(0.0));
    t.rl = zero;
    t.entropy = zero;
    t.flat = zero;

    if (cfg.rl != 0.0 || cfg.entropy != 0.0) {
        const Var logits = apply_action_mask(model.policy_logits(p, e.fw.context), cfg.policy.mask);
        if (cfg.rl != 0.0) {
            if (fixed) {
                t.policy = *fixed;
            } else {
                const auto grid = action_grid(cfg.policy.actions, cfg.policy.grid_low, cfg.policy.grid_high);
                t.policy.actions = sample_actions(logits.value(), seeds.action);
                const Tensor& z = e.fw.preds.value();
                const std::size_t n_h = z.last_extent();
                std::vector<double> raw(n_h);
                for (std::size_t b = 0; b < batch.size(); ++b) {
                    const auto& w = *batch.windows[b];
                    for (std::size_t k = 0; k < n_h; ++k) raw[k] = w.invert(z[b * n_h + k]);
                    t.policy.rewards.push_back(reward(cfg.policy, raw, w.target, grid[t.policy.actions[b]]));
                }
                double sum = 0.0;
                for (double r : t.policy.rewards) sum += r;
                const double ref = baseline.reference(sum / static_cast<double>(batch.size()));
                for (double r : t.policy.rewards) t.policy.advantages.push_back(r - ref);
            }
            double sum = 0.0;
            for (double r : t.policy.rewards) sum += r;
            t.mean_reward = t.policy.rewards.empty() ? 0.0 : sum / static_cast<double>(t.policy.rewards.size());
            t.rl = rl_policy_loss(logits, t.policy.actions, t.policy.advantages);
        }
        if (cfg.entropy != 0.0) t.entropy = entropy_bonus(logits);
    }

    if (cfg.flat != 0.0) {
        // Normalized gradient of the primary loss at the current point.
        std::vector<Tensor> grads;
        double norm = 0.0;
        {
            Tape sub;
            std::vector<Var> q;
            for (const Var& v : p) q.push_back(sub.leaf(v.value()));
            sub.backward(batch_primary(sub, model, q, batch, cfg, seeds.direction));
            for (const Var& v : q) {
                grads.push_back(sub.grad(v));
                for (double g : grads.back().values()) norm += g * g;
            }
        }
        norm = std::sqrt(norm);
        if (norm > 0.0) {
            std::vector<Var> shifted;
            for (std::size_t i = 0; i < p.size(); ++i) {
                Tensor step = grads[i];
                for (double& g : step.values()) g *= cfg.fd_eps / norm;
                shifted.push_back(ops::add(p[i], tape.constant(std::move(step))));
            }
            const Var moved = batch_primary(tape, model, shifted, batch, cfg, seeds.direction);
            t.flat = ops::scale(ops::square(ops::sub(moved, e.primary)), 1.0 / (cfg.fd_eps * cfg.fd_eps));
        }
    }
    t.total = total_loss(t.primary, t.rl, t.entropy, t.flat, cfg);
    return t;
}

} // namespace tempora::objectives
