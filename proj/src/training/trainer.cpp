#include "tempora/training/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "tempora/common/error.hpp"
#include "tempora/common/rng.hpp"

namespace tempora::training {

using numerics::Tensor;

namespace {
// Stream tags for mix_seed.
constexpr std::uint64_t kEpochStream = 1;
constexpr std::uint64_t kDirectionStream = 2;
constexpr std::uint64_t kActionStream = 3;
constexpr std::uint64_t kValidationStream = 4;
} // namespace

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw input_error("train.learning_rate must be > 0");
    if (max_iterations < 1) throw input_error("train.max_iterations must be >= 1");
    if (batch_size < 1) throw input_error("train.batch_size must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw input_error("train.beta1 and train.beta2 must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) throw input_error("train.adam_eps must be > 0");
    if (!(clip_norm > 0.0)) throw input_error("train.clip_norm must be > 0");
    if (val_every < 1 || val_windows < 1) throw input_error("train.val_every and train.val_windows must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
    return {{"learning_rate", learning_rate}, {"max_iterations", max_iterations},
            {"batch_size", batch_size},       {"beta1", beta1},
            {"beta2", beta2},                 {"adam_eps", adam_eps},
            {"patience", patience},           {"clip_norm", clip_norm},
            {"val_every", val_every},         {"val_windows", val_windows},
            {"seed", seed}};
}

AdamState adam_init(const model::ParameterSet& params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.value.shape(), 0.0);
        s.v.emplace_back(p.value.shape(), 0.0);
    }
    return s;
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
    double sq = 0.0;
    for (const auto& g : grads)
        for (double v : g.values()) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) {
        const double f = max_norm / norm;
        for (auto& g : grads)
            for (double& v : g.values()) v *= f;
    }
    return norm;
}

void adam_step(model::ParameterSet& params, std::vector<Tensor> grads, AdamState& state, const TrainConfig& cfg) {
    if (grads.size() != params.size() || state.m.size() != params.size()) {
        throw std::invalid_argument("adam_step: gradient and state counts must match the parameters");
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (grads[i].shape() != params[i].value.shape()) {
            throw std::invalid_argument("adam_step: gradient shape mismatch for " + params[i].name);
        }
        if (!grads[i].all_finite()) throw training_abort("non-finite gradient for parameter " + params[i].name);
    }
    clip_global_norm(grads, cfg.clip_norm);
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < grads.size(); ++i) {
        auto w = params[i].value.values();
        auto m = state.m[i].values();
        auto v = state.v[i].values();
        const auto g = grads[i].values();
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            w[j] -= cfg.learning_rate * (m[j] / c1) / (std::sqrt(v[j] / c2) + cfg.adam_eps);
        }
    }
}

std::vector<std::size_t> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                       std::uint64_t iteration) {
    if (n == 0) throw input_error("no training windows");
    const std::size_t b = std::min(batch_size, n);
    std::map<std::uint64_t, std::vector<std::size_t>> perms;
    const auto perm = [&](std::uint64_t epoch) -> const std::vector<std::size_t>& {
        auto it = perms.find(epoch);
        if (it != perms.end()) return it->second;
        std::vector<std::size_t> p(n);
        std::iota(p.begin(), p.end(), std::size_t{0});
        Rng rng(mix_seed(mix_seed(seed, kEpochStream), epoch));
        rng.shuffle(std::span(p));
        return perms.emplace(epoch, std::move(p)).first->second;
    };
    std::vector<std::size_t> out;
    out.reserve(b);
    for (std::size_t j = 0; j < b; ++j) {
        const std::uint64_t k = iteration * b + j;
        out.push_back(perm(k / n)[k % n]);
    }
    return out;
}

model::HybridForecaster TrainResult::best() const {
    if (state.best.size() == 0) return model;
    return model::HybridForecaster(model.config(), state.best);
}

namespace {

std::vector<std::size_t> validation_subset(std::size_t n, std::size_t cap) {
    std::vector<std::size_t> idx;
    const std::size_t k = std::min(n, cap);
    for (std::size_t i = 0; i < k; ++i) idx.push_back(i * n / k);
    return idx;
}

} // namespace

double validation_loss(const model::HybridForecaster& model, std::span<const dataset::WindowSample> windows,
                       const objectives::LossConfig& loss, const TrainConfig& cfg) {
    const auto batch = model::make_batch(windows, validation_subset(windows.size(), cfg.val_windows));
    numerics::Tape tape;
    const auto p = model.params().bind(tape);
    return objectives::batch_primary(tape, model, p, batch, loss, mix_seed(cfg.seed, kValidationStream)).item();
}

double scaled_mse(const model::HybridForecaster& model, std::span<const dataset::WindowSample> windows) {
    const Tensor z = model.predict_scaled(windows);
    const std::size_t n_h = model.config().horizons.size();
    double total = 0.0;
    for (std::size_t i = 0; i < windows.size(); ++i)
        for (std::size_t k = 0; k < n_h; ++k) {
            const double e = z[i * n_h + k] - windows[i].target_scaled[k];
            total += e * e;
        }
    return total / static_cast<double>(windows.size() * n_h);
}

TrainResult train(const model::HybridForecaster& init, std::span<const dataset::WindowSample> train_windows,
                  std::span<const dataset::WindowSample> val_windows, const objectives::LossConfig& loss,
                  const TrainConfig& cfg, const ResumePoint* resume, std::size_t until) {
    cfg.validate();
    loss.validate();
    if (train_windows.empty() || val_windows.empty()) throw input_error("training needs non-empty train and val splits");
    if (until == 0 || until > cfg.max_iterations) until = cfg.max_iterations;

    TrainResult r{resume ? resume->model : init, resume ? resume->adam : adam_init(init.params()),
                  resume ? resume->state : TrainState{}, {}, "max_iterations"};
    if (r.adam.m.size() != r.model.params().size()) throw artifact_mismatch("optimizer state does not match parameters");
    if (r.state.stopped) {
        r.stop_reason = "early_stop";
        return r;
    }
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint64_t iter = r.state.iteration + 1; iter <= until; ++iter) {
        const auto idx = batch_indices(train_windows.size(), cfg.batch_size, cfg.seed, iter - 1);
        const auto batch = model::make_batch(train_windows, idx);
        numerics::Tape tape;
        const auto p = r.model.params().bind(tape);
        const objectives::StepSeeds seeds{mix_seed(mix_seed(cfg.seed, kDirectionStream), iter),
                                          mix_seed(mix_seed(cfg.seed, kActionStream), iter)};
        const auto terms = objectives::batch_objective(tape, r.model, p, batch, loss, seeds, r.state.baseline);
        const double total = terms.total.item();
        if (!std::isfinite(total)) {
            throw training_abort("non-finite training loss at iteration " + std::to_string(iter));
        }
        tape.backward(terms.total);
        std::vector<Tensor> grads;
        grads.reserve(p.size());
        for (const auto& v : p) grads.push_back(tape.grad(v));
        adam_step(r.model.params(), std::move(grads), r.adam, cfg);
        r.model.project();
        if (loss.rl != 0.0) r.state.baseline.update(terms.mean_reward, loss.policy.baseline_decay);
        r.state.iteration = iter;

        HistoryRow row;
        row.iteration = iter;
        row.train_total = total;
        row.train_primary = terms.primary.item();
        row.entropy = terms.entropy.item();
        bool stop = false;
        if (iter % cfg.val_every == 0 || iter == cfg.max_iterations) {
            const double v = validation_loss(r.model, val_windows, loss, cfg);
            if (!std::isfinite(v)) throw training_abort("non-finite validation loss at iteration " + std::to_string(iter));
            row.val_primary = v;
            if (v < r.state.best_val) {
                r.state.best_val = v;
                r.state.best_iter = iter;
                r.state.best = r.model.params();
            } else if (cfg.patience >= 0 && iter - r.state.best_iter >= static_cast<std::uint64_t>(cfg.patience)) {
                stop = true;
            }
        }
        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        r.history.push_back(row);
        if (stop) {
            r.state.stopped = true;
            r.stop_reason = "early_stop";
            break;
        }
    }
    if (!r.state.stopped && r.state.iteration < cfg.max_iterations) r.stop_reason = "paused";
    return r;
}

void write_history_csv(const std::vector<HistoryRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write " + path.string());
    out << "iteration,train_total,train_primary,val_primary,entropy,wall_ms\n";
    char buf[256];
    for (const auto& r : rows) {
        std::string val;
        if (!std::isnan(r.val_primary)) {
            char v[32];
            std::snprintf(v, sizeof v, "%.17g", r.val_primary);
            val = v;
        }
        std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%s,%.17g,%.3f\n", static_cast<unsigned long long>(r.iteration),
                      r.train_total, r.train_primary, val.c_str(), r.entropy, r.wall_ms);
        out << buf;
    }
    if (!out) throw input_error("failed writing " + path.string());
}

} // namespace tempora::training
