#include "tempora/baselines/baselines.hpp"

#include <cmath>
#include <optional>

#include <Eigen/Dense>

#include "tempora/common/error.hpp"
#include "tempora/common/parallel.hpp"
#include "tempora/common/rng.hpp"
#include "tempora/numerics/ops.hpp"
#include "tempora/objectives/loss.hpp"

namespace tempora::baselines {

namespace ops = numerics;
using numerics::Shape;

BaselineKind parse_baseline_kind(std::string_view name) {
    if (name == "naive_last") return BaselineKind::NaiveLast;
    if (name == "seasonal_naive") return BaselineKind::SeasonalNaive;
    if (name == "ridge_ar") return BaselineKind::RidgeAr;
    if (name == "vanilla_gru") return BaselineKind::VanillaGru;
    throw input_error("unknown baseline '" + std::string(name) +
                      "' (expected naive_last, seasonal_naive, ridge_ar or vanilla_gru)");
}

std::string_view baseline_kind_name(BaselineKind kind) {
    switch (kind) {
    case BaselineKind::NaiveLast: return "naive_last";
    case BaselineKind::SeasonalNaive: return "seasonal_naive";
    case BaselineKind::RidgeAr: return "ridge_ar";
    case BaselineKind::VanillaGru: return "vanilla_gru";
    }
    return "?";
}

void BaselineSpec::validate(std::size_t lookback) const {
    switch (kind) {
    case BaselineKind::NaiveLast: break;
    case BaselineKind::SeasonalNaive:
        if (season < 1 || season > lookback) {
            throw input_error("seasonal_naive season must lie in [1, lookback=" + std::to_string(lookback) + "]");
        }
        break;
    case BaselineKind::RidgeAr:
        if (lags < 1 || lags > lookback) {
            throw input_error("ridge_ar lags must lie in [1, lookback=" + std::to_string(lookback) + "]");
        }
        if (!(ridge >= 0.0)) throw input_error("ridge_ar ridge must be >= 0");
        break;
    case BaselineKind::VanillaGru:
        if (hidden < 1) throw input_error("vanilla_gru hidden must be >= 1");
        train.validate();
        break;
    }
}

nlohmann::json BaselineSpec::to_json() const {
    nlohmann::json j = {{"kind", baseline_kind_name(kind)}};
    switch (kind) {
    case BaselineKind::NaiveLast: break;
    case BaselineKind::SeasonalNaive: j["season"] = season; break;
    case BaselineKind::RidgeAr:
        j["lags"] = lags;
        j["ridge"] = ridge;
        break;
    case BaselineKind::VanillaGru:
        j["hidden"] = hidden;
        j["train"] = train.to_json();
        break;
    }
    return j;
}

double seasonal_naive_value(std::span<const double> history, int h, std::size_t season) {
    if (h < 1 || season < 1) throw std::invalid_argument("seasonal_naive_value: h and season must be >= 1");
    const std::size_t hh = static_cast<std::size_t>(h);
    const std::size_t back = season * ((hh + season - 1) / season) - hh; // days before t
    if (back >= history.size()) throw std::invalid_argument("seasonal_naive_value: history too short");
    return history[history.size() - 1 - back];
}

double LinearFit::predict(std::span<const double> x) const {
    double v = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j) v += coef[j] * x[j];
    return v;
}

LinearFit ridge_solve(std::span<const double> x, std::span<const double> y, std::size_t p, double ridge) {
    const std::size_t n = y.size();
    if (n == 0 || p == 0 || x.size() != n * p) throw std::invalid_argument("ridge_solve: shape mismatch");
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> X(
        x.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    Eigen::Map<const Eigen::VectorXd> Y(y.data(), static_cast<Eigen::Index>(n));

    const Eigen::RowVectorXd mean = X.colwise().mean();
    Eigen::MatrixXd Z = X.rowwise() - mean;
    Eigen::VectorXd sd = (Z.array().square().colwise().sum() / static_cast<double>(n)).sqrt().transpose();
    for (Eigen::Index j = 0; j < sd.size(); ++j)
        if (sd[j] == 0.0) sd[j] = 1.0;
    Z = Z * sd.cwiseInverse().asDiagonal();
    const double y_mean = Y.mean();

    Eigen::MatrixXd A = Z.transpose() * Z;
    A.diagonal() += ridge * sd.array().square().inverse().matrix();
    const Eigen::VectorXd b = Z.transpose() * (Y.array() - y_mean).matrix();
    const Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12)) {
        throw input_error("ridge_ar: normal equations are singular (constant or collinear lags); use ridge > 0");
    }
    const Eigen::VectorXd v = llt.solve(b);

    LinearFit fit;
    fit.coef.resize(p);
    fit.intercept = y_mean;
    for (std::size_t j = 0; j < p; ++j) {
        fit.coef[j] = v[static_cast<Eigen::Index>(j)] / sd[static_cast<Eigen::Index>(j)];
        fit.intercept -= fit.coef[j] * mean[static_cast<Eigen::Index>(j)];
    }
    return fit;
}

double ridge_objective(const LinearFit& fit, std::span<const double> x, std::span<const double> y, double ridge) {
    const std::size_t p = fit.coef.size();
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = y[i] - fit.predict(x.subspan(i * p, p));
        total += e * e;
    }
    for (double w : fit.coef) total += ridge * w * w;
    return total;
}

std::vector<double> lag_features(const dataset::WindowSample& w, std::size_t lags) {
    if (lags > w.history.size()) throw std::invalid_argument("lag_features: more lags than history");
    std::vector<double> out(lags);
    for (std::size_t k = 0; k < lags; ++k) out[k] = w.history[w.history.size() - 1 - k];
    return out;
}

RidgeAr RidgeAr::fit(std::span<const dataset::WindowSample> train, std::size_t n_horizons, std::size_t lags,
                     double ridge) {
    if (train.empty()) throw input_error("ridge_ar: no training windows");
    std::vector<double> x;
    x.reserve(train.size() * lags);
    for (const auto& w : train) {
        const auto f = lag_features(w, lags);
        x.insert(x.end(), f.begin(), f.end());
    }
    RidgeAr m;
    m.lags = lags;
    std::vector<double> y(train.size());
    for (std::size_t k = 0; k < n_horizons; ++k) {
        for (std::size_t i = 0; i < train.size(); ++i) y[i] = train[i].target.at(k);
        m.per_horizon.push_back(ridge_solve(x, y, lags, ridge));
    }
    return m;
}

std::vector<double> RidgeAr::predict(const dataset::WindowSample& w) const {
    const auto f = lag_features(w, lags);
    std::vector<double> out;
    out.reserve(per_horizon.size());
    for (const auto& fit : per_horizon) out.push_back(fit.predict(f));
    return out;
}

Var gru_cell_step(Var x, Var h_prev, const GruVars& g) {
    const auto gate = [&](Var W, Var U, Var b, Var h) { return ops::add_row(ops::add(ops::matmul(x, W), ops::matmul(h, U)), b); };
    const Var z = ops::sigmoid(gate(g.W_z, g.U_z, g.b_z, h_prev));
    const Var r = ops::sigmoid(gate(g.W_r, g.U_r, g.b_r, h_prev));
    const Var cand = ops::tanh(gate(g.W_h, g.U_h, g.b_h, ops::mul(r, h_prev)));
    return ops::add(h_prev, ops::mul(z, ops::sub(cand, h_prev)));
}

VanillaGru VanillaGru::init(std::size_t input_width, std::size_t hidden, std::size_t n_horizons, std::uint64_t seed) {
    Rng rng(seed);
    model::ParameterSet ps;
    for (const char* g : {"z", "r", "h"}) {
        ps.add_glorot(std::string("gru.W_") + g, {input_width, hidden}, input_width, hidden, rng);
        ps.add_glorot(std::string("gru.U_") + g, {hidden, hidden}, hidden, hidden, rng);
        ps.add(std::string("gru.b_") + g, Tensor({hidden}, 0.0));
    }
    ps.add_glorot("head.W", {hidden, n_horizons}, hidden, n_horizons, rng);
    ps.add("head.b", Tensor({n_horizons}, 0.0));
    return VanillaGru(std::move(ps), hidden, n_horizons);
}

VanillaGru::VanillaGru(model::ParameterSet params, std::size_t hidden, std::size_t n_horizons)
    : params_(std::move(params)), hidden_(hidden), n_horizons_(n_horizons) {
    if (params_.size() != 11) throw artifact_mismatch("vanilla_gru: expected 11 parameter tensors");
}

Var VanillaGru::forward(Tape& tape, const std::vector<Var>& p, const model::Batch& batch) const {
    const GruVars g{p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], p[8]};
    const Var x = tape.constant(batch.x);
    Var h = tape.constant(Tensor({batch.size(), hidden_}, 0.0));
    for (std::size_t t = 0; t < batch.x.shape()[1]; ++t) h = gru_cell_step(ops::at_time(x, t), h, g);
    return ops::add_row(ops::matmul(h, p[9]), p[10]);
}

Tensor VanillaGru::predict_scaled(std::span<const dataset::WindowSample> windows) const {
    constexpr std::size_t kChunk = 128;
    Tensor out({windows.size(), n_horizons_}, 0.0);
    const std::size_t chunks = (windows.size() + kChunk - 1) / kChunk;
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t lo = c * kChunk;
        const std::size_t hi = std::min(windows.size(), lo + kChunk);
        const auto batch = model::make_batch(windows.subspan(lo, hi - lo));
        Tape tape;
        const auto p = params_.bind(tape);
        const Tensor& v = forward(tape, p, batch).value();
        std::copy(v.values().begin(), v.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(lo * n_horizons_));
    });
    return out;
}

namespace {

double scaled_mse(const Tensor& z, std::span<const dataset::WindowSample> windows, std::size_t n_h) {
    double total = 0.0;
    for (std::size_t i = 0; i < windows.size(); ++i)
        for (std::size_t k = 0; k < n_h; ++k) {
            const double e = z[i * n_h + k] - windows[i].target_scaled[k];
            total += e * e;
        }
    return total / static_cast<double>(windows.size() * n_h);
}

} // namespace

void VanillaGru::fit(std::span<const dataset::WindowSample> train, std::span<const dataset::WindowSample> val,
                     const training::TrainConfig& cfg) {
    cfg.validate();
    if (train.empty() || val.empty()) throw input_error("vanilla_gru needs non-empty train and val splits");
    std::vector<dataset::WindowSample> val_subset;
    const std::size_t k = std::min(val.size(), cfg.val_windows);
    for (std::size_t i = 0; i < k; ++i) val_subset.push_back(val[i * val.size() / k]);

    training::AdamState adam = training::adam_init(params_);
    model::ParameterSet best = params_;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_iter = 0;
    for (std::size_t iter = 1; iter <= cfg.max_iterations; ++iter) {
        const auto idx = training::batch_indices(train.size(), cfg.batch_size, cfg.seed, iter - 1);
        const auto batch = model::make_batch(train, idx);
        Tape tape;
        const auto p = params_.bind(tape);
        const Var loss = objectives::mse(forward(tape, p, batch), batch.target_scaled);
        if (!std::isfinite(loss.item())) {
            throw training_abort("vanilla_gru: non-finite training loss at iteration " + std::to_string(iter));
        }
        tape.backward(loss);
        std::vector<Tensor> grads;
        for (const auto& v : p) grads.push_back(tape.grad(v));
        training::adam_step(params_, std::move(grads), adam, cfg);
        if (iter % cfg.val_every == 0 || iter == cfg.max_iterations) {
            const double v = scaled_mse(predict_scaled(val_subset), val_subset, n_horizons_);
            if (v < best_val) {
                best_val = v;
                best_iter = iter;
                best = params_;
            } else if (cfg.patience >= 0 && iter - best_iter >= static_cast<std::size_t>(cfg.patience)) {
                break;
            }
        }
    }
    params_ = std::move(best);
}

evaluation::ForecastSet fit_predict(const BaselineSpec& spec, const dataset::SeriesPanel& panel,
                                    const dataset::SplitWindows& splits, const dataset::WindowConfig& cfg) {
    spec.validate(cfg.lookback);
    const std::size_t n_h = cfg.horizons.size();
    const auto& test = splits.test;
    std::vector<double> yhat(test.size() * n_h);
    switch (spec.kind) {
    case BaselineKind::NaiveLast:
        for (std::size_t i = 0; i < test.size(); ++i)
            for (std::size_t k = 0; k < n_h; ++k) yhat[i * n_h + k] = test[i].history.back();
        break;
    case BaselineKind::SeasonalNaive:
        for (std::size_t i = 0; i < test.size(); ++i)
            for (std::size_t k = 0; k < n_h; ++k) {
                yhat[i * n_h + k] = seasonal_naive_value(test[i].history, cfg.horizons[k], spec.season);
            }
        break;
    case BaselineKind::RidgeAr: {
        const RidgeAr m = RidgeAr::fit(splits.train, n_h, spec.lags, spec.ridge);
        for (std::size_t i = 0; i < test.size(); ++i) {
            const auto p = m.predict(test[i]);
            std::copy(p.begin(), p.end(), yhat.begin() + static_cast<std::ptrdiff_t>(i * n_h));
        }
        break;
    }
    case BaselineKind::VanillaGru: {
        VanillaGru m = VanillaGru::init(dataset::feature::kWidth, spec.hidden, n_h, mix_seed(spec.train.seed, 11));
        m.fit(splits.train, splits.val, spec.train);
        const Tensor z = m.predict_scaled(test);
        for (std::size_t i = 0; i < test.size(); ++i)
            for (std::size_t k = 0; k < n_h; ++k) yhat[i * n_h + k] = test[i].invert(z[i * n_h + k]);
        break;
    }
    }
    return evaluation::make_forecast_set(spec.label(), panel, test, cfg.horizons, yhat, cfg.target);
}

std::vector<evaluation::ForecastSet> fit_predict_all(std::span<const BaselineSpec> specs,
                                                     const dataset::SeriesPanel& panel,
                                                     const dataset::SplitWindows& splits,
                                                     const dataset::WindowConfig& cfg) {
    std::vector<std::optional<evaluation::ForecastSet>> slots(specs.size());
    parallel_for(specs.size(), [&](std::size_t i) { slots[i] = fit_predict(specs[i], panel, splits, cfg); });
    std::vector<evaluation::ForecastSet> out;
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

} // namespace tempora::baselines
