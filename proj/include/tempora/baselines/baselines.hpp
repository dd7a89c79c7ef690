#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "tempora/dataset/windows.hpp"
#include "tempora/evaluation/forecast_set.hpp"
#include "tempora/model/params.hpp"
#include "tempora/numerics/tape.hpp"
#include "tempora/training/trainer.hpp"

namespace tempora::baselines {

using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

enum class BaselineKind { NaiveLast, SeasonalNaive, RidgeAr, VanillaGru };

BaselineKind parse_baseline_kind(std::string_view name);
std::string_view baseline_kind_name(BaselineKind kind);

struct BaselineSpec {
    BaselineKind kind = BaselineKind::SeasonalNaive;
    std::size_t season = 7;   // seasonal_naive
    std::size_t lags = 14;    // ridge_ar
    double ridge = 1.0;       // ridge_ar
    std::size_t hidden = 16;  // vanilla_gru
    training::TrainConfig train; // vanilla_gru

    // Throws tempora::Error(Input) when a hyperparameter is invalid for the
    // kind or needs more history than lookback provides.
    void validate(std::size_t lookback) const;
    nlohmann::json to_json() const;
    std::string label() const { return std::string(baseline_kind_name(kind)); }
};

// y[t + h - m * ceil(h / m)] read from a history ending at day t.
double seasonal_naive_value(std::span<const double> history, int h, std::size_t season);

// Row-major design matrix [n, p] with targets [n].
struct LinearFit {
    std::vector<double> coef;
    double intercept = 0.0;

    double predict(std::span<const double> x) const;
};

// Minimizes sum (y - x.w - b)^2 + ridge * |w|^2 (intercept unpenalized) by
// solving the normal equations on standardized columns. Throws
// tempora::Error(Input) advising ridge > 0 when the system is singular.
LinearFit ridge_solve(std::span<const double> x, std::span<const double> y, std::size_t p, double ridge);
double ridge_objective(const LinearFit& fit, std::span<const double> x, std::span<const double> y, double ridge);

// Lag features of a window, most recent first: y_t, y_{t-1}, ...
std::vector<double> lag_features(const dataset::WindowSample& w, std::size_t lags);

struct RidgeAr {
    std::size_t lags = 0;
    std::vector<LinearFit> per_horizon;

    static RidgeAr fit(std::span<const dataset::WindowSample> train, std::size_t n_horizons, std::size_t lags,
                       double ridge);
    std::vector<double> predict(const dataset::WindowSample& w) const; // raw units per horizon
};

struct GruVars {
    Var W_z, U_z, b_z, W_r, U_r, b_r, W_h, U_h, b_h;
};

// z = sigmoid(x W_z + h U_z + b_z), r = sigmoid(x W_r + h U_r + b_r),
// h~ = tanh(x W_h + (r * h) U_h + b_h), h_t = (1 - z) * h + z * h~.
// x is [B, F] and h_prev [B, H].
Var gru_cell_step(Var x, Var h_prev, const GruVars& g);

// GRU encoder over the window features with a linear head onto every
// horizon's scaled target; trained on MSE with the shared Adam update.
class VanillaGru {
public:
    static VanillaGru init(std::size_t input_width, std::size_t hidden, std::size_t n_horizons, std::uint64_t seed);
    VanillaGru(model::ParameterSet params, std::size_t hidden, std::size_t n_horizons);

    const model::ParameterSet& params() const { return params_; }
    model::ParameterSet& params() { return params_; }
    // Scaled predictions [B, |H|].
    Var forward(Tape& tape, const std::vector<Var>& p, const model::Batch& batch) const;
    Tensor predict_scaled(std::span<const dataset::WindowSample> windows) const;

    // Adam on MSE; keeps the parameters with the best validation MSE.
    void fit(std::span<const dataset::WindowSample> train, std::span<const dataset::WindowSample> val,
             const training::TrainConfig& cfg);

private:
    model::ParameterSet params_;
    std::size_t hidden_ = 0;
    std::size_t n_horizons_ = 0;
};

// Fits on the train (and, for the GRU, val) windows and forecasts the test
// windows in original units.
evaluation::ForecastSet fit_predict(const BaselineSpec& spec, const dataset::SeriesPanel& panel,
                                    const dataset::SplitWindows& splits, const dataset::WindowConfig& cfg);

// Independent baselines fitted concurrently; output order follows specs.
std::vector<evaluation::ForecastSet> fit_predict_all(std::span<const BaselineSpec> specs,
                                                     const dataset::SeriesPanel& panel,
                                                     const dataset::SplitWindows& splits,
                                                     const dataset::WindowConfig& cfg);

} // namespace tempora::baselines
