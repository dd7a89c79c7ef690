#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "json.hpp"

#include "tempora/dataset/panel.hpp"
#include "tempora/evaluation/forecast_set.hpp"

namespace tempora::evaluation {

enum class MetricKind { Mae, Rmse, Smape, Mase, TheilU2 };

MetricKind parse_metric_kind(std::string_view name);
std::string_view metric_kind_name(MetricKind kind);

// In-sample information needed by mase (training range of each series) and
// theil_u2 (the actual one day before each target).
struct ScaleContext {
    const dataset::SeriesPanel* panel = nullptr;
    dataset::TargetMode mode = dataset::TargetMode::Demand;
    std::size_t train_end = 0; // last training day index, inclusive
    std::size_t season = 7;
};

// In-sample MAE of the seasonal-naive forecast y[d - m] over days
// m..train_end of one series.
double seasonal_naive_scale(const ScaleContext& ctx, std::size_t sku);

// Scalar metric over every record of fs. mase and theil_u2 need ctx and
// throw tempora::Error(Input) without it or when every series is excluded
// for a zero denominator.
double metric(MetricKind kind, const ForecastSet& fs, const ScaleContext* ctx = nullptr);

struct MetricRow {
    std::size_t n = 0;
    double mae = 0.0, rmse = 0.0, smape = 0.0;
    std::optional<double> mase, theil_u2; // empty without context or when all series are excluded
    std::size_t mase_excluded = 0;         // series with a zero scale
    std::size_t theil_excluded = 0;

    nlohmann::json to_json() const;
    nlohmann::json to_json(std::span<const MetricKind> kinds) const;
    std::optional<double> get(MetricKind kind) const;
};

MetricRow metric_row(const ForecastSet& fs, const ScaleContext* ctx = nullptr);

} // namespace tempora::evaluation
