#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tempora/dataset/date.hpp"
#include "tempora/dataset/panel.hpp"
#include "tempora/dataset/windows.hpp"

namespace tempora::evaluation {

struct ForecastRecord {
    std::string sku;
    dataset::Date origin;
    int h = 0;
    double yhat = 0.0; // original units
    double y = 0.0;

    dataset::Date target_date() const { return origin + h; }
    auto key() const { return std::tie(sku, origin, h); }
    bool operator==(const ForecastRecord&) const = default;
};

struct ForecastSet {
    std::string label;
    dataset::TargetMode target = dataset::TargetMode::Demand;
    std::vector<ForecastRecord> records;

    // Throws tempora::Error(Input) on a duplicate (sku, origin, h) key, a
    // non-finite value, a horizon < 1 or a label that is not a plain name.
    void validate() const;
    std::vector<int> horizons() const; // ascending, distinct
    ForecastSet at_horizon(int h) const;
};

// One record per (window, horizon) from raw-unit predictions laid out
// [windows, horizons]. Windows must carry targets.
ForecastSet make_forecast_set(std::string label, const dataset::SeriesPanel& panel,
                              std::span<const dataset::WindowSample> windows, std::span<const int> horizons,
                              std::span<const double> yhat, dataset::TargetMode mode);

// Columns sku,origin,h,yhat,y with shortest round-trip decimals.
void write_forecast_csv(const ForecastSet& fs, const std::filesystem::path& path);
// The label defaults to the file stem. Throws tempora::Error(Input) naming
// the offending line.
ForecastSet read_forecast_csv(const std::filesystem::path& path, std::string label = {});

} // namespace tempora::evaluation
