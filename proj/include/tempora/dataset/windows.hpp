#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "json.hpp"

#include "tempora/dataset/panel.hpp"
#include "tempora/numerics/tensor.hpp"

namespace tempora::dataset {

// Feature row layout for one day of a window.
namespace feature {
inline constexpr std::size_t kTarget = 0;   // z-scored log1p(target)
inline constexpr std::size_t kPrice = 1;    // z-scored log1p(mean price)
inline constexpr std::size_t kWeekday = 2;  // 7 one-hot columns, Monday first
inline constexpr std::size_t kMonth = 9;    // 12 one-hot columns
inline constexpr std::size_t kDecember = 21;
inline constexpr std::size_t kWidth = 22;
} // namespace feature

struct WindowConfig {
    std::size_t lookback = 28;
    std::vector<int> horizons{1, 7, 14}; // strictly increasing, all >= 1
    TargetMode target = TargetMode::Demand;

    int max_horizon() const { return horizons.back(); }
    void validate() const;
};

// log1p-space z-scoring statistics per SKU, fit on days [0, fit_end].
struct FeatureScaling {
    std::size_t fit_end = 0;
    std::vector<double> target_mean, target_std;
    std::vector<double> price_mean, price_std;

    double scale_target(std::size_t sku, double raw) const;
    double unscale_target(std::size_t sku, double z) const;
    double scale_price(std::size_t sku, double raw) const;

    nlohmann::json to_json() const;
    static FeatureScaling from_json(const nlohmann::json& j);
    bool operator==(const FeatureScaling&) const = default;
};

FeatureScaling fit_scaling(const SeriesPanel& panel, TargetMode mode, std::size_t fit_end);

struct SplitSpec {
    Date train_end, val_end, test_end;

    // Cut points at the given fractions of the calendar; the test split
    // runs to the last day.
    static SplitSpec from_fractions(const SeriesPanel& panel, double train_frac, double val_frac);
    // train_end < val_end < test_end, all inside the calendar.
    void validate(const SeriesPanel& panel) const;
};

struct WindowSample {
    std::size_t sku = 0;
    std::size_t origin = 0;          // day index of the last observed day t
    std::int32_t country = 0;
    numerics::Tensor features;       // [L, kWidth], days t-L+1 .. t
    numerics::Tensor future_known;   // [max_h, kWidth], days t+1 .. t+max_h; target column zero
    std::vector<double> history;     // raw target, days t-L+1 .. t
    std::vector<double> target;      // raw y_{t+h} per horizon; empty past the calendar
    std::vector<double> target_scaled;
    double scale_mean = 0.0;         // log1p-space stats used for inversion
    double scale_std = 1.0;

    bool has_targets() const { return !target.empty(); }
    // Model output (z-scored log1p) back to original units, clamped at 0.
    double invert(double z) const;
    bool operator==(const WindowSample&) const = default;
};

// Builds the window for (sku, origin). Features read only days <= origin;
// targets are attached when every t + h lies inside the calendar.
WindowSample build_window(const SeriesPanel& panel, const FeatureScaling& scaling, const WindowConfig& cfg,
                          std::size_t sku, std::size_t origin);

struct SplitWindows {
    std::vector<WindowSample> train, val, test;
    FeatureScaling scaling;
};

// Assigns every origin t with t + max(H) <= test_end to exactly one split
// by the date of its furthest target: train iff t + max(H) <= train_end,
// val iff <= val_end, otherwise test. Scaling is fit on the train range.
// Windows are ordered by (sku, origin). Throws tempora::Error(Input) when a
// split is empty.
SplitWindows make_splits(const SeriesPanel& panel, const SplitSpec& spec, const WindowConfig& cfg);

// Same partition with an externally supplied scaling.
SplitWindows make_splits(const SeriesPanel& panel, const SplitSpec& spec, const WindowConfig& cfg,
                         const FeatureScaling& scaling);

} // namespace tempora::dataset
