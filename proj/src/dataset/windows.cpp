#include "tempora/dataset/windows.hpp"

#include <algorithm>
#include <cmath>

#include "tempora/common/error.hpp"
#include "tempora/common/parallel.hpp"

namespace tempora::dataset {

using numerics::Shape;
using numerics::Tensor;

void WindowConfig::validate() const {
    if (lookback < 1) throw input_error("lookback must be >= 1");
    if (horizons.empty()) throw input_error("horizon set must not be empty");
    for (std::size_t i = 0; i < horizons.size(); ++i) {
        if (horizons[i] < 1) throw input_error("horizons must be >= 1");
        if (i && horizons[i] <= horizons[i - 1]) throw input_error("horizons must be strictly increasing");
    }
}

double FeatureScaling::scale_target(std::size_t sku, double raw) const {
    return (std::log1p(raw) - target_mean[sku]) / target_std[sku];
}

double FeatureScaling::unscale_target(std::size_t sku, double z) const {
    return std::max(0.0, std::expm1(z * target_std[sku] + target_mean[sku]));
}

double FeatureScaling::scale_price(std::size_t sku, double raw) const {
    return (std::log1p(raw) - price_mean[sku]) / price_std[sku];
}

nlohmann::json FeatureScaling::to_json() const {
    return {{"fit_end", fit_end},
            {"target_mean", target_mean},
            {"target_std", target_std},
            {"price_mean", price_mean},
            {"price_std", price_std}};
}

FeatureScaling FeatureScaling::from_json(const nlohmann::json& j) {
    FeatureScaling s;
    s.fit_end = j.at("fit_end").get<std::size_t>();
    s.target_mean = j.at("target_mean").get<std::vector<double>>();
    s.target_std = j.at("target_std").get<std::vector<double>>();
    s.price_mean = j.at("price_mean").get<std::vector<double>>();
    s.price_std = j.at("price_std").get<std::vector<double>>();
    return s;
}

namespace {

std::pair<double, double> log_moments(const Tensor& m, std::size_t row, std::size_t n_days, std::size_t fit_end) {
    const std::size_t n = fit_end + 1;
    double mean = 0.0;
    for (std::size_t d = 0; d < n; ++d) mean += std::log1p(m[row * n_days + d]);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
        const double e = std::log1p(m[row * n_days + d]) - mean;
        var += e * e;
    }
    const double sd = std::sqrt(var / static_cast<double>(n));
    // Constant series: keep the shift, skip the scale.
    return {mean, sd > 1e-8 ? sd : 1.0};
}

void fill_calendar(double* row, Date date) {
    row[feature::kWeekday + date.weekday()] = 1.0;
    row[feature::kMonth + date.month() - 1] = 1.0;
    row[feature::kDecember] = date.month() == 12 ? 1.0 : 0.0;
}

} // namespace

FeatureScaling fit_scaling(const SeriesPanel& panel, TargetMode mode, std::size_t fit_end) {
    if (fit_end >= panel.n_days) throw input_error("scaling fit range exceeds the calendar");
    FeatureScaling s;
    s.fit_end = fit_end;
    for (std::size_t i = 0; i < panel.n_skus(); ++i) {
        const auto [tm, ts] = log_moments(panel.target(mode), i, panel.n_days, fit_end);
        const auto [pm, ps] = log_moments(panel.mean_price, i, panel.n_days, fit_end);
        s.target_mean.push_back(tm);
        s.target_std.push_back(ts);
        s.price_mean.push_back(pm);
        s.price_std.push_back(ps);
    }
    return s;
}

SplitSpec SplitSpec::from_fractions(const SeriesPanel& panel, double train_frac, double val_frac) {
    if (!(train_frac > 0.0) || !(val_frac > 0.0) || train_frac + val_frac >= 1.0) {
        throw input_error("split fractions must be positive and sum to less than 1");
    }
    const auto n = static_cast<double>(panel.n_days);
    const auto train_days = static_cast<std::int32_t>(std::llround(n * train_frac));
    const auto val_days = static_cast<std::int32_t>(std::llround(n * val_frac));
    SplitSpec s{panel.start + (train_days - 1), panel.start + (train_days + val_days - 1), panel.end()};
    s.validate(panel);
    return s;
}

void SplitSpec::validate(const SeriesPanel& panel) const {
    if (!(train_end < val_end && val_end < test_end)) {
        throw input_error("split dates must satisfy train_end < val_end < test_end (got " + train_end.to_string() +
                          ", " + val_end.to_string() + ", " + test_end.to_string() + ")");
    }
    if (train_end < panel.start || test_end > panel.end()) {
        throw input_error("split dates must lie within the panel calendar " + panel.start.to_string() + ".." +
                          panel.end().to_string());
    }
}

double WindowSample::invert(double z) const { return std::max(0.0, std::expm1(z * scale_std + scale_mean)); }

WindowSample build_window(const SeriesPanel& panel, const FeatureScaling& scaling, const WindowConfig& cfg,
                          std::size_t sku, std::size_t origin) {
    const std::size_t L = cfg.lookback;
    if (origin + 1 < L || origin >= panel.n_days) {
        throw input_error("window origin " + std::to_string(origin) + " leaves fewer than " + std::to_string(L) +
                          " observed days");
    }
    const auto max_h = static_cast<std::size_t>(cfg.max_horizon());
    const Tensor& y = panel.target(cfg.target);
    const std::size_t n_days = panel.n_days;

    WindowSample w;
    w.sku = sku;
    w.origin = origin;
    w.country = panel.country_code[sku];
    w.scale_mean = scaling.target_mean[sku];
    w.scale_std = scaling.target_std[sku];
    w.features = Tensor(Shape{L, feature::kWidth});
    w.future_known = Tensor(Shape{max_h, feature::kWidth});
    const std::size_t first = origin + 1 - L;
    for (std::size_t r = 0; r < L; ++r) {
        const std::size_t d = first + r;
        double* row = w.features.data() + r * feature::kWidth;
        const double raw = y[sku * n_days + d];
        w.history.push_back(raw);
        row[feature::kTarget] = scaling.scale_target(sku, raw);
        row[feature::kPrice] = scaling.scale_price(sku, panel.mean_price[sku * n_days + d]);
        fill_calendar(row, panel.date(d));
    }
    // Future rows: calendar is known, price is carried forward from t.
    const double last_price = scaling.scale_price(sku, panel.mean_price[sku * n_days + origin]);
    for (std::size_t s = 0; s < max_h; ++s) {
        double* row = w.future_known.data() + s * feature::kWidth;
        row[feature::kPrice] = last_price;
        fill_calendar(row, panel.date(origin) + static_cast<std::int32_t>(s + 1));
    }
    if (origin + max_h < n_days) {
        for (int h : cfg.horizons) {
            const double raw = y[sku * n_days + origin + static_cast<std::size_t>(h)];
            w.target.push_back(raw);
            w.target_scaled.push_back(scaling.scale_target(sku, raw));
        }
    }
    return w;
}

SplitWindows make_splits(const SeriesPanel& panel, const SplitSpec& spec, const WindowConfig& cfg,
                         const FeatureScaling& scaling) {
    cfg.validate();
    spec.validate(panel);
    const std::size_t train_end = panel.day_index(spec.train_end);
    const std::size_t val_end = panel.day_index(spec.val_end);
    const std::size_t test_end = panel.day_index(spec.test_end);
    const auto max_h = static_cast<std::size_t>(cfg.max_horizon());
    const std::size_t L = cfg.lookback;

    std::vector<SplitWindows> per_sku(panel.n_skus());
    parallel_for(panel.n_skus(), [&](std::size_t sku) {
        SplitWindows& out = per_sku[sku];
        for (std::size_t t = L - 1; t + max_h <= test_end; ++t) {
            const std::size_t last_target = t + max_h;
            auto& bucket = last_target <= train_end ? out.train : last_target <= val_end ? out.val : out.test;
            bucket.push_back(build_window(panel, scaling, cfg, sku, t));
        }
    });

    SplitWindows result;
    result.scaling = scaling;
    for (auto& s : per_sku) {
        std::move(s.train.begin(), s.train.end(), std::back_inserter(result.train));
        std::move(s.val.begin(), s.val.end(), std::back_inserter(result.val));
        std::move(s.test.begin(), s.test.end(), std::back_inserter(result.test));
    }
    if (result.train.empty() || result.val.empty() || result.test.empty()) {
        throw input_error("empty split: train=" + std::to_string(result.train.size()) +
                          " val=" + std::to_string(result.val.size()) + " test=" + std::to_string(result.test.size()) +
                          " (lookback " + std::to_string(L) + ", max horizon " + std::to_string(max_h) + ")");
    }
    return result;
}

SplitWindows make_splits(const SeriesPanel& panel, const SplitSpec& spec, const WindowConfig& cfg) {
    spec.validate(panel);
    return make_splits(panel, spec, cfg, fit_scaling(panel, cfg.target, panel.day_index(spec.train_end)));
}

} // namespace tempora::dataset
