#include "tempora/evaluation/metrics.hpp"

#include <cmath>
#include <map>

#include "tempora/common/error.hpp"

namespace tempora::evaluation {

MetricKind parse_metric_kind(std::string_view name) {
    if (name == "mae") return MetricKind::Mae;
    if (name == "rmse") return MetricKind::Rmse;
    if (name == "smape") return MetricKind::Smape;
    if (name == "mase") return MetricKind::Mase;
    if (name == "theil_u2") return MetricKind::TheilU2;
    throw input_error("unknown metric '" + std::string(name) + "' (expected mae, rmse, smape, mase or theil_u2)");
}

std::string_view metric_kind_name(MetricKind kind) {
    switch (kind) {
    case MetricKind::Mae: return "mae";
    case MetricKind::Rmse: return "rmse";
    case MetricKind::Smape: return "smape";
    case MetricKind::Mase: return "mase";
    case MetricKind::TheilU2: return "theil_u2";
    }
    return "?";
}

double seasonal_naive_scale(const ScaleContext& ctx, std::size_t sku) {
    const auto& p = *ctx.panel;
    const std::size_t end = std::min(ctx.train_end, p.n_days - 1);
    if (ctx.season == 0 || end < ctx.season) return 0.0;
    double total = 0.0;
    for (std::size_t d = ctx.season; d <= end; ++d) {
        total += std::abs(p.value(ctx.mode, sku, d) - p.value(ctx.mode, sku, d - ctx.season));
    }
    return total / static_cast<double>(end - ctx.season + 1);
}

namespace {

struct Scaled {
    std::optional<double> value;
    std::size_t excluded = 0;
};

double smape_term(double yhat, double y) {
    const double den = std::abs(y) + std::abs(yhat);
    return den == 0.0 ? 0.0 : std::abs(yhat - y) / den;
}

const ScaleContext& need(const ScaleContext* ctx, std::string_view what) {
    if (!ctx || !ctx->panel) throw input_error(std::string(what) + " needs the training panel for its scale");
    return *ctx;
}

Scaled mase_of(const ForecastSet& fs, const ScaleContext& ctx) {
    std::map<std::string, std::pair<double, std::size_t>> per_sku;
    for (const auto& r : fs.records) {
        auto& acc = per_sku[r.sku];
        acc.first += std::abs(r.yhat - r.y);
        ++acc.second;
    }
    Scaled out;
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& [sku, acc] : per_sku) {
        const double scale = seasonal_naive_scale(ctx, ctx.panel->sku_index(sku));
        if (scale == 0.0) {
            ++out.excluded;
            continue;
        }
        total += acc.first / scale;
        n += acc.second;
    }
    if (n > 0) out.value = total / static_cast<double>(n);
    return out;
}

Scaled theil_of(const ForecastSet& fs, const ScaleContext& ctx) {
    struct Acc {
        double num = 0.0, den = 0.0;
        std::size_t n = 0;
    };
    std::map<std::string, Acc> per_sku;
    const auto& p = *ctx.panel;
    for (const auto& r : fs.records) {
        const std::size_t sku = p.sku_index(r.sku);
        const dataset::Date prev = r.target_date() - 1;
        if (prev < p.start || prev > p.end()) {
            throw input_error("theil_u2: no actual for " + r.sku + " on " + prev.to_string());
        }
        const double y_prev = p.value(ctx.mode, sku, p.day_index(prev));
        auto& acc = per_sku[r.sku];
        acc.num += (r.yhat - r.y) * (r.yhat - r.y);
        acc.den += (y_prev - r.y) * (y_prev - r.y);
        ++acc.n;
    }
    Scaled out;
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& [sku, acc] : per_sku) {
        if (acc.den == 0.0) {
            ++out.excluded;
            continue;
        }
        total += static_cast<double>(acc.n) * std::sqrt(acc.num) / std::sqrt(acc.den);
        n += acc.n;
    }
    if (n > 0) out.value = total / static_cast<double>(n);
    return out;
}

} // namespace

double metric(MetricKind kind, const ForecastSet& fs, const ScaleContext* ctx) {
    if (fs.records.empty()) throw input_error("metric " + std::string(metric_kind_name(kind)) + ": empty forecast set");
    const double n = static_cast<double>(fs.records.size());
    double total = 0.0;
    switch (kind) {
    case MetricKind::Mae:
        for (const auto& r : fs.records) total += std::abs(r.yhat - r.y);
        return total / n;
    case MetricKind::Rmse:
        for (const auto& r : fs.records) total += (r.yhat - r.y) * (r.yhat - r.y);
        return std::sqrt(total / n);
    case MetricKind::Smape:
        for (const auto& r : fs.records) total += smape_term(r.yhat, r.y);
        return 200.0 * total / n;
    case MetricKind::Mase: {
        const Scaled s = mase_of(fs, need(ctx, "mase"));
        if (!s.value) throw input_error("mase: every series has a constant training range (zero scale)");
        return *s.value;
    }
    case MetricKind::TheilU2: {
        const Scaled s = theil_of(fs, need(ctx, "theil_u2"));
        if (!s.value) throw input_error("theil_u2: every series has a zero naive reference error");
        return *s.value;
    }
    }
    return 0.0;
}

MetricRow metric_row(const ForecastSet& fs, const ScaleContext* ctx) {
    MetricRow row;
    row.n = fs.records.size();
    row.mae = metric(MetricKind::Mae, fs);
    row.rmse = metric(MetricKind::Rmse, fs);
    row.smape = metric(MetricKind::Smape, fs);
    if (ctx && ctx->panel) {
        const Scaled m = mase_of(fs, *ctx);
        row.mase = m.value;
        row.mase_excluded = m.excluded;
        const Scaled u = theil_of(fs, *ctx);
        row.theil_u2 = u.value;
        row.theil_excluded = u.excluded;
    }
    return row;
}

std::optional<double> MetricRow::get(MetricKind kind) const {
    switch (kind) {
    case MetricKind::Mae: return mae;
    case MetricKind::Rmse: return rmse;
    case MetricKind::Smape: return smape;
    case MetricKind::Mase: return mase;
    case MetricKind::TheilU2: return theil_u2;
    }
    return std::nullopt;
}

nlohmann::json MetricRow::to_json(std::span<const MetricKind> kinds) const {
    nlohmann::json j = nlohmann::json::object();
    for (MetricKind k : kinds) {
        const auto v = get(k);
        j[std::string(metric_kind_name(k))] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    }
    return j;
}

nlohmann::json MetricRow::to_json() const {
    static constexpr MetricKind all[] = {MetricKind::Mae, MetricKind::Rmse, MetricKind::Smape, MetricKind::Mase,
                                         MetricKind::TheilU2};
    return to_json(all);
}

} // namespace tempora::evaluation
