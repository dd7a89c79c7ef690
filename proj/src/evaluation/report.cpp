#include "tempora/evaluation/report.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "tempora/common/error.hpp"

namespace tempora::evaluation {

using dataset::format_double;

std::vector<TrajectoryPoint> tse_trajectory(const ForecastSet& fs, int h) {
    std::map<dataset::Date, std::pair<double, std::size_t>> by_origin;
    for (const auto& r : fs.records) {
        if (r.h != h) continue;
        auto& acc = by_origin[r.origin];
        acc.first += std::abs(r.yhat - r.y);
        ++acc.second;
    }
    std::vector<TrajectoryPoint> out;
    out.reserve(by_origin.size());
    for (const auto& [origin, acc] : by_origin) out.push_back({origin, acc.first / static_cast<double>(acc.second)});
    return out;
}

void CpoiParams::validate() const {
    if (!(cost > 0.0 && price > cost)) throw input_error("cpoi requires price > cost > 0");
}

double newsvendor_profit(double yhat, double y, const CpoiParams& params) {
    const double q = std::max(0.0, std::round(yhat));
    return params.price * std::min(q, y) - params.cost * q;
}

std::vector<TrajectoryPoint> cpoi_trajectory(const ForecastSet& fs, int h, const CpoiParams& params) {
    params.validate();
    std::map<dataset::Date, double> by_origin;
    for (const auto& r : fs.records)
        if (r.h == h) by_origin[r.origin] += newsvendor_profit(r.yhat, r.y, params);
    std::vector<TrajectoryPoint> out;
    out.reserve(by_origin.size());
    double cum = 0.0;
    for (const auto& [origin, profit] : by_origin) {
        cum += profit;
        out.push_back({origin, cum});
    }
    return out;
}

EvalReport build_report(std::span<const ForecastSet> sets, const ScaleContext* ctx, const CpoiParams& cpoi,
                        std::span<const DmLoss> dm_losses, std::string dataset_hash, nlohmann::json config_echo) {
    if (sets.empty()) throw input_error("report needs at least one forecast set");
    cpoi.validate();
    std::set<std::string> labels;
    std::set<int> all_h;
    for (const auto& fs : sets) {
        fs.validate();
        if (fs.records.empty()) throw input_error("forecast set " + fs.label + " is empty");
        if (!labels.insert(fs.label).second) throw input_error("duplicate model label '" + fs.label + "'");
        for (int h : fs.horizons()) all_h.insert(h);
    }

    EvalReport rep;
    rep.cpoi = cpoi;
    rep.dataset_hash = std::move(dataset_hash);
    rep.config_echo = std::move(config_echo);
    rep.forecasts.assign(sets.begin(), sets.end());
    for (const auto& fs : sets) {
        ModelReport m;
        m.label = fs.label;
        for (int h : fs.horizons()) {
            m.metrics["h" + std::to_string(h)] = metric_row(fs.at_horizon(h), ctx);
            m.tse[h] = tse_trajectory(fs, h);
            m.cpoi[h] = cpoi_trajectory(fs, h, cpoi);
        }
        m.metrics["pooled"] = metric_row(fs, ctx);
        rep.models.push_back(std::move(m));
    }
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t j = i + 1; j < sets.size(); ++j)
            for (int h : all_h)
                for (DmLoss loss : dm_losses) {
                    rep.dm.push_back({sets[i].label, sets[j].label, h, loss, dm_test(sets[i], sets[j], loss, h)});
                }
    return rep;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["models"] = nlohmann::json::array();
    for (const auto& m : models) {
        nlohmann::json metrics = nlohmann::json::object();
        for (const auto& [k, row] : m.metrics) metrics[k] = row.to_json(this->metrics);
        j["models"].push_back({{"label", m.label}, {"metrics", metrics}});
    }
    j["dm"] = nlohmann::json::array();
    for (const auto& e : dm) {
        const auto finite = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
        j["dm"].push_back({{"a", e.a},
                           {"b", e.b},
                           {"h", e.h},
                           {"loss", dm_loss_name(e.loss)},
                           {"stat", finite(e.result.statistic)},
                           {"p", e.result.p_value}});
    }
    j["cpoi_params"] = {{"p", cpoi.price}, {"c", cpoi.cost}};
    j["dataset_hash"] = dataset_hash;
    j["config_echo"] = config_echo;
    return j;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot write '" + path.string() + "'");
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw input_error("failed writing '" + path.string() + "'");
}

std::string opt_text(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

void metrics_line(std::ofstream& out, std::span<const MetricKind> kinds, const std::string& label,
                  const std::string& h, const MetricRow& r) {
    out << label << ',' << h << ',' << r.n;
    for (MetricKind k : kinds) out << ',' << opt_text(r.get(k));
    out << ',' << r.mase_excluded << ',' << r.theil_excluded << '\n';
}

} // namespace

void report_emit(const EvalReport& report, const std::filesystem::path& dir) {
    if (report.models.empty()) throw input_error("report has no models");
    std::error_code ec;
    std::filesystem::create_directories(dir / "forecasts", ec);
    if (ec) throw input_error("cannot create '" + (dir / "forecasts").string() + "': " + ec.message());

    {
        const auto path = dir / "report.json";
        auto out = open_out(path);
        out << report.to_json().dump(2) << '\n';
        finish(out, path);
    }
    {
        const auto path = dir / "metrics.csv";
        auto out = open_out(path);
        out << "model,h,n";
        for (MetricKind k : report.metrics) out << ',' << metric_kind_name(k);
        out << ",mase_excluded,theil_excluded\n";
        for (const auto& m : report.models) {
            for (const auto& [h, traj] : m.tse) {
                metrics_line(out, report.metrics, m.label, std::to_string(h), m.metrics.at("h" + std::to_string(h)));
            }
            metrics_line(out, report.metrics, m.label, "pooled", m.metrics.at("pooled"));
        }
        finish(out, path);
    }
    const auto trajectories = [&](const char* name, const char* column, auto member) {
        const auto path = dir / name;
        auto out = open_out(path);
        out << "model,h,origin," << column << '\n';
        for (const auto& m : report.models)
            for (const auto& [h, traj] : m.*member)
                for (const auto& pt : traj) {
                    out << m.label << ',' << h << ',' << pt.origin.to_string() << ',' << format_double(pt.value) << '\n';
                }
        finish(out, path);
    };
    trajectories("tse.csv", "tse", &ModelReport::tse);
    trajectories("cpoi.csv", "cumulative_profit", &ModelReport::cpoi);
    for (const auto& fs : report.forecasts) write_forecast_csv(fs, dir / "forecasts" / (fs.label + ".csv"));
}

} // namespace tempora::evaluation
