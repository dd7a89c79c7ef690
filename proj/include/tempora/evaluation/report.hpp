#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "tempora/evaluation/dm.hpp"
#include "tempora/evaluation/metrics.hpp"

namespace tempora::evaluation {

struct TrajectoryPoint {
    dataset::Date origin;
    double value = 0.0;
};

// Mean absolute error over SKUs per origin date at horizon h, chronological.
std::vector<TrajectoryPoint> tse_trajectory(const ForecastSet& fs, int h);

struct CpoiParams {
    double price = 1.0;
    double cost = 0.5;

    void validate() const; // price > cost > 0
};

// Newsvendor profit with order q = max(0, round(yhat)).
double newsvendor_profit(double yhat, double y, const CpoiParams& params);

// Cumulative profit at horizon h: one point per origin date, summed over
// SKUs and accumulated chronologically.
std::vector<TrajectoryPoint> cpoi_trajectory(const ForecastSet& fs, int h, const CpoiParams& params);

struct DmEntry {
    std::string a, b;
    int h = 0;
    DmLoss loss = DmLoss::Squared;
    DmResult result;
};

struct ModelReport {
    std::string label;
    std::map<std::string, MetricRow> metrics; // "h<k>" per horizon plus "pooled"
    std::map<int, std::vector<TrajectoryPoint>> tse, cpoi;
};

struct EvalReport {
    std::vector<ModelReport> models;
    std::vector<DmEntry> dm;
    CpoiParams cpoi;
    std::string dataset_hash;
    nlohmann::json config_echo = nlohmann::json::object();
    std::vector<ForecastSet> forecasts;
    std::vector<MetricKind> metrics{MetricKind::Mae, MetricKind::Rmse, MetricKind::Smape, MetricKind::Mase,
                                    MetricKind::TheilU2}; // columns emitted

    nlohmann::json to_json() const;
};

// Every set is validated; DM entries cover each pair (i < j), each shared
// horizon and each loss. Throws tempora::Error(Input) on an empty list or
// duplicate labels.
EvalReport build_report(std::span<const ForecastSet> sets, const ScaleContext* ctx, const CpoiParams& cpoi,
                        std::span<const DmLoss> dm_losses, std::string dataset_hash, nlohmann::json config_echo);

// Writes report.json, metrics.csv, tse.csv, cpoi.csv and
// forecasts/<label>.csv under dir. Bytes depend only on the report.
void report_emit(const EvalReport& report, const std::filesystem::path& dir);

} // namespace tempora::evaluation
