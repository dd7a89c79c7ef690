#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "tempora/baselines/baselines.hpp"
#include "tempora/dataset/panel.hpp"
#include "tempora/dataset/windows.hpp"
#include "tempora/evaluation/report.hpp"
#include "tempora/model/hybrid.hpp"
#include "tempora/objectives/loss.hpp"
#include "tempora/training/trainer.hpp"

namespace tempora::cli {

struct DataConfig {
    std::string csv; // empty: generate a synthetic panel
    std::size_t min_active_days = 30;
    dataset::TargetMode target = dataset::TargetMode::Demand;
    std::size_t synth_skus = 20;
    std::size_t synth_days = 200;
    dataset::SynthParams synth;
};

struct SplitConfig {
    // Dates win over fractions when train_end and val_end are both set;
    // test_end defaults to the last calendar day.
    std::string train_end, val_end, test_end;
    double train_frac = 0.7;
    double val_frac = 0.15;

    dataset::SplitSpec resolve(const dataset::SeriesPanel& panel) const;
};

struct EvalConfig {
    std::vector<evaluation::MetricKind> metrics{evaluation::MetricKind::Mae, evaluation::MetricKind::Rmse,
                                                evaluation::MetricKind::Smape, evaluation::MetricKind::Mase,
                                                evaluation::MetricKind::TheilU2};
    evaluation::CpoiParams cpoi;
    std::vector<evaluation::DmLoss> dm_losses{evaluation::DmLoss::Squared, evaluation::DmLoss::Absolute};
    std::vector<baselines::BaselineKind> baselines{baselines::BaselineKind::NaiveLast,
                                                   baselines::BaselineKind::SeasonalNaive,
                                                   baselines::BaselineKind::RidgeAr, baselines::BaselineKind::VanillaGru};
    std::size_t season = 7;
    std::size_t ridge_lags = 14;
    double ridge = 1.0;
    std::size_t gru_hidden = 16;
};

struct RunConfig {
    std::uint64_t seed = 42;
    DataConfig data;
    SplitConfig split;
    model::ModelConfig model;
    objectives::LossConfig loss;
    training::TrainConfig train;
    EvalConfig eval;

    // Cross-field checks; throws tempora::Error(Input).
    void validate() const;
    // Every key with its resolved value, grouped by section.
    nlohmann::json echo() const;
    dataset::WindowConfig window() const;
    std::vector<baselines::BaselineSpec> baseline_specs() const;
};

// Sets one key ("seed" or "section.key"); unknown keys and malformed values
// throw tempora::Error(Input).
void apply_setting(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

// Defaults, then the INI file (if any), then each "section.key=value"
// override in order, then the seed flag.
RunConfig load_run_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> overrides,
                          std::optional<std::uint64_t> seed_flag);

std::vector<std::string> config_keys();

} // namespace tempora::cli
