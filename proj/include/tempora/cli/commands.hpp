#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "json.hpp"

#include "tempora/cli/config.hpp"

namespace tempora::cli {

// Each command writes only under out and leaves a config.json holding the
// resolved config and the dataset hash.

// CSV ingestion (or synthetic generation) to a panel directory plus
// ingest_stats.json.
void cmd_ingest(const RunConfig& cfg, const std::filesystem::path& out);

// Trains on the panel; writes checkpoint.bin, history.csv and
// train_summary.json.
void cmd_train(const RunConfig& cfg, const std::filesystem::path& panel_dir, const std::filesystem::path& out);

// Forecasts the test split with the checkpoint and every configured
// baseline; writes report.json, metrics.csv, tse.csv, cpoi.csv and
// forecasts/<label>.csv.
void cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::filesystem::path& panel_dir,
                  const std::filesystem::path& out);

// Single-window forecast in original units. origin defaults to the last
// calendar day.
nlohmann::json cmd_forecast(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                            const std::filesystem::path& panel_dir, const std::string& sku,
                            const std::optional<std::string>& origin);

// Pairwise DM for every horizon and loss plus the metric table; writes
// compare.json and compare.md. mase and theil_u2 need panel_dir.
void cmd_compare(const RunConfig& cfg, std::span<const std::filesystem::path> forecast_csvs,
                 const std::optional<std::filesystem::path>& panel_dir, const std::filesystem::path& out);

// argv without the program name. Returns the process exit code: 0, or the
// tempora::Error kind (2 input, 3 training abort, 4 artifact mismatch,
// 5 comparison mismatch).
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

} // namespace tempora::cli
