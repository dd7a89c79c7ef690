#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "tempora/dataset/date.hpp"
#include "tempora/dataset/transactions.hpp"
#include "tempora/numerics/tensor.hpp"

namespace tempora::dataset {

enum class TargetMode { Demand, Revenue };

TargetMode parse_target_mode(std::string_view name);
std::string_view target_mode_name(TargetMode mode);

// Per-SKU daily series on one contiguous calendar. Matrices are
// [n_skus, n_days], row i belonging to sku_ids[i]; days without sales hold
// explicit zeros.
struct SeriesPanel {
    std::vector<std::string> sku_ids; // sorted ascending
    Date start;
    std::size_t n_days = 0;
    numerics::Tensor demand;     // units
    numerics::Tensor revenue;    // currency / day
    numerics::Tensor mean_price; // currency; carried forward over gaps
    std::vector<std::int32_t> country_code; // per sku, index into countries
    std::vector<std::string> countries;     // sorted ascending
    nlohmann::json metadata = nlohmann::json::object();

    std::size_t n_skus() const { return sku_ids.size(); }
    Date date(std::size_t day) const { return start + static_cast<std::int32_t>(day); }
    Date end() const { return date(n_days - 1); }
    // Day index of a calendar date; throws if outside the calendar.
    std::size_t day_index(Date d) const;
    std::size_t sku_index(std::string_view sku) const;

    const numerics::Tensor& target(TargetMode mode) const { return mode == TargetMode::Demand ? demand : revenue; }
    double value(TargetMode mode, std::size_t sku, std::size_t day) const {
        return target(mode)[sku * n_days + day];
    }
};

struct AggregateResult {
    SeriesPanel panel;
    std::size_t skus_kept = 0;
    std::size_t skus_excluded = 0; // fewer than min_active_days selling days
};

// Sums cleaned transactions into daily per-SKU demand and revenue. The
// country of a SKU is its most frequent transaction country (ties: the
// alphabetically first). Throws tempora::Error(Input) when no SKU survives.
AggregateResult aggregate_daily(std::span<const TransactionRecord> records, std::size_t min_active_days);

struct SynthParams {
    Date start = Date::from_ymd(2010, 1, 4);
    double base_min = 20.0;
    double base_max = 60.0;
    double trend_max = 0.001;   // |trend| per day as a fraction of base
    double amp_min = 0.25;      // weekly amplitude as a fraction of base
    double amp_max = 0.5;
    double noise = 0.1;         // noise std as a fraction of base
    double holiday_amp = 0.5;   // December 15-24 spike as a fraction of base
    double price_min = 1.0;
    double price_max = 10.0;
    std::size_t n_countries = 3;
};

nlohmann::json to_json(const SynthParams& p);

// demand[i][d] = max(0, round(base_i + trend_i d + amp_i weekly[(d + phase_i) mod 7]
//                             + holiday_i(d) + noise)), fully determined by seed.
// Requires n_days >= 21.
SeriesPanel synth_generate(std::uint64_t seed, std::size_t n_skus, std::size_t n_days, const SynthParams& params = {});

// Content fingerprint over ids, calendar, countries and all matrices.
std::string dataset_hash(const SeriesPanel& panel);

// Directory layout: panel.json (metadata, calendar, ids, countries, extra
// JSON such as scaling stats) plus demand.csv, revenue.csv and
// mean_price.csv with one row per SKU and one column per date.
void save_panel(const SeriesPanel& panel, const std::filesystem::path& dir, const nlohmann::json& extra = {});
SeriesPanel load_panel(const std::filesystem::path& dir);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

} // namespace tempora::dataset
