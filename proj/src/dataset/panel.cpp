#include "tempora/dataset/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tempora/common/error.hpp"
#include "tempora/common/hash.hpp"
#include "tempora/common/rng.hpp"

namespace tempora::dataset {

using numerics::Shape;
using numerics::Tensor;

TargetMode parse_target_mode(std::string_view name) {
    if (name == "demand") return TargetMode::Demand;
    if (name == "revenue") return TargetMode::Revenue;
    throw input_error("unknown target mode '" + std::string(name) + "' (expected demand|revenue)");
}

std::string_view target_mode_name(TargetMode mode) { return mode == TargetMode::Demand ? "demand" : "revenue"; }

std::size_t SeriesPanel::day_index(Date d) const {
    const std::int32_t i = d - start;
    if (i < 0 || static_cast<std::size_t>(i) >= n_days) {
        throw input_error("date " + d.to_string() + " outside panel calendar " + start.to_string() + ".." +
                          end().to_string());
    }
    return static_cast<std::size_t>(i);
}

std::size_t SeriesPanel::sku_index(std::string_view sku) const {
    const auto it = std::lower_bound(sku_ids.begin(), sku_ids.end(), sku);
    if (it == sku_ids.end() || *it != sku) throw input_error("unknown sku '" + std::string(sku) + "'");
    return static_cast<std::size_t>(it - sku_ids.begin());
}

namespace {

// Forward-fill gaps from the last observed value; leading gaps take the
// first observed value.
void fill_gaps(std::span<double> row, const std::vector<bool>& observed) {
    std::size_t first = row.size();
    for (std::size_t d = 0; d < row.size(); ++d) {
        if (observed[d]) {
            first = d;
            break;
        }
    }
    if (first == row.size()) return;
    for (std::size_t d = 0; d < first; ++d) row[d] = row[first];
    for (std::size_t d = first + 1; d < row.size(); ++d) {
        if (!observed[d]) row[d] = row[d - 1];
    }
}

} // namespace

AggregateResult aggregate_daily(std::span<const TransactionRecord> records, std::size_t min_active_days) {
    if (records.empty()) throw input_error("aggregate: no transactions to aggregate");
    Date first = date_of(records.front().invoice_time);
    Date last = first;
    for (const auto& r : records) {
        const Date d = date_of(r.invoice_time);
        first = std::min(first, d);
        last = std::max(last, d);
    }
    const auto n_days = static_cast<std::size_t>(last - first + 1);

    struct Accum {
        std::vector<double> qty, rev;
        std::map<std::string, std::size_t> country_counts;
    };
    std::map<std::string, Accum> by_sku;
    for (const auto& r : records) {
        Accum& a = by_sku[r.stock_code];
        if (a.qty.empty()) {
            a.qty.assign(n_days, 0.0);
            a.rev.assign(n_days, 0.0);
        }
        const auto d = static_cast<std::size_t>(date_of(r.invoice_time) - first);
        a.qty[d] += static_cast<double>(r.quantity);
        a.rev[d] += static_cast<double>(r.quantity) * r.unit_price;
        ++a.country_counts[r.country];
    }

    AggregateResult result;
    std::vector<const std::pair<const std::string, Accum>*> kept;
    for (const auto& entry : by_sku) {
        const auto active = static_cast<std::size_t>(
            std::count_if(entry.second.qty.begin(), entry.second.qty.end(), [](double q) { return q > 0.0; }));
        if (active >= min_active_days) {
            kept.push_back(&entry);
        } else {
            ++result.skus_excluded;
        }
    }
    if (kept.empty()) {
        throw input_error("aggregate: no SKU has at least " + std::to_string(min_active_days) + " active days (" +
                          std::to_string(result.skus_excluded) + " excluded)");
    }
    result.skus_kept = kept.size();

    SeriesPanel& p = result.panel;
    p.start = first;
    p.n_days = n_days;
    p.demand = Tensor(Shape{kept.size(), n_days});
    p.revenue = Tensor(Shape{kept.size(), n_days});
    p.mean_price = Tensor(Shape{kept.size(), n_days});

    std::vector<std::string> sku_country;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        const auto& [sku, acc] = *kept[i];
        p.sku_ids.push_back(sku);
        std::vector<bool> observed(n_days, false);
        for (std::size_t d = 0; d < n_days; ++d) {
            p.demand[i * n_days + d] = acc.qty[d];
            p.revenue[i * n_days + d] = acc.rev[d];
            if (acc.qty[d] > 0.0) {
                observed[d] = true;
                p.mean_price[i * n_days + d] = acc.rev[d] / acc.qty[d];
            }
        }
        fill_gaps(p.mean_price.values().subspan(i * n_days, n_days), observed);
        // std::map iterates alphabetically, so strict > keeps the first name on ties.
        std::string best;
        std::size_t best_count = 0;
        for (const auto& [country, count] : acc.country_counts) {
            if (count > best_count) {
                best = country;
                best_count = count;
            }
        }
        sku_country.push_back(best);
    }
    p.countries = sku_country;
    std::sort(p.countries.begin(), p.countries.end());
    p.countries.erase(std::unique(p.countries.begin(), p.countries.end()), p.countries.end());
    for (const auto& c : sku_country) {
        p.country_code.push_back(
            static_cast<std::int32_t>(std::lower_bound(p.countries.begin(), p.countries.end(), c) - p.countries.begin()));
    }
    p.metadata = {{"source", "transactions"}, {"min_active_days", min_active_days}};
    return result;
}

nlohmann::json to_json(const SynthParams& p) {
    return {{"start", p.start.to_string()}, {"base_min", p.base_min},       {"base_max", p.base_max},
            {"trend_max", p.trend_max},     {"amp_min", p.amp_min},         {"amp_max", p.amp_max},
            {"noise", p.noise},             {"holiday_amp", p.holiday_amp}, {"price_min", p.price_min},
            {"price_max", p.price_max},     {"n_countries", p.n_countries}};
}

SeriesPanel synth_generate(std::uint64_t seed, std::size_t n_skus, std::size_t n_days, const SynthParams& params) {
    if (n_days < 21) throw input_error("synth: n_days must be at least 21, got " + std::to_string(n_days));
    if (n_skus == 0) throw input_error("synth: n_skus must be positive");
    if (params.n_countries == 0) throw input_error("synth: n_countries must be positive");
    // Zero-mean weekly profile, Monday first, weekend peak.
    static constexpr double kWeekly[7] = {-0.6, -0.4, -0.2, 0.0, 0.3, 1.0, -0.1};

    Rng rng(seed);
    SeriesPanel p;
    p.start = params.start;
    p.n_days = n_days;
    p.demand = Tensor(Shape{n_skus, n_days});
    p.revenue = Tensor(Shape{n_skus, n_days});
    p.mean_price = Tensor(Shape{n_skus, n_days});
    for (std::size_t c = 0; c < params.n_countries; ++c) {
        char name[16];
        std::snprintf(name, sizeof name, "C%02zu", c);
        p.countries.emplace_back(name);
    }
    nlohmann::json per_sku = nlohmann::json::array();
    for (std::size_t i = 0; i < n_skus; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "SKU%04zu", i);
        p.sku_ids.emplace_back(id);
        const double base = rng.uniform(params.base_min, params.base_max);
        const double trend = rng.uniform(-params.trend_max, params.trend_max) * base;
        const double amp = rng.uniform(params.amp_min, params.amp_max) * base;
        const auto phase = static_cast<std::size_t>(rng.below(7));
        const double price = rng.uniform(params.price_min, params.price_max);
        const auto country = static_cast<std::int32_t>(rng.below(params.n_countries));
        p.country_code.push_back(country);
        per_sku.push_back({{"sku", id}, {"base", base}, {"trend", trend}, {"amp", amp}, {"phase", phase},
                           {"price", price}, {"country", country}});
        for (std::size_t d = 0; d < n_days; ++d) {
            const Date date = p.date(d);
            const bool holiday = date.month() == 12 && date.day_of_month() >= 15 && date.day_of_month() <= 24;
            const double noise = params.noise > 0.0 ? rng.normal() * params.noise * base : 0.0;
            const double level = base + trend * static_cast<double>(d) + amp * kWeekly[(d + phase) % 7] +
                                 (holiday ? params.holiday_amp * base : 0.0) + noise;
            const double q = std::max(0.0, std::round(level));
            p.demand[i * n_days + d] = q;
            p.revenue[i * n_days + d] = q * price;
            p.mean_price[i * n_days + d] = price;
        }
    }
    p.metadata = {{"source", "synthetic"},
                  {"seed", seed},
                  {"n_skus", n_skus},
                  {"n_days", n_days},
                  {"params", to_json(params)},
                  {"skus", per_sku}};
    return p;
}

std::string dataset_hash(const SeriesPanel& panel) {
    Fnv1a h;
    for (const auto& s : panel.sku_ids) h.update(s);
    h.update(std::int64_t{panel.start.days()});
    h.update(static_cast<std::int64_t>(panel.n_days));
    for (const auto& c : panel.countries) h.update(c);
    for (auto c : panel.country_code) h.update(std::int64_t{c});
    h.update(panel.demand.values());
    h.update(panel.revenue.values());
    h.update(panel.mean_price.values());
    return h.hex();
}

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

namespace {

void write_matrix(const SeriesPanel& p, const Tensor& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write '" + path.string() + "'");
    out << "sku";
    for (std::size_t d = 0; d < p.n_days; ++d) out << ',' << p.date(d).to_string();
    out << '\n';
    for (std::size_t i = 0; i < p.n_skus(); ++i) {
        out << p.sku_ids[i];
        for (std::size_t d = 0; d < p.n_days; ++d) out << ',' << format_double(m[i * p.n_days + d]);
        out << '\n';
    }
    if (!out) throw input_error("failed writing '" + path.string() + "'");
}

Tensor read_matrix(const SeriesPanel& p, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("panel: cannot open '" + path.string() + "'");
    std::vector<std::string> row;
    if (!read_csv_row(in, row) || row.size() != p.n_days + 1 || row[0] != "sku") {
        throw input_error("panel: bad header in '" + path.string() + "'");
    }
    if (row[1] != p.start.to_string()) throw input_error("panel: calendar mismatch in '" + path.string() + "'");
    Tensor m(Shape{p.n_skus(), p.n_days});
    for (std::size_t i = 0; i < p.n_skus(); ++i) {
        if (!read_csv_row(in, row) || row.size() != p.n_days + 1 || row[0] != p.sku_ids[i]) {
            throw input_error("panel: row " + std::to_string(i + 1) + " of '" + path.string() + "' is malformed");
        }
        for (std::size_t d = 0; d < p.n_days; ++d) {
            const std::string& f = row[d + 1];
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size()) {
                throw input_error("panel: bad number '" + f + "' in '" + path.string() + "'");
            }
            m[i * p.n_days + d] = v;
        }
    }
    return m;
}

} // namespace

void save_panel(const SeriesPanel& panel, const std::filesystem::path& dir, const nlohmann::json& extra) {
    std::filesystem::create_directories(dir);
    nlohmann::json meta = {{"format_version", 1},
                           {"start", panel.start.to_string()},
                           {"n_days", panel.n_days},
                           {"sku_ids", panel.sku_ids},
                           {"countries", panel.countries},
                           {"country_code", panel.country_code},
                           {"metadata", panel.metadata},
                           {"dataset_hash", dataset_hash(panel)}};
    if (!extra.is_null()) meta["extra"] = extra;
    {
        std::ofstream out(dir / "panel.json", std::ios::binary);
        if (!out) throw input_error("cannot write '" + (dir / "panel.json").string() + "'");
        out << meta.dump(2) << '\n';
    }
    write_matrix(panel, panel.demand, dir / "demand.csv");
    write_matrix(panel, panel.revenue, dir / "revenue.csv");
    write_matrix(panel, panel.mean_price, dir / "mean_price.csv");
}

SeriesPanel load_panel(const std::filesystem::path& dir) {
    std::ifstream in(dir / "panel.json", std::ios::binary);
    if (!in) throw input_error("panel: cannot open '" + (dir / "panel.json").string() + "'");
    SeriesPanel p;
    try {
        const nlohmann::json meta = nlohmann::json::parse(in);
        if (meta.at("format_version").get<int>() != 1) throw input_error("panel: unsupported format_version");
        p.start = Date::parse(meta.at("start").get<std::string>());
        p.n_days = meta.at("n_days").get<std::size_t>();
        p.sku_ids = meta.at("sku_ids").get<std::vector<std::string>>();
        p.countries = meta.at("countries").get<std::vector<std::string>>();
        p.country_code = meta.at("country_code").get<std::vector<std::int32_t>>();
        p.metadata = meta.at("metadata");
    } catch (const nlohmann::json::exception& e) {
        throw input_error(std::string("panel: malformed panel.json: ") + e.what());
    }
    if (p.sku_ids.empty() || p.n_days == 0 || p.country_code.size() != p.sku_ids.size() ||
        !std::is_sorted(p.sku_ids.begin(), p.sku_ids.end())) {
        throw input_error("panel: inconsistent panel.json");
    }
    for (auto c : p.country_code) {
        if (c < 0 || static_cast<std::size_t>(c) >= p.countries.size()) throw input_error("panel: bad country code");
    }
    p.demand = read_matrix(p, dir / "demand.csv");
    p.revenue = read_matrix(p, dir / "revenue.csv");
    p.mean_price = read_matrix(p, dir / "mean_price.csv");
    return p;
}

} // namespace tempora::dataset
