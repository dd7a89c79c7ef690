#include "tempora/evaluation/forecast_set.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "tempora/common/error.hpp"
#include "tempora/dataset/transactions.hpp"

namespace tempora::evaluation {

namespace {

bool plain_name(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-' ||
               c == '.';
    });
}

std::string key_text(const ForecastRecord& r) {
    return "(" + r.sku + ", " + r.origin.to_string() + ", h=" + std::to_string(r.h) + ")";
}

template <class T>
bool parse_number(const std::string& s, T& out) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

} // namespace

void ForecastSet::validate() const {
    if (!plain_name(label)) throw input_error("forecast set label '" + label + "' must match [A-Za-z0-9_.-]+");
    std::set<std::tuple<std::string, dataset::Date, int>> seen;
    for (const auto& r : records) {
        if (r.h < 1) throw input_error("forecast set " + label + ": horizon must be >= 1 at " + key_text(r));
        if (!std::isfinite(r.y) || !std::isfinite(r.yhat)) {
            throw input_error("forecast set " + label + ": non-finite value at " + key_text(r));
        }
        if (!seen.emplace(r.sku, r.origin, r.h).second) {
            throw input_error("forecast set " + label + ": duplicate key " + key_text(r));
        }
    }
}

std::vector<int> ForecastSet::horizons() const {
    std::set<int> hs;
    for (const auto& r : records) hs.insert(r.h);
    return {hs.begin(), hs.end()};
}

ForecastSet ForecastSet::at_horizon(int h) const {
    ForecastSet out{label, target, {}};
    for (const auto& r : records)
        if (r.h == h) out.records.push_back(r);
    return out;
}

ForecastSet make_forecast_set(std::string label, const dataset::SeriesPanel& panel,
                              std::span<const dataset::WindowSample> windows, std::span<const int> horizons,
                              std::span<const double> yhat, dataset::TargetMode mode) {
    if (yhat.size() != windows.size() * horizons.size()) {
        throw std::invalid_argument("make_forecast_set: prediction count does not match windows x horizons");
    }
    ForecastSet fs{std::move(label), mode, {}};
    fs.records.reserve(yhat.size());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        if (w.target.size() != horizons.size()) throw input_error("make_forecast_set: window without targets");
        for (std::size_t k = 0; k < horizons.size(); ++k) {
            fs.records.push_back({panel.sku_ids[w.sku], panel.date(w.origin), horizons[k], yhat[i * horizons.size() + k],
                                  w.target[k]});
        }
    }
    return fs;
}

void write_forecast_csv(const ForecastSet& fs, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write '" + path.string() + "'");
    out << "sku,origin,h,yhat,y\n";
    for (const auto& r : fs.records) {
        out << r.sku << ',' << r.origin.to_string() << ',' << r.h << ',' << dataset::format_double(r.yhat) << ','
            << dataset::format_double(r.y) << '\n';
    }
    if (!out) throw input_error("failed writing '" + path.string() + "'");
}

ForecastSet read_forecast_csv(const std::filesystem::path& path, std::string label) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open forecast set '" + path.string() + "'");
    ForecastSet fs;
    fs.label = label.empty() ? path.stem().string() : std::move(label);
    std::vector<std::string> row;
    if (!dataset::read_csv_row(in, row) || row != std::vector<std::string>{"sku", "origin", "h", "yhat", "y"}) {
        throw input_error("forecast set '" + path.string() + "': header must be sku,origin,h,yhat,y");
    }
    std::size_t line = 1;
    while (dataset::read_csv_row(in, row)) {
        ++line;
        if (row.size() == 1 && row[0].empty()) continue;
        const auto bad = [&](const std::string& what) {
            return input_error("forecast set '" + path.string() + "' line " + std::to_string(line) + ": " + what);
        };
        if (row.size() != 5) throw bad("expected 5 fields, found " + std::to_string(row.size()));
        ForecastRecord r;
        r.sku = row[0];
        if (r.sku.empty()) throw bad("empty sku");
        try {
            r.origin = dataset::Date::parse(row[1]);
        } catch (const std::exception&) {
            throw bad("bad origin date '" + row[1] + "'");
        }
        if (!parse_number(row[2], r.h)) throw bad("bad horizon '" + row[2] + "'");
        if (!parse_number(row[3], r.yhat)) throw bad("bad yhat '" + row[3] + "'");
        if (!parse_number(row[4], r.y)) throw bad("bad y '" + row[4] + "'");
        fs.records.push_back(std::move(r));
    }
    fs.validate();
    return fs;
}

} // namespace tempora::evaluation
