#include "tempora/evaluation/dm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "tempora/common/error.hpp"

namespace tempora::evaluation {

DmLoss parse_dm_loss(std::string_view name) {
    if (name == "squared") return DmLoss::Squared;
    if (name == "absolute") return DmLoss::Absolute;
    throw input_error("unknown DM loss '" + std::string(name) + "' (expected squared or absolute)");
}

std::string_view dm_loss_name(DmLoss loss) { return loss == DmLoss::Squared ? "squared" : "absolute"; }

namespace {

using Key = std::tuple<dataset::Date, std::string>; // (origin, sku): pooling order

std::map<Key, const ForecastRecord*> index_at(const ForecastSet& fs, int h) {
    std::map<Key, const ForecastRecord*> out;
    for (const auto& r : fs.records)
        if (r.h == h) out.emplace(Key{r.origin, r.sku}, &r);
    return out;
}

double loss_of(DmLoss loss, const ForecastRecord& r) {
    const double e = r.yhat - r.y;
    return loss == DmLoss::Squared ? e * e : std::abs(e);
}

} // namespace

DmResult dm_test(const ForecastSet& a, const ForecastSet& b, DmLoss loss, int h) {
    if (h < 1) throw input_error("dm_test: horizon must be >= 1");
    const auto ia = index_at(a, h);
    const auto ib = index_at(b, h);
    auto pa = ia.begin();
    auto pb = ib.begin();
    while (pa != ia.end() || pb != ib.end()) {
        const bool a_only = pb == ib.end() || (pa != ia.end() && pa->first < pb->first);
        const bool b_only = pa == ia.end() || (pb != ib.end() && pb->first < pa->first);
        if (a_only || b_only) {
            const auto& [origin, sku] = a_only ? pa->first : pb->first;
            throw comparison_mismatch("forecast sets " + a.label + " and " + b.label + " differ: key (" + sku + ", " +
                                      origin.to_string() + ", h=" + std::to_string(h) + ") missing from " +
                                      (a_only ? b.label : a.label));
        }
        ++pa;
        ++pb;
    }
    if (ia.empty()) throw comparison_mismatch("dm_test: no records at horizon " + std::to_string(h));

    std::vector<double> d;
    d.reserve(ia.size());
    for (auto ita = ia.begin(), itb = ib.begin(); ita != ia.end(); ++ita, ++itb) {
        d.push_back(loss_of(loss, *ita->second) - loss_of(loss, *itb->second));
    }
    DmResult res;
    res.n = d.size();
    res.lags = std::min<std::size_t>(static_cast<std::size_t>(h - 1), d.size() - 1);
    if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) return res;

    const double n = static_cast<double>(d.size());
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= n;
    const auto autocov = [&](std::size_t k) {
        double s = 0.0;
        for (std::size_t t = k; t < d.size(); ++t) s += (d[t] - mean) * (d[t - k] - mean);
        return s / n;
    };
    double var = autocov(0);
    for (std::size_t k = 1; k <= res.lags; ++k) {
        var += 2.0 * (1.0 - static_cast<double>(k) / static_cast<double>(res.lags + 1)) * autocov(k);
    }
    if (!(var > 0.0)) {
        res.statistic = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
        res.p_value = mean == 0.0 ? 1.0 : 0.0;
        return res;
    }
    res.statistic = mean / std::sqrt(var / n);
    res.p_value = std::erfc(std::abs(res.statistic) / std::sqrt(2.0));
    return res;
}

} // namespace tempora::evaluation
