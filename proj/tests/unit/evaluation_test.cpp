#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "tempora/common/error.hpp"
#include "tempora/common/rng.hpp"
#include "tempora/evaluation/report.hpp"

namespace tempora::evaluation {
namespace {

using dataset::Date;
using dataset::SeriesPanel;
using numerics::Tensor;

const Date kStart = Date::from_ymd(2011, 3, 1);

SeriesPanel random_panel(Rng& rng, std::size_t n_skus, std::size_t n_days) {
    SeriesPanel p;
    for (std::size_t i = 0; i < n_skus; ++i) p.sku_ids.push_back("S" + std::to_string(10 + i));
    p.start = kStart;
    p.n_days = n_days;
    p.demand = Tensor({n_skus, n_days}, 0.0);
    for (double& v : p.demand.values()) v = rng.below(4) == 0 ? 0.0 : static_cast<double>(rng.below(30));
    p.revenue = p.demand;
    p.mean_price = Tensor({n_skus, n_days}, 1.0);
    p.country_code.assign(n_skus, 0);
    p.countries = {"X"};
    return p;
}

// Records for random (sku, origin, h) triples with targets read from the panel.
ForecastSet random_set(Rng& rng, const SeriesPanel& p, std::size_t first_origin) {
    ForecastSet fs{"m", dataset::TargetMode::Demand, {}};
    for (std::size_t i = 0; i < p.n_skus(); ++i)
        for (std::size_t t = first_origin; t + 14 < p.n_days; ++t)
            for (int h : {1, 7, 14}) {
                if (rng.below(3) == 0) continue;
                const double y = p.demand[i * p.n_days + t + h];
                const double yhat = rng.below(5) == 0 ? 0.0 : std::max(0.0, y + rng.normal() * 5.0);
                fs.records.push_back({p.sku_ids[i], p.date(t), h, yhat, y});
            }
    return fs;
}

TEST(ForecastSet, RejectsDuplicatesAndNonFinite) {
    ForecastSet fs{"m", dataset::TargetMode::Demand, {{"A", kStart, 1, 1.0, 2.0}, {"A", kStart, 7, 1.0, 2.0}}};
    EXPECT_NO_THROW(fs.validate());
    fs.records.push_back({"A", kStart, 1, 3.0, 2.0});
    EXPECT_THROW(fs.validate(), Error);
    fs.records.back() = {"B", kStart, 1, NAN, 2.0};
    EXPECT_THROW(fs.validate(), Error);
    fs.records.back() = {"B", kStart, 0, 1.0, 2.0};
    EXPECT_THROW(fs.validate(), Error);
    fs.records.pop_back();
    fs.label = "bad label";
    EXPECT_THROW(fs.validate(), Error);
}

TEST(ForecastSet, CsvRoundTripIsExact) {
    Rng rng(5);
    const SeriesPanel p = random_panel(rng, 3, 60);
    ForecastSet fs = random_set(rng, p, 7);
    for (auto& r : fs.records) r.yhat += 1.0 / 3.0;
    const auto path = std::filesystem::temp_directory_path() / "tempora_fs_roundtrip.csv";
    write_forecast_csv(fs, path);
    const ForecastSet back = read_forecast_csv(path, "m");
    EXPECT_EQ(back.records, fs.records);
    EXPECT_EQ(read_forecast_csv(path).label, "tempora_fs_roundtrip");
    std::filesystem::remove(path);
}

TEST(ForecastSet, MalformedCsvNamesTheLine) {
    const auto path = std::filesystem::temp_directory_path() / "tempora_fs_bad.csv";
    std::ofstream(path) << "sku,origin,h,yhat,y\nA,2011-03-01,1,2,3\nA,2011-03-02,x,2,3\n";
    try {
        read_forecast_csv(path);
        FAIL() << "expected rejection";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Input);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
    std::ofstream(path) << "sku,origin,h,yhat\n";
    EXPECT_THROW(read_forecast_csv(path), Error);
    std::filesystem::remove(path);
}

TEST(Metrics, PerfectForecastIsZero) {
    ForecastSet fs{"m", dataset::TargetMode::Demand, {{"A", kStart, 1, 4.0, 4.0}, {"A", kStart + 1, 1, 0.0, 0.0}}};
    EXPECT_EQ(metric(MetricKind::Mae, fs), 0.0);
    EXPECT_EQ(metric(MetricKind::Rmse, fs), 0.0);
    EXPECT_EQ(metric(MetricKind::Smape, fs), 0.0);
}

TEST(Metrics, SmapeSingleRecord) {
    ForecastSet fs{"m", dataset::TargetMode::Demand, {{"A", kStart, 1, 110.0, 100.0}}};
    EXPECT_NEAR(metric(MetricKind::Smape, fs), 200.0 * 10.0 / 210.0, 1e-12);
    EXPECT_NEAR(metric(MetricKind::Smape, fs), 9.5238095238095237, 1e-12);
}

TEST(Metrics, SmapeStaysInRange) {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        ForecastSet fs{"m", dataset::TargetMode::Demand, {}};
        for (int i = 0; i < 40; ++i) {
            const double y = rng.below(3) == 0 ? 0.0 : rng.uniform(-50, 50);
            const double yhat = rng.below(3) == 0 ? 0.0 : rng.uniform(-50, 50);
            fs.records.push_back({"A", kStart + i, 1, yhat, y});
        }
        const double s = metric(MetricKind::Smape, fs);
        EXPECT_TRUE(std::isfinite(s));
        EXPECT_GE(s, 0.0);
        EXPECT_LE(s, 200.0);
    }
}

TEST(Metrics, EmptySetRejected) {
    EXPECT_THROW(metric(MetricKind::Mae, ForecastSet{}), Error);
}

TEST(Metrics, ScaledMetricsNeedContext) {
    ForecastSet fs{"m", dataset::TargetMode::Demand, {{"A", kStart, 1, 1.0, 2.0}}};
    EXPECT_THROW(metric(MetricKind::Mase, fs), Error);
    EXPECT_THROW(metric(MetricKind::TheilU2, fs), Error);
    const MetricRow row = metric_row(fs);
    EXPECT_FALSE(row.mase.has_value());
    EXPECT_FALSE(row.theil_u2.has_value());
}

// Direct-definition oracles written independently of the library loops.
struct Oracle {
    const SeriesPanel& p;
    std::size_t train_end;

    double y(const std::string& sku, Date d) const {
        std::size_t i = 0;
        while (p.sku_ids[i] != sku) ++i;
        return p.demand[i * p.n_days + static_cast<std::size_t>(d - p.start)];
    }
    double scale(const std::string& sku) const {
        double s = 0.0;
        for (std::size_t d = 7; d <= train_end; ++d) s += std::abs(y(sku, p.start + d) - y(sku, p.start + d - 7));
        return s / static_cast<double>(train_end - 6);
    }
    double mase(const ForecastSet& fs) const {
        double num = 0.0;
        double n = 0.0;
        for (const auto& r : fs.records) {
            const double s = scale(r.sku);
            if (s == 0.0) continue;
            num += std::abs(r.yhat - r.y) / s;
            n += 1.0;
        }
        return num / n;
    }
    double theil(const ForecastSet& fs) const {
        double weighted = 0.0;
        double n = 0.0;
        for (const auto& sku : p.sku_ids) {
            double a = 0.0, b = 0.0, k = 0.0;
            for (const auto& r : fs.records) {
                if (r.sku != sku) continue;
                a += std::pow(r.yhat - r.y, 2);
                b += std::pow(y(sku, r.origin + r.h - 1) - r.y, 2);
                k += 1.0;
            }
            if (k == 0.0 || b == 0.0) continue;
            weighted += k * std::sqrt(a / b);
            n += k;
        }
        return weighted / n;
    }
};

TEST(Metrics, MatchDirectDefinitionsOnRandomSets) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(mix_seed(77, seed));
        const SeriesPanel p = random_panel(rng, 1 + rng.below(4), 50 + rng.below(30));
        const std::size_t train_end = 20 + rng.below(10);
        const ForecastSet fs = random_set(rng, p, train_end);
        ASSERT_FALSE(fs.records.empty());
        const ScaleContext ctx{&p, dataset::TargetMode::Demand, train_end, 7};
        const Oracle o{p, train_end};

        double ae = 0.0, se = 0.0, sm = 0.0;
        for (const auto& r : fs.records) {
            ae += std::abs(r.y - r.yhat);
            se += (r.y - r.yhat) * (r.y - r.yhat);
            if (r.y != 0.0 || r.yhat != 0.0) sm += std::abs(r.yhat - r.y) / (std::abs(r.y) + std::abs(r.yhat));
        }
        const double n = static_cast<double>(fs.records.size());
        EXPECT_NEAR(metric(MetricKind::Mae, fs), ae / n, 1e-10);
        EXPECT_NEAR(metric(MetricKind::Rmse, fs), std::sqrt(se / n), 1e-10);
        EXPECT_NEAR(metric(MetricKind::Smape, fs), 200.0 / n * sm, 1e-10);
        EXPECT_NEAR(metric(MetricKind::Mase, fs, &ctx), o.mase(fs), 1e-10);
        EXPECT_NEAR(metric(MetricKind::TheilU2, fs, &ctx), o.theil(fs), 1e-10);
    }
}

TEST(Metrics, SeasonalNaiveInSampleMaseIsOne) {
    Rng rng(3);
    const SeriesPanel p = random_panel(rng, 4, 90);
    const std::size_t train_end = 62;
    ForecastSet fs{"snaive", dataset::TargetMode::Demand, {}};
    for (std::size_t i = 0; i < p.n_skus(); ++i)
        for (std::size_t d = 7; d <= train_end; ++d) {
            fs.records.push_back({p.sku_ids[i], p.date(d - 1), 1, p.demand[i * p.n_days + d - 7], p.demand[i * p.n_days + d]});
        }
    const ScaleContext ctx{&p, dataset::TargetMode::Demand, train_end, 7};
    EXPECT_NEAR(metric(MetricKind::Mase, fs, &ctx), 1.0, 1e-12);
}

TEST(Metrics, PreviousActualTheilIsOne) {
    Rng rng(4);
    const SeriesPanel p = random_panel(rng, 3, 50);
    ForecastSet fs{"naive", dataset::TargetMode::Demand, {}};
    for (std::size_t i = 0; i < p.n_skus(); ++i)
        for (std::size_t t = 10; t + 7 < p.n_days; ++t)
            for (int h : {1, 7}) {
                const std::size_t d = t + h;
                fs.records.push_back({p.sku_ids[i], p.date(t), h, p.demand[i * p.n_days + d - 1], p.demand[i * p.n_days + d]});
            }
    const ScaleContext ctx{&p, dataset::TargetMode::Demand, 30, 7};
    EXPECT_NEAR(metric(MetricKind::TheilU2, fs, &ctx), 1.0, 1e-12);
}

TEST(Metrics, ForecastMatchingScaleGivesMaseOne) {
    SeriesPanel p;
    p.sku_ids = {"A"};
    p.start = kStart;
    p.n_days = 30;
    p.demand = Tensor({1, 30}, 0.0);
    for (std::size_t d = 0; d < 30; ++d) p.demand[d] = static_cast<double>(d % 7 == 0 ? 4 : 1);
    p.demand[14] = 7.0; // seasonal-naive in-sample errors: 3 at d=14 and d=21
    const ScaleContext ctx{&p, dataset::TargetMode::Demand, 21, 7};
    EXPECT_DOUBLE_EQ(seasonal_naive_scale(ctx, 0), 6.0 / 15.0);
    ForecastSet fs{"m", dataset::TargetMode::Demand, {{"A", p.date(22), 1, 1.4, 1.0}}};
    EXPECT_NEAR(metric(MetricKind::Mase, fs, &ctx), 1.0, 1e-12);
}

TEST(Metrics, ConstantTrainingSeriesExcludedAndCounted) {
    SeriesPanel p;
    p.sku_ids = {"A", "B"};
    p.start = kStart;
    p.n_days = 30;
    p.demand = Tensor({2, 30}, 5.0);
    for (std::size_t d = 0; d < 30; ++d) p.demand[30 + d] = static_cast<double>(d % 3);
    const ScaleContext ctx{&p, dataset::TargetMode::Demand, 20, 7};
    ForecastSet fs{"m", dataset::TargetMode::Demand, {{"A", p.date(22), 1, 6.0, 5.0}, {"B", p.date(22), 1, 3.0, 2.0}}};
    const MetricRow row = metric_row(fs, &ctx);
    EXPECT_EQ(row.mase_excluded, 1u);
    ASSERT_TRUE(row.mase.has_value());
    EXPECT_NEAR(*row.mase, 1.0 / seasonal_naive_scale(ctx, 1), 1e-12);

    ForecastSet only_a{"m", dataset::TargetMode::Demand, {{"A", p.date(22), 1, 6.0, 5.0}}};
    EXPECT_THROW(metric(MetricKind::Mase, only_a, &ctx), Error);
    EXPECT_FALSE(metric_row(only_a, &ctx).mase.has_value());
}

ForecastSet dominance_pair(ForecastSet& b, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    ForecastSet a{"a", dataset::TargetMode::Demand, {}};
    b = ForecastSet{"b", dataset::TargetMode::Demand, {}};
    for (std::size_t t = 0; t < n; ++t) {
        const double y = rng.uniform(0, 20);
        const double ea = rng.uniform(0.0, 1.0);
        const double eb = ea + rng.uniform(0.2, 2.0);
        const double sign = rng.below(2) ? 1.0 : -1.0;
        a.records.push_back({"S" + std::to_string(t % 4), kStart + static_cast<std::int32_t>(t / 4), 7, y + sign * ea, y});
        b.records.push_back({"S" + std::to_string(t % 4), kStart + static_cast<std::int32_t>(t / 4), 7, y - sign * eb, y});
    }
    return a;
}

// Newey-West written as a full double sum over (t, s) pairs.
double brute_force_dm(const ForecastSet& a, const ForecastSet& b, DmLoss loss, int h) {
    std::map<std::pair<Date, std::string>, double> la, lb;
    const auto L = [&](const ForecastRecord& r) {
        return loss == DmLoss::Squared ? std::pow(r.yhat - r.y, 2) : std::abs(r.yhat - r.y);
    };
    for (const auto& r : a.records)
        if (r.h == h) la[{r.origin, r.sku}] = L(r);
    for (const auto& r : b.records)
        if (r.h == h) lb[{r.origin, r.sku}] = L(r);
    std::vector<double> d;
    for (const auto& [k, v] : la) d.push_back(v - lb.at(k));
    const double n = static_cast<double>(d.size());
    double mean = 0.0;
    for (double v : d) mean += v / n;
    double v = 0.0;
    for (std::size_t t = 0; t < d.size(); ++t)
        for (std::size_t s = 0; s < d.size(); ++s) {
            const double lag = std::abs(static_cast<double>(t) - static_cast<double>(s));
            if (lag < h) v += (1.0 - lag / h) * (d[t] - mean) * (d[s] - mean);
        }
    v /= n;
    return mean / std::sqrt(v / n);
}

TEST(DieboldMariano, IdenticalInputsAreDegenerate) {
    Rng rng(1);
    const SeriesPanel p = random_panel(rng, 2, 50);
    const ForecastSet fs = random_set(rng, p, 10);
    for (DmLoss loss : {DmLoss::Squared, DmLoss::Absolute}) {
        const DmResult r = dm_test(fs, fs, loss, 7);
        EXPECT_EQ(r.statistic, 0.0);
        EXPECT_EQ(r.p_value, 1.0);
    }
}

TEST(DieboldMariano, SwappingNegatesExactly) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const SeriesPanel p = random_panel(rng, 3, 60);
        const ForecastSet a = random_set(rng, p, 10);
        ForecastSet b = a;
        b.label = "b";
        for (auto& r : b.records) r.yhat += rng.normal();
        for (int h : {1, 7, 14})
            for (DmLoss loss : {DmLoss::Squared, DmLoss::Absolute}) {
                const DmResult ab = dm_test(a, b, loss, h);
                const DmResult ba = dm_test(b, a, loss, h);
                EXPECT_EQ(ab.statistic, -ba.statistic);
                EXPECT_EQ(ab.p_value, ba.p_value);
            }
    }
}

TEST(DieboldMariano, HorizonOneUsesPlainVariance) {
    ForecastSet a{"a", dataset::TargetMode::Demand, {}}, b{"b", dataset::TargetMode::Demand, {}};
    const double ea[] = {1, 2, 0, 3};
    const double eb[] = {2, 2, 2, 2};
    for (int t = 0; t < 4; ++t) {
        a.records.push_back({"A", kStart + t, 1, ea[t], 0.0});
        b.records.push_back({"A", kStart + t, 1, eb[t], 0.0});
    }
    // d = |ea| - |eb| = [-1, 0, -2, 1]; mean -0.5; var (1/n) = 1.25
    const DmResult r = dm_test(a, b, DmLoss::Absolute, 1);
    EXPECT_EQ(r.lags, 0u);
    EXPECT_NEAR(r.statistic, -0.5 / std::sqrt(1.25 / 4.0), 1e-15);
    EXPECT_NEAR(r.p_value, std::erfc(std::abs(r.statistic) / std::sqrt(2.0)), 1e-15);
}

TEST(DieboldMariano, DominanceIsSignificantAndMatchesBruteForce) {
    ForecastSet b;
    const ForecastSet a = dominance_pair(b, 200, 12);
    for (DmLoss loss : {DmLoss::Squared, DmLoss::Absolute}) {
        const DmResult r = dm_test(a, b, loss, 7);
        EXPECT_EQ(r.n, 200u);
        EXPECT_EQ(r.lags, 6u);
        EXPECT_LT(r.statistic, 0.0);
        EXPECT_LT(r.p_value, 0.05);
        EXPECT_NEAR(r.statistic, brute_force_dm(a, b, loss, 7), 1e-10);
    }
}

TEST(DieboldMariano, KeyMismatchNamesFirstMissingKey) {
    ForecastSet b;
    ForecastSet a = dominance_pair(b, 20, 3);
    b.records.erase(b.records.begin() + 5);
    try {
        dm_test(a, b, DmLoss::Squared, 7);
        FAIL() << "expected rejection";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ComparisonMismatch);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("(S1, " + (kStart + 1).to_string() + ", h=7) missing from b"), std::string::npos) << msg;
    }
    EXPECT_THROW(dm_test(a, a, DmLoss::Squared, 1), Error);
}

TEST(Tse, Examples) {
    ForecastSet fs{"m", dataset::TargetMode::Demand,
                   {{"A", kStart, 1, 4.0, 5.0}, {"B", kStart, 1, 6.0, 3.0}, {"A", kStart + 1, 1, 2.0, 2.0},
                    {"A", kStart, 7, 0.0, 9.0}}};
    const auto tse = tse_trajectory(fs, 1);
    ASSERT_EQ(tse.size(), 2u);
    EXPECT_EQ(tse[0].origin, kStart);
    EXPECT_EQ(tse[0].value, 2.0);
    EXPECT_EQ(tse[1].value, 0.0);

    ForecastSet single{"m", dataset::TargetMode::Demand, {}};
    const double errs[] = {3, 0, 1.5};
    for (int t = 2; t >= 0; --t) single.records.push_back({"A", kStart + t, 1, 10.0 + errs[t], 10.0});
    const auto st = tse_trajectory(single, 1);
    for (int t = 0; t < 3; ++t) EXPECT_EQ(st[t].value, errs[t]);
}

TEST(Cpoi, ProfitExamples) {
    const CpoiParams d;
    EXPECT_EQ(newsvendor_profit(10.0, 8.0, d), 3.0);
    EXPECT_EQ(newsvendor_profit(8.0, 8.0, d), 4.0);
    EXPECT_EQ(newsvendor_profit(0.0, 8.0, d), 0.0);
    EXPECT_EQ(newsvendor_profit(-3.0, 8.0, d), 0.0);
    EXPECT_EQ(newsvendor_profit(0.4, 0.0, d), 0.0);
    EXPECT_THROW((CpoiParams{1.0, 1.0}.validate()), Error);
    EXPECT_THROW((CpoiParams{1.0, 0.0}.validate()), Error);
}

TEST(Cpoi, TrajectoryAccumulatesInOriginOrder) {
    ForecastSet fs{"m", dataset::TargetMode::Demand,
                   {{"A", kStart + 1, 1, 10.0, 8.0}, {"A", kStart, 1, 8.0, 8.0}, {"B", kStart, 1, 0.0, 5.0}}};
    const auto c = cpoi_trajectory(fs, 1, {});
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0].value, 4.0);
    EXPECT_EQ(c[1].value, 7.0);
}

TEST(Cpoi, PerfectForecastDominates) {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const SeriesPanel p = random_panel(rng, 3, 50);
        const ForecastSet other = random_set(rng, p, 5);
        ForecastSet perfect = other;
        for (auto& r : perfect.records) r.yhat = r.y;
        for (int h : {1, 7, 14}) {
            const auto best = cpoi_trajectory(perfect, h, {});
            const auto cand = cpoi_trajectory(other, h, {});
            ASSERT_EQ(best.size(), cand.size());
            for (std::size_t i = 0; i < best.size(); ++i) EXPECT_GE(best[i].value, cand[i].value);
        }
    }
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TEST(Report, EmptyListRejected) {
    const DmLoss losses[] = {DmLoss::Squared};
    EXPECT_THROW(build_report({}, nullptr, {}, losses, "", {}), Error);
}

TEST(Report, DuplicateLabelsRejected) {
    Rng rng(2);
    const SeriesPanel p = random_panel(rng, 2, 40);
    const ForecastSet fs = random_set(rng, p, 10);
    const ForecastSet sets[] = {fs, fs};
    const DmLoss losses[] = {DmLoss::Squared};
    EXPECT_THROW(build_report(sets, nullptr, {}, losses, "", {}), Error);
}

TEST(Report, EmitIsDeterministicAndRoundTrips) {
    Rng rng(9);
    const SeriesPanel p = random_panel(rng, 3, 70);
    const ScaleContext ctx{&p, dataset::TargetMode::Demand, 35, 7};
    ForecastSet a = random_set(rng, p, 36);
    a.label = "hybrid";
    ForecastSet b = a;
    b.label = "other";
    for (auto& r : b.records) r.yhat = std::max(0.0, r.yhat + rng.normal());
    const ForecastSet sets[] = {a, b};
    const DmLoss losses[] = {DmLoss::Squared, DmLoss::Absolute};
    const nlohmann::json echo = {{"seed", 42}};
    const auto dir1 = std::filesystem::temp_directory_path() / "tempora_report_1";
    const auto dir2 = std::filesystem::temp_directory_path() / "tempora_report_2";
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
    report_emit(build_report(sets, &ctx, {}, losses, dataset::dataset_hash(p), echo), dir1);
    report_emit(build_report(sets, &ctx, {}, losses, dataset::dataset_hash(p), echo), dir2);
    for (const char* f : {"report.json", "metrics.csv", "tse.csv", "cpoi.csv", "forecasts/hybrid.csv", "forecasts/other.csv"}) {
        const std::string one = slurp(dir1 / f);
        EXPECT_FALSE(one.empty()) << f;
        EXPECT_EQ(one, slurp(dir2 / f)) << f;
    }

    const auto report = nlohmann::json::parse(slurp(dir1 / "report.json"));
    ASSERT_EQ(report["models"].size(), 2u);
    EXPECT_EQ(report["dm"].size(), 3u * 2u);
    EXPECT_EQ(report["cpoi_params"]["p"], 1.0);
    EXPECT_EQ(report["cpoi_params"]["c"], 0.5);
    EXPECT_EQ(report["dataset_hash"], dataset::dataset_hash(p));
    EXPECT_EQ(report["config_echo"], echo);
    for (const auto& m : report["models"]) {
        const ForecastSet back = read_forecast_csv(dir1 / "forecasts" / (m["label"].get<std::string>() + ".csv"));
        for (const char* key : {"h1", "h7", "h14", "pooled"}) {
            const auto& row = m["metrics"][key];
            for (const char* name : {"mae", "rmse", "smape", "mase", "theil_u2"}) ASSERT_TRUE(row.contains(name));
            const ForecastSet part =
                std::string(key) == "pooled" ? back : back.at_horizon(std::stoi(std::string(key).substr(1)));
            for (const char* name : {"mae", "rmse", "smape", "mase", "theil_u2"}) {
                EXPECT_NEAR(row[name].get<double>(), metric(parse_metric_kind(name), part, &ctx), 1e-12);
            }
        }
    }
    std::filesystem::remove_all(dir1);
    std::filesystem::remove_all(dir2);
}

} // namespace
} // namespace tempora::evaluation
