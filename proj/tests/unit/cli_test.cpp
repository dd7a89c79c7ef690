#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "tempora/cli/commands.hpp"
#include "tempora/common/error.hpp"

namespace tempora::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
    int code;
    std::string out, err;
};

Outcome run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("tempora_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Small, fast settings shared by every pipeline test.
const std::vector<std::string> kTiny = {
    "--set", "data.synth_skus=3",     "--set", "data.synth_days=90",   "--set", "model.lookback=14",
    "--set", "model.hidden=6",        "--set", "model.d_k=4",          "--set", "model.head_hidden=6",
    "--set", "model.tcn_channels=3",  "--set", "model.tcn_projection=4", "--set", "train.max_iterations=6",
    "--set", "train.batch_size=8",    "--set", "train.val_every=3",    "--set", "eval.gru_hidden=3",
    "--set", "eval.ridge_lags=7"};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
    args.insert(args.end(), kTiny.begin(), kTiny.end());
    return args;
}

class Pipeline : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        root_ = scratch("pipeline");
        ASSERT_EQ(run(with_tiny({"ingest", "--out", (root_ / "panel").string()})).code, 0);
        const Outcome t = run(with_tiny({"train", "--panel", (root_ / "panel").string(), "--out", (root_ / "run").string()}));
        ASSERT_EQ(t.code, 0) << t.err;
        const Outcome e = run(with_tiny({"evaluate", "--checkpoint", (root_ / "run" / "checkpoint.bin").string(), "--panel",
                                     (root_ / "panel").string(), "--out", (root_ / "eval").string()}));
        ASSERT_EQ(e.code, 0) << e.err;
    }
    static void TearDownTestSuite() { fs::remove_all(root_); }
    static fs::path root_;
};
fs::path Pipeline::root_;

TEST(Config, DefaultsAndEcho) {
    const RunConfig cfg = load_run_config(std::nullopt, {}, std::nullopt);
    EXPECT_EQ(cfg.seed, 42u);
    EXPECT_EQ(cfg.train.learning_rate, 0.005);
    EXPECT_EQ(cfg.train.max_iterations, 1200u);
    EXPECT_EQ(cfg.data.min_active_days, 30u);
    EXPECT_EQ(cfg.eval.cpoi.price, 1.0);
    EXPECT_EQ(cfg.eval.cpoi.cost, 0.5);
    const auto echo = cfg.echo();
    for (const auto& key : config_keys()) {
        const auto dot = key.find('.');
        if (dot == std::string::npos) {
            EXPECT_TRUE(echo.contains(key)) << key;
        } else {
            EXPECT_TRUE(echo[key.substr(0, dot)].contains(key.substr(dot + 1))) << key;
        }
    }
    EXPECT_EQ(echo["model"]["horizons"], nlohmann::json({1, 7, 14}));
    EXPECT_EQ(echo["eval"]["dm_loss"], "both");
}

TEST(Config, PrecedenceFlagOverFileOverDefault) {
    const fs::path dir = scratch("precedence");
    std::ofstream(dir / "c.ini") << "# comment\nseed = 9\n[train]\nlearning_rate = 0.01\nbatch_size = 16\n"
                                    "[model]\nhorizons = 1, 7\n[eval]\n";
    const std::vector<std::string> overrides{"train.learning_rate=0.02"};
    RunConfig cfg = load_run_config(dir / "c.ini", overrides, std::nullopt);
    EXPECT_EQ(cfg.train.learning_rate, 0.02);
    EXPECT_EQ(cfg.train.batch_size, 16u);
    EXPECT_EQ(cfg.train.beta1, 0.9);
    EXPECT_EQ(cfg.model.horizons, (std::vector<int>{1, 7}));
    EXPECT_EQ(cfg.seed, 9u);
    EXPECT_EQ(cfg.train.seed, 9u);
    cfg = load_run_config(dir / "c.ini", {}, 5);
    EXPECT_EQ(cfg.seed, 5u);
    EXPECT_EQ(cfg.train.seed, 5u);
    fs::remove_all(dir);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    const fs::path dir = scratch("unknown");
    std::ofstream(dir / "typo.ini") << "[train]\nlearnig_rate = 0.01\n";
    try {
        load_run_config(dir / "typo.ini", {}, std::nullopt);
        FAIL() << "expected rejection";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Input);
        EXPECT_NE(std::string(e.what()).find("train.learnig_rate"), std::string::npos);
    }
    for (const std::string bad : {"train.max_iterations=abc", "model.decode=sideways", "train.learning_rate=0",
                                  "nosuch.key=1", "train.batch_size", "model.horizons=7,1"}) {
        const std::vector<std::string> o{bad};
        EXPECT_THROW(load_run_config(std::nullopt, o, std::nullopt), Error) << bad;
    }
    EXPECT_THROW(load_run_config(dir / "missing.ini", {}, std::nullopt), Error);
    fs::remove_all(dir);
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"train", "--out", "x"}).code, 2); // --panel missing
    EXPECT_EQ(run({"ingest", "--out", "x", "--set", "train.nope=1"}).code, 2);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Ingest, SyntheticIsDeterministic) {
    const fs::path dir = scratch("ingest_synth");
    ASSERT_EQ(run(with_tiny({"ingest", "--out", (dir / "a").string()})).code, 0);
    ASSERT_EQ(run(with_tiny({"ingest", "--out", (dir / "b").string()})).code, 0);
    for (const char* f : {"panel.json", "demand.csv", "revenue.csv", "mean_price.csv", "ingest_stats.json", "config.json"}) {
        EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    }
    ASSERT_EQ(run(with_tiny({"ingest", "--seed", "7", "--out", (dir / "c").string()})).code, 0);
    EXPECT_NE(slurp(dir / "a" / "demand.csv"), slurp(dir / "c" / "demand.csv"));
    fs::remove_all(dir);
}

const char* kCsvHeader = "Invoice,StockCode,Description,Quantity,InvoiceDate,Price,Customer ID,Country\n";

TEST(Ingest, CsvStatsConserveRows) {
    const fs::path dir = scratch("ingest_csv");
    {
        std::ofstream csv(dir / "tx.csv");
        csv << kCsvHeader;
        for (int d = 1; d <= 28; ++d) {
            char date[32];
            std::snprintf(date, sizeof date, "2010-12-%02d 10:00:00", d <= 28 ? d : 28);
            csv << "5000" << d << ",A1,Thing," << (d % 5 + 1) << ',' << date << ",2.5,17850,United Kingdom\n";
            csv << "5100" << d << ",B2,Other,3," << date << ",1.0,,France\n";
        }
        csv << "C999,A1,Thing,-2,2010-12-05 11:00:00,2.5,17850,United Kingdom\n"; // cancellation
        csv << "50001,A1,Thing,2,2010-12-01 10:00:00,2.5,17850,United Kingdom\n"; // exact duplicate
        csv << "60000,A1,Thing,lots,2010-12-02 10:00:00,2.5,17850,United Kingdom\n"; // unparseable
        csv << "60001,C3,Rare,1,2010-12-02 10:00:00,2.5,17850,United Kingdom\n";   // too few active days
    }
    const Outcome r = run({"ingest", "--out", (dir / "panel").string(), "--set", "data.csv=" + (dir / "tx.csv").string(),
                       "--set", "data.min_active_days=20"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto stats = nlohmann::json::parse(slurp(dir / "panel" / "ingest_stats.json"));
    EXPECT_EQ(stats["rows_read"].get<int>(), 60);
    EXPECT_EQ(stats["rows_skipped"].get<int>(), 1);
    EXPECT_EQ(stats["rows_dropped"].get<int>(), 2);
    EXPECT_EQ(stats["rows_read"].get<int>(),
              stats["rows_kept"].get<int>() + stats["rows_skipped"].get<int>() + stats["rows_dropped"].get<int>());
    EXPECT_EQ(stats["skus_kept"].get<int>(), 2);
    EXPECT_EQ(stats["skus_excluded"].get<int>(), 1);
    fs::remove_all(dir);
}

TEST(Ingest, MissingColumnExitsTwoNamingIt) {
    const fs::path dir = scratch("ingest_missing");
    std::ofstream(dir / "tx.csv") << "Invoice,StockCode,Description,InvoiceDate,Price,Customer ID,Country\n";
    const Outcome r = run({"ingest", "--out", (dir / "panel").string(), "--set", "data.csv=" + (dir / "tx.csv").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("Quantity"), std::string::npos) << r.err;
    fs::remove_all(dir);
}

TEST_F(Pipeline, TrainWritesArtifacts) {
    for (const char* f : {"checkpoint.bin", "history.csv", "config.json", "train_summary.json"}) {
        EXPECT_TRUE(fs::exists(root_ / "run" / f)) << f;
    }
    const auto echo = nlohmann::json::parse(slurp(root_ / "run" / "config.json"));
    EXPECT_EQ(echo["dataset_hash"], nlohmann::json::parse(slurp(root_ / "panel" / "config.json"))["dataset_hash"]);
    EXPECT_EQ(echo["config"]["train"]["max_iterations"], 6);
}

TEST_F(Pipeline, RetrainIsByteIdentical) {
    const fs::path dir = scratch("retrain");
    ASSERT_EQ(run(with_tiny({"train", "--panel", (root_ / "panel").string(), "--out", dir.string()})).code, 0);
    EXPECT_EQ(slurp(dir / "checkpoint.bin"), slurp(root_ / "run" / "checkpoint.bin"));
    fs::remove_all(dir);
}

TEST_F(Pipeline, OneIterationTakesOneStep) {
    const fs::path dir = scratch("one_step");
    auto args = with_tiny({"train", "--panel", (root_ / "panel").string(), "--out", dir.string()});
    args.insert(args.end(), {"--set", "train.max_iterations=1"});
    ASSERT_EQ(run(args).code, 0);
    std::ifstream in(dir / "history.csv");
    std::string line;
    int rows = -1;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 1);
    fs::remove_all(dir);
}

TEST_F(Pipeline, DivergentTrainingExitsThree) {
    const fs::path dir = scratch("diverge");
    auto args = with_tiny({"train", "--panel", (root_ / "panel").string(), "--out", dir.string()});
    args.insert(args.end(), {"--set", "train.learning_rate=1e307", "--set", "train.clip_norm=1e308"});
    const Outcome r = run(args);
    EXPECT_EQ(r.code, 3) << r.err;
    EXPECT_NE(r.err.find("iteration"), std::string::npos) << r.err;
    fs::remove_all(dir);
}

TEST_F(Pipeline, ReportFollowsSchema) {
    const auto report = nlohmann::json::parse(slurp(root_ / "eval" / "report.json"));
    for (const char* key : {"models", "dm", "cpoi_params", "dataset_hash", "config_echo"}) {
        EXPECT_TRUE(report.contains(key)) << key;
    }
    std::vector<std::string> labels;
    for (const auto& m : report["models"]) {
        labels.push_back(m["label"]);
        for (const char* h : {"h1", "h7", "h14", "pooled"})
            for (const char* k : {"mae", "rmse", "smape", "mase", "theil_u2"}) {
                EXPECT_TRUE(m["metrics"][h][k].is_number()) << m["label"] << " " << h << " " << k;
            }
    }
    EXPECT_EQ(labels, (std::vector<std::string>{"hybrid", "naive_last", "seasonal_naive", "ridge_ar", "vanilla_gru"}));
    EXPECT_EQ(report["dm"].size(), 10u * 3u * 2u);
    for (const auto& e : report["dm"]) {
        for (const char* key : {"a", "b", "h", "loss", "stat", "p"}) EXPECT_TRUE(e.contains(key)) << key;
    }
    EXPECT_EQ(report["cpoi_params"], nlohmann::json({{"p", 1.0}, {"c", 0.5}}));
    for (const char* f : {"tse.csv", "cpoi.csv", "metrics.csv", "config.json", "forecasts/hybrid.csv"}) {
        EXPECT_TRUE(fs::exists(root_ / "eval" / f)) << f;
    }
}

TEST_F(Pipeline, ReevaluateIsByteIdentical) {
    const fs::path dir = scratch("reeval");
    ASSERT_EQ(run(with_tiny({"evaluate", "--checkpoint", (root_ / "run" / "checkpoint.bin").string(), "--panel",
                             (root_ / "panel").string(), "--out", dir.string()}))
                  .code,
              0);
    for (const char* f : {"report.json", "metrics.csv", "tse.csv", "cpoi.csv", "forecasts/vanilla_gru.csv"}) {
        EXPECT_EQ(slurp(dir / f), slurp(root_ / "eval" / f)) << f;
    }
    fs::remove_all(dir);
}

TEST_F(Pipeline, HorizonMismatchExitsFour) {
    const fs::path dir = scratch("mismatch");
    auto args = with_tiny({"evaluate", "--checkpoint", (root_ / "run" / "checkpoint.bin").string(), "--panel",
                           (root_ / "panel").string(), "--out", dir.string()});
    args.insert(args.end(), {"--set", "model.horizons=1,7"});
    const Outcome r = run(args);
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("horizon"), std::string::npos) << r.err;

    std::ofstream(dir / "junk.bin") << "not a checkpoint";
    EXPECT_EQ(run(with_tiny({"evaluate", "--checkpoint", (dir / "junk.bin").string(), "--panel",
                             (root_ / "panel").string(), "--out", dir.string()}))
                  .code,
              4);
    fs::remove_all(dir);
}

TEST_F(Pipeline, ForecastPrintsEveryHorizon) {
    const Outcome r = run(with_tiny({"forecast", "--checkpoint", (root_ / "run" / "checkpoint.bin").string(), "--panel",
                                 (root_ / "panel").string(), "--sku", "SKU0001", "--origin", "2010-02-20"}));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    ASSERT_EQ(j["forecasts"].size(), 3u);
    EXPECT_EQ(j["forecasts"][2]["h"], 14);
    EXPECT_EQ(j["forecasts"][2]["date"], "2010-03-06");
    EXPECT_TRUE(j["forecasts"][0]["yhat"].is_number());
    EXPECT_TRUE(j["forecasts"][0].contains("y"));
    EXPECT_EQ(run(with_tiny({"forecast", "--checkpoint", (root_ / "run" / "checkpoint.bin").string(), "--panel",
                             (root_ / "panel").string(), "--sku", "NOPE"}))
                  .code,
              2);
}

TEST_F(Pipeline, CompareSelfIsDegenerateAndOrderNegates) {
    const fs::path dir = scratch("compare");
    fs::copy_file(root_ / "eval" / "forecasts" / "hybrid.csv", dir / "twin.csv");
    const std::string hybrid = (root_ / "eval" / "forecasts" / "hybrid.csv").string();
    const std::string snaive = (root_ / "eval" / "forecasts" / "seasonal_naive.csv").string();

    ASSERT_EQ(run({"compare", hybrid, (dir / "twin.csv").string(), "--out", (dir / "self").string()}).code, 0);
    for (const auto& e : nlohmann::json::parse(slurp(dir / "self" / "compare.json"))["dm"]) {
        EXPECT_EQ(e["stat"], 0.0);
        EXPECT_EQ(e["p"], 1.0);
    }
    ASSERT_EQ(run({"compare", hybrid, snaive, "--out", (dir / "ab").string()}).code, 0);
    ASSERT_EQ(run({"compare", snaive, hybrid, "--out", (dir / "ba").string()}).code, 0);
    const auto ab = nlohmann::json::parse(slurp(dir / "ab" / "compare.json"))["dm"];
    const auto ba = nlohmann::json::parse(slurp(dir / "ba" / "compare.json"))["dm"];
    ASSERT_EQ(ab.size(), 6u);
    ASSERT_EQ(ab.size(), ba.size());
    for (std::size_t i = 0; i < ab.size(); ++i) {
        EXPECT_EQ(ab[i]["h"], ba[i]["h"]);
        EXPECT_EQ(ab[i]["stat"].get<double>(), -ba[i]["stat"].get<double>());
    }
    EXPECT_TRUE(fs::exists(dir / "ab" / "compare.md"));
    fs::remove_all(dir);
}

TEST_F(Pipeline, CompareKeyMismatchExitsFive) {
    const fs::path dir = scratch("compare_mismatch");
    std::ifstream in(root_ / "eval" / "forecasts" / "hybrid.csv");
    std::ofstream cut(dir / "cut.csv");
    std::string line;
    for (int i = 0; std::getline(in, line); ++i)
        if (i != 4) cut << line << '\n';
    cut.close();
    const Outcome r = run({"compare", (root_ / "eval" / "forecasts" / "hybrid.csv").string(), (dir / "cut.csv").string(),
                       "--out", (dir / "out").string()});
    EXPECT_EQ(r.code, 5);
    EXPECT_NE(r.err.find("missing from cut"), std::string::npos) << r.err;
    EXPECT_EQ(run({"compare", (dir / "cut.csv").string(), "--out", (dir / "out").string()}).code, 2);
    fs::remove_all(dir);
}

TEST_F(Pipeline, ExternalCsvRoundTripMatchesReport) {
    const fs::path dir = scratch("roundtrip");
    const Outcome r = run(with_tiny({"compare", (root_ / "eval" / "forecasts" / "ridge_ar.csv").string(),
                                 (root_ / "eval" / "forecasts" / "hybrid.csv").string(), "--panel",
                                 (root_ / "panel").string(), "--out", dir.string()}));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto report = nlohmann::json::parse(slurp(root_ / "eval" / "report.json"));
    const auto cmp = nlohmann::json::parse(slurp(dir / "compare.json"));
    for (const auto& m : cmp["models"]) {
        for (const auto& rm : report["models"]) {
            if (rm["label"] != m["label"]) continue;
            for (const char* h : {"h1", "h7", "h14", "pooled"})
                for (const char* k : {"mae", "rmse", "smape", "mase", "theil_u2"}) {
                    EXPECT_NEAR(m["metrics"][h][k].get<double>(), rm["metrics"][h][k].get<double>(), 1e-12)
                        << m["label"] << " " << h << " " << k;
                }
        }
    }
    fs::remove_all(dir);
}

TEST_F(Pipeline, CommandsLeaveInputsUntouched) {
    std::map<std::string, std::string> before;
    for (const auto& e : fs::recursive_directory_iterator(root_ / "panel")) before[e.path().string()] = slurp(e.path());
    const std::string ckpt = slurp(root_ / "run" / "checkpoint.bin");
    const fs::path dir = scratch("untouched");
    ASSERT_EQ(run(with_tiny({"evaluate", "--checkpoint", (root_ / "run" / "checkpoint.bin").string(), "--panel",
                             (root_ / "panel").string(), "--out", dir.string()}))
                  .code,
              0);
    for (const auto& [path, bytes] : before) EXPECT_EQ(slurp(path), bytes) << path;
    EXPECT_EQ(slurp(root_ / "run" / "checkpoint.bin"), ckpt);
    fs::remove_all(dir);
}

} // namespace
} // namespace tempora::cli
