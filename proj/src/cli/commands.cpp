#include "tempora/cli/commands.hpp"

#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"

#include "tempora/common/error.hpp"
#include "tempora/training/checkpoint.hpp"

namespace tempora::cli {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw input_error("cannot create '" + dir.string() + "': " + ec.message());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
    if (!out) throw input_error("failed writing '" + path.string() + "'");
}

void write_echo(const fs::path& out, const nlohmann::json& config, const std::string& hash) {
    write_json(out / "config.json", {{"config", config}, {"dataset_hash", hash}});
}

dataset::SeriesPanel open_panel(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw input_error("panel directory '" + dir.string() + "' does not exist");
    return dataset::load_panel(dir);
}

struct LoadedModel {
    training::Checkpoint ckpt;
    model::HybridForecaster model;
    dataset::FeatureScaling scaling;
    dataset::TargetMode target;
};

// Loads a checkpoint and checks it belongs to this panel and config.
LoadedModel open_checkpoint(const RunConfig& cfg, const fs::path& path, const dataset::SeriesPanel& panel) {
    if (!fs::is_regular_file(path)) throw input_error("checkpoint '" + path.string() + "' does not exist");
    training::Checkpoint ckpt = training::load_checkpoint(path);
    const auto& c = ckpt.config;
    if (!c.contains("dataset_hash") || !c.contains("scaling") || !c.contains("target")) {
        throw artifact_mismatch("checkpoint " + path.string() + " lacks dataset_hash, scaling or target");
    }
    const std::string hash = dataset::dataset_hash(panel);
    if (c.at("dataset_hash").get<std::string>() != hash) {
        throw artifact_mismatch("checkpoint was trained on dataset " + c.at("dataset_hash").get<std::string>() +
                                " but the panel hashes to " + hash);
    }
    model::HybridForecaster m = ckpt.forecaster();
    const auto& mc = m.config();
    if (mc.horizons != cfg.model.horizons) {
        throw artifact_mismatch("horizon mismatch: checkpoint " + nlohmann::json(mc.horizons).dump() + ", config " +
                                nlohmann::json(cfg.model.horizons).dump());
    }
    if (mc.lookback != cfg.model.lookback) {
        throw artifact_mismatch("lookback mismatch: checkpoint " + std::to_string(mc.lookback) + ", config " +
                                std::to_string(cfg.model.lookback));
    }
    const auto target = dataset::parse_target_mode(c.at("target").get<std::string>());
    if (target != cfg.data.target) throw artifact_mismatch("target mode differs between checkpoint and config");
    auto scaling = dataset::FeatureScaling::from_json(c.at("scaling"));
    if (scaling.target_mean.size() != panel.n_skus()) throw artifact_mismatch("checkpoint scaling does not fit the panel");
    return {std::move(ckpt), std::move(m), std::move(scaling), target};
}

} // namespace

void cmd_ingest(const RunConfig& cfg, const fs::path& out) {
    ensure_dir(out);
    dataset::SeriesPanel panel;
    nlohmann::json stats;
    if (!cfg.data.csv.empty()) {
        const auto ingested = dataset::ingest_csv(cfg.data.csv);
        dataset::CleanStats cs;
        const auto cleaned = dataset::clean(ingested.records, &cs);
        auto agg = dataset::aggregate_daily(cleaned, cfg.data.min_active_days);
        panel = std::move(agg.panel);
        stats = {{"source", cfg.data.csv},
                 {"rows_read", ingested.rows_read},
                 {"rows_kept", cleaned.size()},
                 {"rows_skipped", ingested.rows_skipped},
                 {"rows_dropped", cs.duplicates + cs.invalid},
                 {"duplicates", cs.duplicates},
                 {"invalid", cs.invalid},
                 {"skus_kept", agg.skus_kept},
                 {"skus_excluded", agg.skus_excluded}};
    } else {
        panel = dataset::synth_generate(cfg.seed, cfg.data.synth_skus, cfg.data.synth_days, cfg.data.synth);
        stats = {{"source", "synthetic"}, {"rows_read", 0},     {"rows_kept", 0},
                 {"rows_skipped", 0},     {"rows_dropped", 0},  {"duplicates", 0},
                 {"invalid", 0},          {"skus_kept", panel.n_skus()}, {"skus_excluded", 0}};
    }
    const std::string hash = dataset::dataset_hash(panel);
    stats["n_days"] = panel.n_days;
    stats["start"] = panel.start.to_string();
    stats["dataset_hash"] = hash;
    dataset::save_panel(panel, out);
    write_json(out / "ingest_stats.json", stats);
    write_echo(out, cfg.echo(), hash);
}

void cmd_train(const RunConfig& cfg, const fs::path& panel_dir, const fs::path& out) {
    const dataset::SeriesPanel panel = open_panel(panel_dir);
    const std::string hash = dataset::dataset_hash(panel);
    model::ModelConfig mc = cfg.model;
    mc.n_countries = std::max<std::size_t>(1, panel.countries.size());
    const auto wc = cfg.window();
    const auto splits = dataset::make_splits(panel, cfg.split.resolve(panel), wc);

    ensure_dir(out);
    const auto result = training::train(model::HybridForecaster::init(mc, cfg.seed), splits.train, splits.val,
                                        cfg.loss, cfg.train);
    const nlohmann::json ckpt_config = {{"run", cfg.echo()},
                                        {"dataset_hash", hash},
                                        {"scaling", splits.scaling.to_json()},
                                        {"target", dataset::target_mode_name(wc.target)}};
    training::save_checkpoint(training::make_checkpoint(result, ckpt_config, cfg.seed), out / "checkpoint.bin");
    training::write_history_csv(result.history, out / "history.csv");
    const auto best = result.best();
    write_json(out / "train_summary.json", {{"iterations", result.state.iteration},
                                            {"stop_reason", result.stop_reason},
                                            {"best_iteration", result.state.best_iter},
                                            {"best_val_primary", result.state.best_val},
                                            {"train_mse_scaled", training::scaled_mse(best, splits.train)},
                                            {"val_mse_scaled", training::scaled_mse(best, splits.val)},
                                            {"windows", {{"train", splits.train.size()},
                                                         {"val", splits.val.size()},
                                                         {"test", splits.test.size()}}}});
    write_echo(out, cfg.echo(), hash);
}

void cmd_evaluate(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& panel_dir, const fs::path& out) {
    const dataset::SeriesPanel panel = open_panel(panel_dir);
    const LoadedModel lm = open_checkpoint(cfg, checkpoint, panel);
    const std::string hash = dataset::dataset_hash(panel);
    const auto wc = cfg.window();
    const auto spec = cfg.split.resolve(panel);
    const std::size_t train_end = panel.day_index(spec.train_end);
    if (train_end != lm.scaling.fit_end) {
        throw artifact_mismatch("split train_end " + spec.train_end.to_string() +
                                " differs from the training range of the checkpoint (" +
                                panel.date(lm.scaling.fit_end).to_string() + ")");
    }
    const auto splits = dataset::make_splits(panel, spec, wc, lm.scaling);

    std::vector<evaluation::ForecastSet> sets;
    const numerics::Tensor z = lm.model.predict_scaled(splits.test);
    std::vector<double> yhat(z.size());
    const std::size_t n_h = wc.horizons.size();
    for (std::size_t i = 0; i < splits.test.size(); ++i)
        for (std::size_t k = 0; k < n_h; ++k) yhat[i * n_h + k] = splits.test[i].invert(z[i * n_h + k]);
    sets.push_back(evaluation::make_forecast_set("hybrid", panel, splits.test, wc.horizons, yhat, wc.target));
    const auto specs = cfg.baseline_specs();
    for (auto& b : baselines::fit_predict_all(specs, panel, splits, wc)) sets.push_back(std::move(b));

    const evaluation::ScaleContext ctx{&panel, wc.target, train_end, cfg.eval.season};
    const nlohmann::json echo = {{"run", cfg.echo()}, {"checkpoint", lm.ckpt.config}};
    auto report = evaluation::build_report(sets, &ctx, cfg.eval.cpoi, cfg.eval.dm_losses, hash, echo);
    report.metrics = cfg.eval.metrics;
    ensure_dir(out);
    evaluation::report_emit(report, out);
    write_echo(out, cfg.echo(), hash);
}

nlohmann::json cmd_forecast(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& panel_dir,
                            const std::string& sku, const std::optional<std::string>& origin) {
    const dataset::SeriesPanel panel = open_panel(panel_dir);
    const LoadedModel lm = open_checkpoint(cfg, checkpoint, panel);
    dataset::Date when = panel.end();
    if (origin) {
        try {
            when = dataset::Date::parse(*origin);
        } catch (const std::invalid_argument& e) {
            throw input_error(std::string("--origin: ") + e.what());
        }
    }
    const std::size_t t = panel.day_index(when);
    const auto& mc = lm.model.config();
    if (t + 1 < mc.lookback) {
        throw input_error("origin " + when.to_string() + " leaves fewer than " + std::to_string(mc.lookback) +
                          " days of history");
    }
    const auto w = dataset::build_window(panel, lm.scaling, {mc.lookback, mc.horizons, lm.target},
                                         panel.sku_index(sku), t);
    const auto yhat = lm.model.forecast(w);
    nlohmann::json j = {{"sku", sku},
                        {"origin", when.to_string()},
                        {"target", dataset::target_mode_name(lm.target)},
                        {"dataset_hash", dataset::dataset_hash(panel)},
                        {"forecasts", nlohmann::json::array()}};
    for (std::size_t k = 0; k < mc.horizons.size(); ++k) {
        nlohmann::json f = {{"h", mc.horizons[k]}, {"date", (when + mc.horizons[k]).to_string()}, {"yhat", yhat[k]}};
        if (w.has_targets()) f["y"] = w.target[k];
        j["forecasts"].push_back(f);
    }
    return j;
}

void cmd_compare(const RunConfig& cfg, std::span<const fs::path> forecast_csvs,
                 const std::optional<fs::path>& panel_dir, const fs::path& out) {
    if (forecast_csvs.size() < 2) throw input_error("compare needs at least two forecast CSVs");
    std::vector<evaluation::ForecastSet> sets;
    for (const auto& p : forecast_csvs) sets.push_back(evaluation::read_forecast_csv(p));

    std::optional<dataset::SeriesPanel> panel;
    std::optional<evaluation::ScaleContext> ctx;
    std::string hash;
    if (panel_dir) {
        panel = open_panel(*panel_dir);
        hash = dataset::dataset_hash(*panel);
        ctx = evaluation::ScaleContext{&*panel, cfg.data.target, panel->day_index(cfg.split.resolve(*panel).train_end),
                                       cfg.eval.season};
    }
    const evaluation::DmLoss losses[] = {evaluation::DmLoss::Squared, evaluation::DmLoss::Absolute};
    nlohmann::json inputs = nlohmann::json::array();
    for (const auto& p : forecast_csvs) inputs.push_back(p.string());
    auto report = evaluation::build_report(sets, ctx ? &*ctx : nullptr, cfg.eval.cpoi, losses, hash,
                                           {{"run", cfg.echo()}, {"inputs", inputs}});
    report.metrics = cfg.eval.metrics;

    ensure_dir(out);
    nlohmann::json j = report.to_json();
    j.erase("cpoi_params");
    write_json(out / "compare.json", j);

    std::ofstream md(out / "compare.md", std::ios::binary | std::ios::trunc);
    if (!md) throw input_error("cannot write '" + (out / "compare.md").string() + "'");
    const auto cell = [](const std::optional<double>& v) {
        if (!v) return std::string("n/a");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", *v);
        return std::string(buf);
    };
    md << "# Forecast comparison\n\n## Pooled metrics\n\n| model |";
    for (auto k : report.metrics) md << ' ' << evaluation::metric_kind_name(k) << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < report.metrics.size(); ++i) md << "---|";
    md << '\n';
    for (const auto& m : report.models) {
        md << "| " << m.label << " |";
        for (auto k : report.metrics) md << ' ' << cell(m.metrics.at("pooled").get(k)) << " |";
        md << '\n';
    }
    md << "\n## Diebold-Mariano\n\nNegative statistics favour model a.\n\n| a | b | h | loss | DM | p |\n"
          "|---|---|---|---|---|---|\n";
    for (const auto& e : report.dm) {
        md << "| " << e.a << " | " << e.b << " | " << e.h << " | " << evaluation::dm_loss_name(e.loss) << " | "
           << cell(std::isfinite(e.result.statistic) ? std::optional(e.result.statistic) : std::nullopt) << " | "
           << cell(e.result.p_value) << " |\n";
    }
    if (!md) throw input_error("failed writing compare.md");
    write_echo(out, cfg.echo(), hash);
}

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-horizon retail demand forecasting", "tempora"};
    app.require_subcommand(1);

    struct Common {
        std::string config;
        std::uint64_t seed = 0;
        std::vector<std::string> sets;
        std::string out;
    };
    Common common;
    std::string panel, checkpoint, sku, origin;
    std::vector<std::string> inputs;
    const auto add_common = [&](CLI::App* sub, bool needs_out) {
        sub->add_option("--config", common.config, "INI config file");
        sub->add_option("--seed", common.seed, "Random seed (overrides the config)");
        sub->add_option("--set", common.sets, "Override one key: section.key=value")->allow_extra_args(false);
        if (needs_out) sub->add_option("--out", common.out, "Output directory")->required();
    };
    auto* ingest = app.add_subcommand("ingest", "Build a daily panel from a transaction CSV or synthetic data");
    add_common(ingest, true);
    auto* train = app.add_subcommand("train", "Train the hybrid model");
    add_common(train, true);
    train->add_option("--panel", panel, "Panel directory")->required();
    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint and the baselines on the test split");
    add_common(evaluate, true);
    evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    evaluate->add_option("--panel", panel, "Panel directory")->required();
    auto* forecast = app.add_subcommand("forecast", "Forecast one SKU from one origin to stdout");
    add_common(forecast, false);
    forecast->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    forecast->add_option("--panel", panel, "Panel directory")->required();
    forecast->add_option("--sku", sku, "SKU id")->required();
    forecast->add_option("--origin", origin, "Origin date YYYY-MM-DD (default: last day)");
    auto* compare = app.add_subcommand("compare", "Diebold-Mariano comparison of forecast CSVs");
    add_common(compare, true);
    compare->add_option("inputs", inputs, "Forecast CSVs (sku,origin,h,yhat,y)")->required()->expected(2, -1);
    compare->add_option("--panel", panel, "Panel directory for mase and theil_u2");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ErrorKind::Input);
    }

    try {
        CLI::App* sub = app.get_subcommands().front();
        std::optional<fs::path> config_path;
        if (!common.config.empty()) config_path = common.config;
        std::optional<std::uint64_t> seed;
        if (sub->count("--seed") > 0) seed = common.seed;
        const RunConfig cfg = load_run_config(config_path, common.sets, seed);
        if (sub == ingest) {
            cmd_ingest(cfg, common.out);
        } else if (sub == train) {
            cmd_train(cfg, panel, common.out);
        } else if (sub == evaluate) {
            cmd_evaluate(cfg, checkpoint, panel, common.out);
        } else if (sub == forecast) {
            out << cmd_forecast(cfg, checkpoint, panel, sku, origin.empty() ? std::nullopt : std::optional(origin)).dump(2)
                << '\n';
        } else {
            std::vector<fs::path> paths(inputs.begin(), inputs.end());
            cmd_compare(cfg, paths, panel.empty() ? std::nullopt : std::optional<fs::path>(panel), common.out);
        }
        return 0;
    } catch (const Error& e) {
        err << "tempora: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        err << "tempora: internal error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace tempora::cli
