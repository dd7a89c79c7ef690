#include "tempora/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "tempora/common/error.hpp"

namespace tempora::cli {

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    throw input_error("config " + key + ": expected " + expected + ", got '" + value + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& value, const char* expected) {
    const std::string v = trim(value);
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) bad_value(key, value, expected);
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    bad_value(key, value, "true or false");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

// Enum parsers throw tempora::Error(Input) themselves; prefix the key.
template <class F>
auto with_key(const std::string& key, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw input_error("config " + key + ": " + e.what());
    }
}

struct Field {
    std::string key; // "section.key" or "seed"
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<nlohmann::json(const RunConfig&)> get;
};

template <class T, class Access>
Field number(std::string key, Access access, const char* expected) {
    return {key,
            [key, access, expected](RunConfig& c, const std::string& v) {
                access(c) = parse_number<T>(key, v, expected);
            },
            [access](const RunConfig& c) { return nlohmann::json(access(const_cast<RunConfig&>(c))); }};
}

template <class Access>
Field real(std::string key, Access access) {
    return number<double>(std::move(key), access, "a number");
}

template <class Access>
Field count(std::string key, Access access) {
    return number<std::size_t>(std::move(key), access, "a non-negative integer");
}

template <class Access>
Field text(std::string key, Access access) {
    return {key, [access](RunConfig& c, const std::string& v) { access(c) = trim(v); },
            [access](const RunConfig& c) { return nlohmann::json(access(const_cast<RunConfig&>(c))); }};
}

template <class Access>
Field flag(std::string key, Access access) {
    return {key, [key, access](RunConfig& c, const std::string& v) { access(c) = parse_bool(key, v); },
            [access](const RunConfig& c) { return nlohmann::json(access(const_cast<RunConfig&>(c))); }};
}

template <class E, class Access, class Parse, class Name>
Field choice(std::string key, Access access, Parse parse, Name name) {
    return {key,
            [key, access, parse](RunConfig& c, const std::string& v) {
                access(c) = with_key(key, [&] { return parse(trim(v)); });
            },
            [access, name](const RunConfig& c) {
                return nlohmann::json(std::string(name(access(const_cast<RunConfig&>(c)))));
            }};
}

template <class E, class Access, class Parse, class Name>
Field choices(std::string key, Access access, Parse parse, Name name) {
    return {key,
            [key, access, parse](RunConfig& c, const std::string& v) {
                std::vector<E> out;
                for (const auto& item : split_list(v)) out.push_back(with_key(key, [&] { return parse(item); }));
                access(c) = std::move(out);
            },
            [access, name](const RunConfig& c) {
                nlohmann::json arr = nlohmann::json::array();
                for (const E& e : access(const_cast<RunConfig&>(c))) arr.push_back(std::string(name(e)));
                return arr;
            }};
}

template <class T, class Access>
Field number_list(std::string key, Access access) {
    return {key,
            [key, access](RunConfig& c, const std::string& v) {
                std::vector<T> out;
                for (const auto& item : split_list(v)) out.push_back(parse_number<T>(key, item, "a list of integers"));
                access(c) = std::move(out);
            },
            [access](const RunConfig& c) { return nlohmann::json(access(const_cast<RunConfig&>(c))); }};
}

#define TEMPORA_AT(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<Field>& fields() {
    using namespace tempora::dataset;
    using namespace tempora::model;
    using evaluation::DmLoss;
    using evaluation::MetricKind;
    static const std::vector<Field> all = [] {
        std::vector<Field> f;
        f.push_back(number<std::uint64_t>("seed", TEMPORA_AT(seed), "a non-negative integer"));

        f.push_back(text("data.csv", TEMPORA_AT(data.csv)));
        f.push_back(count("data.min_active_days", TEMPORA_AT(data.min_active_days)));
        f.push_back(choice<TargetMode>("data.target", TEMPORA_AT(data.target), parse_target_mode, target_mode_name));
        f.push_back(count("data.synth_skus", TEMPORA_AT(data.synth_skus)));
        f.push_back(count("data.synth_days", TEMPORA_AT(data.synth_days)));
        f.push_back({"data.synth_start",
                     [](RunConfig& c, const std::string& v) {
                         try {
                             c.data.synth.start = Date::parse(trim(v));
                         } catch (const std::invalid_argument& e) {
                             throw input_error(std::string("config data.synth_start: ") + e.what());
                         }
                     },
                     [](const RunConfig& c) { return nlohmann::json(c.data.synth.start.to_string()); }});
        f.push_back(real("data.synth_base_min", TEMPORA_AT(data.synth.base_min)));
        f.push_back(real("data.synth_base_max", TEMPORA_AT(data.synth.base_max)));
        f.push_back(real("data.synth_trend_max", TEMPORA_AT(data.synth.trend_max)));
        f.push_back(real("data.synth_amp_min", TEMPORA_AT(data.synth.amp_min)));
        f.push_back(real("data.synth_amp_max", TEMPORA_AT(data.synth.amp_max)));
        f.push_back(real("data.synth_noise", TEMPORA_AT(data.synth.noise)));
        f.push_back(real("data.synth_holiday_amp", TEMPORA_AT(data.synth.holiday_amp)));
        f.push_back(real("data.synth_price_min", TEMPORA_AT(data.synth.price_min)));
        f.push_back(real("data.synth_price_max", TEMPORA_AT(data.synth.price_max)));
        f.push_back(count("data.synth_countries", TEMPORA_AT(data.synth.n_countries)));

        f.push_back(text("split.train_end", TEMPORA_AT(split.train_end)));
        f.push_back(text("split.val_end", TEMPORA_AT(split.val_end)));
        f.push_back(text("split.test_end", TEMPORA_AT(split.test_end)));
        f.push_back(real("split.train_frac", TEMPORA_AT(split.train_frac)));
        f.push_back(real("split.val_frac", TEMPORA_AT(split.val_frac)));

        f.push_back(count("model.lookback", TEMPORA_AT(model.lookback)));
        f.push_back(number_list<int>("model.horizons", TEMPORA_AT(model.horizons)));
        f.push_back(number_list<std::size_t>("model.kernel_widths", TEMPORA_AT(model.tcn.kernel_widths)));
        f.push_back(count("model.tcn_channels", TEMPORA_AT(model.tcn.channels)));
        f.push_back(choice<numerics::Activation>("model.tcn_activation", TEMPORA_AT(model.tcn.activation),
                                                 numerics::parse_activation, numerics::activation_name));
        f.push_back(count("model.tcn_projection", TEMPORA_AT(model.tcn.projection)));
        f.push_back(count("model.hidden", TEMPORA_AT(model.hidden)));
        f.push_back(choice<numerics::Activation>("model.phi", TEMPORA_AT(model.phi), numerics::parse_activation,
                                                 numerics::activation_name));
        f.push_back(choice<AttentionVariant>("model.attention", TEMPORA_AT(model.attention), parse_attention_variant,
                                             attention_variant_name));
        f.push_back(count("model.d_k", TEMPORA_AT(model.d_k)));
        f.push_back(flag("model.kernel_identity", TEMPORA_AT(model.kernel_identity)));
        f.push_back(count("model.period", TEMPORA_AT(model.period)));
        f.push_back(real("model.tau_init", TEMPORA_AT(model.tau_init)));
        f.push_back(real("model.bump_init", TEMPORA_AT(model.bump_init)));
        f.push_back(real("model.tau_min", TEMPORA_AT(model.tau_min)));
        f.push_back(count("model.country_dim", TEMPORA_AT(model.country_dim)));
        f.push_back(count("model.horizon_dim", TEMPORA_AT(model.horizon_dim)));
        f.push_back(count("model.head_hidden", TEMPORA_AT(model.head_hidden)));
        f.push_back(choice<DecodeStrategy>("model.decode", TEMPORA_AT(model.decode), parse_decode_strategy,
                                           decode_strategy_name));
        f.push_back(count("model.policy_actions", TEMPORA_AT(model.policy_actions)));
        f.push_back(real("model.lambda_l2", TEMPORA_AT(loss.l2)));
        f.push_back(real("model.lambda_input_grad", TEMPORA_AT(loss.input_grad)));
        f.push_back(real("model.lambda_smooth", TEMPORA_AT(loss.smoothness)));
        f.push_back(real("model.lambda_rl", TEMPORA_AT(loss.rl)));
        f.push_back(real("model.lambda_entropy", TEMPORA_AT(loss.entropy)));
        f.push_back(real("model.gamma_flat", TEMPORA_AT(loss.flat)));
        f.push_back(real("model.fd_eps", TEMPORA_AT(loss.fd_eps)));
        f.push_back(choice<objectives::RewardKind>("model.reward", TEMPORA_AT(loss.policy.reward),
                                                   objectives::parse_reward_kind, objectives::reward_kind_name));
        f.push_back(real("model.action_low", TEMPORA_AT(loss.policy.grid_low)));
        f.push_back(real("model.action_high", TEMPORA_AT(loss.policy.grid_high)));
        f.push_back(real("model.baseline_decay", TEMPORA_AT(loss.policy.baseline_decay)));
        f.push_back(real("model.reward_price", TEMPORA_AT(loss.policy.price)));
        f.push_back(real("model.reward_cost", TEMPORA_AT(loss.policy.cost)));

        f.push_back(real("train.learning_rate", TEMPORA_AT(train.learning_rate)));
        f.push_back(count("train.max_iterations", TEMPORA_AT(train.max_iterations)));
        f.push_back(count("train.batch_size", TEMPORA_AT(train.batch_size)));
        f.push_back(real("train.beta1", TEMPORA_AT(train.beta1)));
        f.push_back(real("train.beta2", TEMPORA_AT(train.beta2)));
        f.push_back(real("train.adam_eps", TEMPORA_AT(train.adam_eps)));
        f.push_back(number<long>("train.patience", TEMPORA_AT(train.patience), "an integer"));
        f.push_back(real("train.clip_norm", TEMPORA_AT(train.clip_norm)));
        f.push_back(count("train.val_every", TEMPORA_AT(train.val_every)));
        f.push_back(count("train.val_windows", TEMPORA_AT(train.val_windows)));

        f.push_back(choices<MetricKind>("eval.metrics", TEMPORA_AT(eval.metrics), evaluation::parse_metric_kind,
                                        evaluation::metric_kind_name));
        f.push_back(real("eval.cpoi_price", TEMPORA_AT(eval.cpoi.price)));
        f.push_back(real("eval.cpoi_cost", TEMPORA_AT(eval.cpoi.cost)));
        f.push_back({"eval.dm_loss",
                     [](RunConfig& c, const std::string& v) {
                         const std::string s = trim(v);
                         if (s == "both") {
                             c.eval.dm_losses = {DmLoss::Squared, DmLoss::Absolute};
                         } else {
                             c.eval.dm_losses = {with_key("eval.dm_loss", [&] { return evaluation::parse_dm_loss(s); })};
                         }
                     },
                     [](const RunConfig& c) {
                         return nlohmann::json(c.eval.dm_losses.size() == 2
                                                   ? std::string("both")
                                                   : std::string(evaluation::dm_loss_name(c.eval.dm_losses.at(0))));
                     }});
        f.push_back(choices<baselines::BaselineKind>("eval.baselines", TEMPORA_AT(eval.baselines),
                                                     baselines::parse_baseline_kind, baselines::baseline_kind_name));
        f.push_back(count("eval.season", TEMPORA_AT(eval.season)));
        f.push_back(count("eval.ridge_lags", TEMPORA_AT(eval.ridge_lags)));
        f.push_back(real("eval.ridge", TEMPORA_AT(eval.ridge)));
        f.push_back(count("eval.gru_hidden", TEMPORA_AT(eval.gru_hidden)));
        return f;
    }();
    return all;
}

#undef TEMPORA_AT

const Field& find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.key == key) return f;
    throw input_error("unknown config key '" + key + "'");
}

bool is_section(const std::string& name) {
    return name == "data" || name == "split" || name == "model" || name == "train" || name == "eval";
}

} // namespace

void apply_setting(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
    find_field(trim(dotted_key)).set(cfg, value);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
}

nlohmann::json RunConfig::echo() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& f : fields()) {
        const auto dot = f.key.find('.');
        if (dot == std::string::npos) {
            j[f.key] = f.get(*this);
        } else {
            j[f.key.substr(0, dot)][f.key.substr(dot + 1)] = f.get(*this);
        }
    }
    return j;
}

void RunConfig::validate() const {
    if (data.synth_days < 21) throw input_error("config data.synth_days must be >= 21");
    if (data.synth_skus < 1) throw input_error("config data.synth_skus must be >= 1");
    if (data.synth.n_countries < 1) throw input_error("config data.synth_countries must be >= 1");
    if (!(split.train_frac > 0.0 && split.val_frac > 0.0 && split.train_frac + split.val_frac < 1.0)) {
        throw input_error("config split fractions must be positive with train_frac + val_frac < 1");
    }
    if (split.train_end.empty() != split.val_end.empty()) {
        throw input_error("config split.train_end and split.val_end must be given together");
    }
    window().validate();
    model.validate();
    loss.validate();
    if (model.policy_actions != loss.policy.actions) {
        throw input_error("config model.policy_actions disagrees with the policy grid size");
    }
    train.validate();
    eval.cpoi.validate();
    if (eval.metrics.empty()) throw input_error("config eval.metrics must name at least one metric");
    if (eval.dm_losses.empty()) throw input_error("config eval.dm_loss must name a loss");
    for (const auto& spec : baseline_specs()) spec.validate(model.lookback);
}

dataset::WindowConfig RunConfig::window() const { return {model.lookback, model.horizons, data.target}; }

std::vector<baselines::BaselineSpec> RunConfig::baseline_specs() const {
    std::vector<baselines::BaselineSpec> out;
    for (const auto kind : eval.baselines) {
        baselines::BaselineSpec s;
        s.kind = kind;
        s.season = eval.season;
        s.lags = eval.ridge_lags;
        s.ridge = eval.ridge;
        s.hidden = eval.gru_hidden;
        s.train = train;
        s.train.seed = seed;
        out.push_back(s);
    }
    return out;
}

dataset::SplitSpec SplitConfig::resolve(const dataset::SeriesPanel& panel) const {
    dataset::SplitSpec spec = dataset::SplitSpec::from_fractions(panel, train_frac, val_frac);
    const auto date = [](const std::string& key, const std::string& v) {
        try {
            return dataset::Date::parse(v);
        } catch (const std::invalid_argument& e) {
            throw input_error("config split." + key + ": " + e.what());
        }
    };
    if (!train_end.empty()) {
        spec.train_end = date("train_end", train_end);
        spec.val_end = date("val_end", val_end);
    }
    if (!test_end.empty()) spec.test_end = date("test_end", test_end);
    spec.validate(panel);
    return spec;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> overrides,
                          std::optional<std::uint64_t> seed_flag) {
    RunConfig cfg;
    cfg.loss.policy.actions = cfg.model.policy_actions;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw input_error("cannot open config '" + file->string() + "'");
        std::stringstream filtered;
        for (std::string line; std::getline(in, line);) {
            const std::string t = trim(line);
            filtered << (t.starts_with('#') ? std::string() : line) << '\n';
        }
        boost::property_tree::ptree tree;
        try {
            boost::property_tree::ini_parser::read_ini(filtered, tree);
        } catch (const boost::property_tree::ini_parser_error& e) {
            throw input_error("config '" + file->string() + "' line " + std::to_string(e.line()) + ": " + e.message());
        }
        for (const auto& [name, node] : tree) {
            if (node.empty()) {
                if (node.data().empty() && is_section(name)) continue;
                apply_setting(cfg, name, node.data());
                continue;
            }
            for (const auto& [key, leaf] : node) apply_setting(cfg, name + "." + key, leaf.data());
        }
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw input_error("--set expects section.key=value, got '" + o + "'");
        apply_setting(cfg, o.substr(0, eq), o.substr(eq + 1));
    }
    if (seed_flag) cfg.seed = *seed_flag;
    cfg.loss.policy.actions = cfg.model.policy_actions;
    cfg.train.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

} // namespace tempora::cli
