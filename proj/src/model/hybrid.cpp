#include "tempora/model/hybrid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "tempora/common/error.hpp"
#include "tempora/common/parallel.hpp"

namespace tempora::model {

namespace ops = numerics;
using numerics::Shape;

AttentionVariant parse_attention_variant(std::string_view name) {
    if (name == "multiplicative") return AttentionVariant::Multiplicative;
    if (name == "additive") return AttentionVariant::Additive;
    throw input_error("unknown attention variant '" + std::string(name) + "' (multiplicative|additive)");
}

std::string_view attention_variant_name(AttentionVariant v) {
    return v == AttentionVariant::Multiplicative ? "multiplicative" : "additive";
}

DecodeStrategy parse_decode_strategy(std::string_view name) {
    if (name == "direct") return DecodeStrategy::Direct;
    if (name == "recursive") return DecodeStrategy::Recursive;
    throw input_error("unknown decode strategy '" + std::string(name) + "' (direct|recursive)");
}

std::string_view decode_strategy_name(DecodeStrategy d) { return d == DecodeStrategy::Direct ? "direct" : "recursive"; }

std::size_t MsTcnConfig::max_width() const { return *std::max_element(kernel_widths.begin(), kernel_widths.end()); }

void MsTcnConfig::validate() const {
    if (kernel_widths.empty()) throw input_error("model.tcn_widths must not be empty");
    for (std::size_t i = 0; i < kernel_widths.size(); ++i) {
        if (kernel_widths[i] < 1) throw input_error("model.tcn_widths entries must be >= 1");
        for (std::size_t j = 0; j < i; ++j) {
            if (kernel_widths[i] == kernel_widths[j]) throw input_error("model.tcn_widths entries must be distinct");
        }
    }
    if (channels < 1 || projection < 1) throw input_error("model.tcn_channels and model.tcn_projection must be >= 1");
}

void ModelConfig::validate() const {
    tcn.validate();
    dataset::WindowConfig{lookback, horizons, dataset::TargetMode::Demand}.validate();
    if (input_width < 1 || hidden < 1 || d_k < 1 || head_hidden < 1 || horizon_dim < 1 || country_dim < 1) {
        throw input_error("model widths must be >= 1");
    }
    if (n_countries < 1) throw input_error("model needs at least one country");
    if (policy_actions < 1) throw input_error("model.policy_actions must be >= 1");
    if (!(tau_init > 0.0) || !(tau_min > 0.0) || bump_init < 0.0) {
        throw input_error("attention kernel needs tau > 0 and bump >= 0");
    }
}

nlohmann::json ModelConfig::to_json() const {
    return {{"input_width", input_width},
            {"lookback", lookback},
            {"horizons", horizons},
            {"tcn_widths", tcn.kernel_widths},
            {"tcn_channels", tcn.channels},
            {"tcn_activation", ops::activation_name(tcn.activation)},
            {"tcn_projection", tcn.projection},
            {"hidden", hidden},
            {"phi", ops::activation_name(phi)},
            {"attention", attention_variant_name(attention)},
            {"d_k", d_k},
            {"kernel_identity", kernel_identity},
            {"period", period},
            {"tau_init", tau_init},
            {"bump_init", bump_init},
            {"tau_min", tau_min},
            {"n_countries", n_countries},
            {"country_dim", country_dim},
            {"horizon_dim", horizon_dim},
            {"head_hidden", head_hidden},
            {"decode", decode_strategy_name(decode)},
            {"policy_actions", policy_actions}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.input_width = j.at("input_width").get<std::size_t>();
    c.lookback = j.at("lookback").get<std::size_t>();
    c.horizons = j.at("horizons").get<std::vector<int>>();
    c.tcn.kernel_widths = j.at("tcn_widths").get<std::vector<std::size_t>>();
    c.tcn.channels = j.at("tcn_channels").get<std::size_t>();
    c.tcn.activation = ops::parse_activation(j.at("tcn_activation").get<std::string>());
    c.tcn.projection = j.at("tcn_projection").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.phi = ops::parse_activation(j.at("phi").get<std::string>());
    c.attention = parse_attention_variant(j.at("attention").get<std::string>());
    c.d_k = j.at("d_k").get<std::size_t>();
    c.kernel_identity = j.at("kernel_identity").get<bool>();
    c.period = j.at("period").get<std::size_t>();
    c.tau_init = j.at("tau_init").get<double>();
    c.bump_init = j.at("bump_init").get<double>();
    c.tau_min = j.at("tau_min").get<double>();
    c.n_countries = j.at("n_countries").get<std::size_t>();
    c.country_dim = j.at("country_dim").get<std::size_t>();
    c.horizon_dim = j.at("horizon_dim").get<std::size_t>();
    c.head_hidden = j.at("head_hidden").get<std::size_t>();
    c.decode = parse_decode_strategy(j.at("decode").get<std::string>());
    c.policy_actions = j.at("policy_actions").get<std::size_t>();
    c.validate();
    return c;
}

bool ModelConfig::operator==(const ModelConfig& o) const { return to_json() == o.to_json(); }

std::vector<double> attention_weights(std::span<const double> q, const Tensor& keys, const AttentionKernel& kernel) {
    if (keys.rank() != 2 || keys.shape()[0] < 1) {
        throw std::invalid_argument("attention_weights: needs at least one earlier key, got keys " +
                                    numerics::shape_string(keys.shape()));
    }
    const std::size_t n = keys.shape()[0];
    const std::size_t d = keys.shape()[1];
    if (q.size() != d) throw std::invalid_argument("attention_weights: query width does not match keys");
    Tape tape;
    Var qv = tape.constant(Tensor(Shape{1, d}, std::vector<double>(q.begin(), q.end())));
    Var kv = tape.constant(keys.reshaped(Shape{1, n, d}));
    Var s = ops::scale(ops::row_dot(kv, qv), 1.0 / std::sqrt(static_cast<double>(d)));
    std::vector<double> deltas(n);
    for (std::size_t j = 0; j < n; ++j) deltas[j] = static_cast<double>(n - j);
    if (kernel.variant == AttentionVariant::Multiplicative && !kernel.identity) {
        Var w = ops::time_kernel(tape.constant(Tensor::scalar(kernel.tau)), tape.constant(Tensor::scalar(kernel.bump)),
                                 deltas, kernel.period);
        s = ops::add_row(s, ops::log(w));
    } else if (kernel.variant == AttentionVariant::Additive && !kernel.gamma.empty()) {
        if (kernel.gamma.size() < n) throw std::invalid_argument("attention_weights: gamma table shorter than key count");
        std::vector<std::size_t> rows(n);
        for (std::size_t j = 0; j < n; ++j) rows[j] = n - j - 1;
        s = ops::add_row(s, ops::gather_lastdim(tape.constant(Tensor::vector(kernel.gamma)), rows));
    }
    const Tensor& a = ops::softmax_lastdim(s).value();
    return {a.values().begin(), a.values().end()};
}

namespace {

std::vector<double> affine(std::span<const double> x, const Tensor& W, std::span<const double> h, const Tensor& U,
                           const Tensor& b) {
    const std::size_t out = b.size();
    std::vector<double> r(b.values().begin(), b.values().end());
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t o = 0; o < out; ++o) r[o] += x[i] * W[i * out + o];
    for (std::size_t i = 0; i < h.size(); ++i)
        for (std::size_t o = 0; o < out; ++o) r[o] += h[i] * U[i * out + o];
    return r;
}

double apply(Activation a, double v) {
    Tape tape;
    return ops::elementwise(tape.constant(Tensor::scalar(v)), a).item();
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

} // namespace

CellState cell_step(std::span<const double> x, std::span<const double> h_prev, const CellParams& cell) {
    const auto g = affine(x, cell.W_g, h_prev, cell.U_g, cell.b_g);
    const auto cc = affine(x, cell.W_c, h_prev, cell.U_c, cell.b_c);
    const auto o = affine(x, cell.W_o, h_prev, cell.U_o, cell.b_o);
    CellState s;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double c = apply(cell.phi, sigmoid(g[i]) * std::tanh(cc[i]));
        s.c.push_back(c);
        s.h.push_back(sigmoid(o[i]) * std::tanh(c));
    }
    return s;
}

CellOutput cell_step(Var xg, Var xc, Var xo, Var h_prev, const CellVars& cell) {
    Var g = ops::sigmoid(ops::add(xg, ops::matmul(h_prev, cell.U_g)));
    Var c = ops::elementwise(ops::mul(g, ops::tanh(ops::add(xc, ops::matmul(h_prev, cell.U_c)))), cell.phi);
    Var o = ops::sigmoid(ops::add(xo, ops::matmul(h_prev, cell.U_o)));
    return {ops::mul(o, ops::tanh(c)), c};
}

Batch make_batch(std::span<const dataset::WindowSample> windows, std::span<const std::size_t> indices) {
    if (indices.empty()) throw std::invalid_argument("make_batch: empty batch");
    const auto& first = windows[indices[0]];
    const Shape xs = first.features.shape();
    const Shape fs = first.future_known.shape();
    const std::size_t n_h = first.target_scaled.size();
    Batch b;
    b.x = Tensor(Shape{indices.size(), xs[0], xs[1]});
    b.future = Tensor(Shape{indices.size(), fs[0], fs[1]});
    if (n_h > 0) b.target_scaled = Tensor(Shape{indices.size(), n_h});
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const auto& w = windows[indices[r]];
        if (w.features.shape() != xs || w.future_known.shape() != fs) {
            throw std::invalid_argument("make_batch: windows differ in shape");
        }
        std::copy(w.features.values().begin(), w.features.values().end(), b.x.data() + r * w.features.size());
        std::copy(w.future_known.values().begin(), w.future_known.values().end(),
                  b.future.data() + r * w.future_known.size());
        if (n_h > 0) {
            if (w.target_scaled.size() != n_h) throw std::invalid_argument("make_batch: mixed target availability");
            std::copy(w.target_scaled.begin(), w.target_scaled.end(), b.target_scaled.data() + r * n_h);
        }
        b.country.push_back(static_cast<std::size_t>(w.country));
        b.windows.push_back(&w);
    }
    return b;
}

Batch make_batch(std::span<const dataset::WindowSample> windows) {
    std::vector<std::size_t> all(windows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return make_batch(windows, all);
}

namespace {

ParameterSet build_params(const ModelConfig& c, Rng& rng) {
    ParameterSet p;
    const std::size_t F = c.input_width;
    const std::size_t cb = c.tcn.channels;
    for (std::size_t w : c.tcn.kernel_widths) {
        p.add_glorot("tcn.k" + std::to_string(w), Shape{w, F, cb}, w * F, cb, rng);
        p.add("tcn.b" + std::to_string(w), Tensor(Shape{cb}));
    }
    const std::size_t cat = cb * c.tcn.kernel_widths.size();
    p.add_glorot("tcn.proj", Shape{1, cat, c.tcn.projection}, cat, c.tcn.projection, rng);
    p.add("tcn.proj_b", Tensor(Shape{c.tcn.projection}));
    const std::size_t C = c.tcn.projection;
    const std::size_t H = c.hidden;
    for (const char* gate : {"g", "c", "o"}) {
        p.add_glorot(std::string("cell.W_") + gate, Shape{C, H}, C, H, rng);
        p.add_glorot(std::string("cell.U_") + gate, Shape{H, H}, H, H, rng);
        p.add(std::string("cell.b_") + gate, Tensor(Shape{H}));
    }
    for (const char* m : {"W_q", "W_k", "W_v"}) p.add_glorot(std::string("attn.") + m, Shape{H, c.d_k}, H, c.d_k, rng);
    p.add("attn.tau", Tensor::scalar(c.tau_init));
    p.add("attn.beta", Tensor::scalar(c.bump_init));
    p.add("attn.gamma", Tensor(Shape{c.gamma_length()}));
    p.add("attn.init", Tensor(Shape{c.d_k}));
    p.add_glorot("embed.country", Shape{c.n_countries, c.country_dim}, c.n_countries, c.country_dim, rng);
    p.add_glorot("embed.horizon", Shape{c.horizons.size(), c.horizon_dim}, c.horizons.size(), c.horizon_dim, rng);
    const std::size_t head_in = c.context_width() + c.horizon_dim;
    p.add_glorot("head.W1", Shape{head_in, c.head_hidden}, head_in, c.head_hidden, rng);
    p.add("head.b1", Tensor(Shape{c.head_hidden}));
    p.add_glorot("head.W2", Shape{c.head_hidden, 1}, c.head_hidden, 1, rng);
    p.add("head.b2", Tensor(Shape{1}));
    p.add_glorot("policy.W", Shape{c.context_width(), c.policy_actions}, c.context_width(), c.policy_actions, rng);
    p.add("policy.b", Tensor(Shape{c.policy_actions}));
    return p;
}

} // namespace

HybridForecaster HybridForecaster::init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    return HybridForecaster(cfg, build_params(cfg, rng));
}

HybridForecaster::HybridForecaster(ModelConfig cfg, ParameterSet params) : cfg_(std::move(cfg)), params_(std::move(params)) {
    cfg_.validate();
    Rng dummy(0);
    const ParameterSet layout = build_params(cfg_, dummy);
    if (layout.size() != params_.size()) {
        throw artifact_mismatch("parameter count " + std::to_string(params_.size()) + " does not match the model config (" +
                                std::to_string(layout.size()) + ")");
    }
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (layout[i].name != params_[i].name || layout[i].value.shape() != params_[i].value.shape()) {
            throw artifact_mismatch("parameter " + params_[i].name + " " + numerics::shape_string(params_[i].value.shape()) +
                                    " does not match expected " + layout[i].name + " " +
                                    numerics::shape_string(layout[i].value.shape()));
        }
    }
    for (std::size_t w : cfg_.tcn.kernel_widths) {
        ix_.tcn_kernel.push_back(params_.index("tcn.k" + std::to_string(w)));
        ix_.tcn_bias.push_back(params_.index("tcn.b" + std::to_string(w)));
    }
    ix_.tcn_proj = params_.index("tcn.proj");
    ix_.tcn_proj_b = params_.index("tcn.proj_b");
    ix_.W_g = params_.index("cell.W_g");
    ix_.U_g = params_.index("cell.U_g");
    ix_.b_g = params_.index("cell.b_g");
    ix_.W_c = params_.index("cell.W_c");
    ix_.U_c = params_.index("cell.U_c");
    ix_.b_c = params_.index("cell.b_c");
    ix_.W_o = params_.index("cell.W_o");
    ix_.U_o = params_.index("cell.U_o");
    ix_.b_o = params_.index("cell.b_o");
    ix_.W_q = params_.index("attn.W_q");
    ix_.W_k = params_.index("attn.W_k");
    ix_.W_v = params_.index("attn.W_v");
    ix_.tau = params_.index("attn.tau");
    ix_.bump = params_.index("attn.beta");
    ix_.gamma = params_.index("attn.gamma");
    ix_.init_context = params_.index("attn.init");
    ix_.country_embed = params_.index("embed.country");
    ix_.horizon_embed = params_.index("embed.horizon");
    ix_.W1 = params_.index("head.W1");
    ix_.b1 = params_.index("head.b1");
    ix_.W2 = params_.index("head.W2");
    ix_.b2 = params_.index("head.b2");
    ix_.policy_W = params_.index("policy.W");
    ix_.policy_b = params_.index("policy.b");
}

std::size_t HybridForecaster::horizon_index(int h) const {
    const auto it = std::find(cfg_.horizons.begin(), cfg_.horizons.end(), h);
    if (it == cfg_.horizons.end()) {
        throw artifact_mismatch("horizon " + std::to_string(h) + " is not in the model's trained horizon set");
    }
    return static_cast<std::size_t>(it - cfg_.horizons.begin());
}

void HybridForecaster::project() {
    double& tau = params_[ix_.tau].value[0];
    double& bump = params_[ix_.bump].value[0];
    tau = std::max(tau, cfg_.tau_min);
    bump = std::max(bump, 0.0);
}

Var HybridForecaster::tcn_block(std::span<const Var> p, Var x) const {
    std::vector<Var> branches;
    for (std::size_t i = 0; i < ix_.tcn_kernel.size(); ++i) {
        branches.push_back(ops::conv1d_causal(x, p[ix_.tcn_kernel[i]], p[ix_.tcn_bias[i]]));
    }
    Var z = ops::elementwise(ops::concat_lastdim(branches), cfg_.tcn.activation);
    return ops::conv1d_causal(z, p[ix_.tcn_proj], p[ix_.tcn_proj_b]);
}

HybridForecaster::Encoded HybridForecaster::encode(Tape& tape, std::span<const Var> p, const Batch& batch,
                                                   std::optional<Var> x_override) const {
    if (p.size() != params_.size()) throw std::invalid_argument("forward: parameter binding has the wrong size");
    const Shape& xs = batch.x.shape();
    if (xs.size() != 3 || xs[1] != cfg_.lookback || xs[2] != cfg_.input_width) {
        throw artifact_mismatch("window features " + numerics::shape_string(xs) + " do not match the model input [B," +
                                std::to_string(cfg_.lookback) + "," + std::to_string(cfg_.input_width) + "]");
    }
    for (std::size_t c : batch.country) {
        if (c >= cfg_.n_countries) throw artifact_mismatch("country code " + std::to_string(c) + " unknown to the model");
    }
    Encoded e;
    e.x = x_override ? *x_override : tape.constant(batch.x);
    e.z = tcn_block(p, e.x);
    const Var xg = ops::add_row(ops::matmul(e.z, p[ix_.W_g]), p[ix_.b_g]);
    const Var xc = ops::add_row(ops::matmul(e.z, p[ix_.W_c]), p[ix_.b_c]);
    const Var xo = ops::add_row(ops::matmul(e.z, p[ix_.W_o]), p[ix_.b_o]);
    const CellVars cell{p[ix_.U_g], p[ix_.U_c], p[ix_.U_o], cfg_.phi};
    Var h = tape.constant(Tensor(Shape{batch.size(), cfg_.hidden}));
    for (std::size_t t = 0; t < cfg_.lookback; ++t) {
        h = cell_step(ops::at_time(xg, t), ops::at_time(xc, t), ops::at_time(xo, t), h, cell).h;
        e.hidden.push_back(h);
    }
    return e;
}

Var HybridForecaster::attend(std::span<const Var> p, const std::vector<Var>& hidden, Var country) const {
    const std::size_t T = hidden.size();
    const std::size_t B = hidden.back().shape()[0];
    Var pooled;
    if (T == 1) {
        pooled = ops::broadcast_rows(p[ix_.init_context], B);
    } else {
        const Var keys_h = ops::stack_time(std::span(hidden.data(), T - 1));
        const Var q = ops::matmul(hidden.back(), p[ix_.W_q]);
        const Var keys = ops::matmul(keys_h, p[ix_.W_k]);
        const Var values = ops::matmul(keys_h, p[ix_.W_v]);
        Var s = ops::scale(ops::row_dot(keys, q), 1.0 / std::sqrt(static_cast<double>(cfg_.d_k)));
        if (cfg_.attention == AttentionVariant::Multiplicative) {
            if (!cfg_.kernel_identity) {
                std::vector<double> deltas(T - 1);
                for (std::size_t j = 0; j + 1 < T; ++j) deltas[j] = static_cast<double>(T - 1 - j);
                s = ops::add_row(s, ops::log(ops::time_kernel(p[ix_.tau], p[ix_.bump], deltas, cfg_.period)));
            }
        } else {
            std::vector<std::size_t> rows(T - 1);
            for (std::size_t j = 0; j + 1 < T; ++j) rows[j] = T - 2 - j;
            s = ops::add_row(s, ops::gather_lastdim(p[ix_.gamma], rows));
        }
        pooled = ops::weighted_pool(ops::softmax_lastdim(s), values);
    }
    const std::array<Var, 3> parts{pooled, hidden.back(), country};
    return ops::concat_lastdim(parts);
}

Var HybridForecaster::head(std::span<const Var> p, Var context, std::size_t horizon_row) const {
    const std::size_t B = context.shape()[0];
    const Var e = ops::gather_rows(p[ix_.horizon_embed], std::vector<std::size_t>(B, horizon_row));
    const std::array<Var, 2> parts{context, e};
    const Var hid = ops::tanh(ops::add_row(ops::matmul(ops::concat_lastdim(parts), p[ix_.W1]), p[ix_.b1]));
    return ops::add_row(ops::matmul(hid, p[ix_.W2]), p[ix_.b2]);
}

Forward HybridForecaster::forward(Tape& tape, std::span<const Var> p, const Batch& batch, std::optional<Var> x) const {
    Encoded e = encode(tape, p, batch, x);
    const std::size_t B = batch.size();
    const Var country = ops::gather_rows(p[ix_.country_embed], batch.country);
    Forward out;
    out.context = attend(p, e.hidden, country);
    const std::size_t n_h = cfg_.horizons.size();

    if (cfg_.decode == DecodeStrategy::Direct) {
        std::vector<Var> cols;
        for (std::size_t k = 0; k < n_h; ++k) cols.push_back(head(p, out.context, k));
        out.preds = ops::concat_lastdim(cols);
        out.path = out.preds;
        return out;
    }

    const std::size_t max_h = cfg_.max_horizon();
    const std::size_t F = cfg_.input_width;
    if (batch.future.shape() != Shape{B, max_h, F}) {
        throw artifact_mismatch("future rows " + numerics::shape_string(batch.future.shape()) +
                                " do not cover the model's horizons");
    }
    const std::size_t w_max = cfg_.tcn.max_width();
    const CellVars cell{p[ix_.U_g], p[ix_.U_c], p[ix_.U_o], cfg_.phi};
    Var seq = e.x;
    Var ctx = out.context;
    std::vector<Var> steps;
    for (std::size_t s = 1; s <= max_h; ++s) {
        const Var y = head(p, ctx, 0);
        steps.push_back(y);
        if (s == max_h) break;
        // Pseudo-observation: predicted target plus the known future row.
        Tensor known(Shape{B, 1, F - 1});
        for (std::size_t b = 0; b < B; ++b) {
            const double* src = batch.future.data() + (b * max_h + (s - 1)) * F + 1;
            std::copy(src, src + F - 1, known.data() + b * (F - 1));
        }
        const std::array<Var, 2> row_parts{ops::reshape(y, Shape{B, 1, 1}), tape.constant(std::move(known))};
        const Var row = ops::concat_lastdim(row_parts);
        const std::array<Var, 2> seq_parts{seq, row};
        seq = ops::concat_time(seq_parts);
        const std::size_t T = seq.shape()[1];
        const Var recent = ops::slice_time(seq, T > w_max ? T - w_max : 0, T);
        const Var z = tcn_block(p, recent);
        const Var z_last = ops::at_time(z, z.shape()[1] - 1);
        const Var xg = ops::add_row(ops::matmul(z_last, p[ix_.W_g]), p[ix_.b_g]);
        const Var xc = ops::add_row(ops::matmul(z_last, p[ix_.W_c]), p[ix_.b_c]);
        const Var xo = ops::add_row(ops::matmul(z_last, p[ix_.W_o]), p[ix_.b_o]);
        e.hidden.push_back(cell_step(xg, xc, xo, e.hidden.back(), cell).h);
        ctx = attend(p, e.hidden, country);
    }
    out.path = ops::concat_lastdim(steps);
    std::vector<std::size_t> picks;
    for (int h : cfg_.horizons) picks.push_back(static_cast<std::size_t>(h - 1));
    out.preds = ops::gather_lastdim(out.path, picks);
    return out;
}

Var HybridForecaster::policy_logits(std::span<const Var> p, Var context) const {
    return ops::add_row(ops::matmul(context, p[ix_.policy_W]), p[ix_.policy_b]);
}

Tensor HybridForecaster::predict_scaled(std::span<const dataset::WindowSample> windows) const {
    constexpr std::size_t kChunk = 128;
    const std::size_t n_h = cfg_.horizons.size();
    if (windows.empty()) return Tensor();
    Tensor out(Shape{windows.size(), n_h});
    const std::size_t n_chunks = (windows.size() + kChunk - 1) / kChunk;
    parallel_for(n_chunks, [&](std::size_t c) {
        const std::size_t lo = c * kChunk;
        const std::size_t hi = std::min(windows.size(), lo + kChunk);
        std::vector<std::size_t> idx;
        for (std::size_t i = lo; i < hi; ++i) idx.push_back(i);
        Batch batch = make_batch(windows, idx);
        Tape tape;
        const auto p = params_.bind(tape);
        const Tensor& preds = forward(tape, p, batch).preds.value();
        std::copy(preds.values().begin(), preds.values().end(), out.data() + lo * n_h);
    });
    return out;
}

std::vector<double> HybridForecaster::forecast(const dataset::WindowSample& window) const {
    const Tensor z = predict_scaled(std::span(&window, 1));
    std::vector<double> out;
    for (std::size_t k = 0; k < cfg_.horizons.size(); ++k) out.push_back(window.invert(z[k]));
    return out;
}

double HybridForecaster::forecast(const dataset::WindowSample& window, int h) const {
    return forecast(window)[horizon_index(h)];
}

HybridForecaster::Trace HybridForecaster::trace_encoder(const dataset::WindowSample& window) const {
    const Batch batch = make_batch(std::span(&window, 1));
    Tape tape;
    const auto p = params_.bind(tape);
    const Encoded e = encode(tape, p, batch, {});
    Trace t;
    t.tcn = e.z.value().reshaped(Shape{cfg_.lookback, cfg_.tcn.projection});
    t.hidden = ops::stack_time(e.hidden).value().reshaped(Shape{cfg_.lookback, cfg_.hidden});
    return t;
}

} // namespace tempora::model
