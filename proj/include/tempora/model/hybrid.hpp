#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "tempora/dataset/windows.hpp"
#include "tempora/model/params.hpp"
#include "tempora/numerics/ops.hpp"

namespace tempora::model {

using numerics::Activation;
using numerics::Tape;
using numerics::Tensor;
using numerics::Var;

enum class AttentionVariant { Multiplicative, Additive };
enum class DecodeStrategy { Direct, Recursive };

AttentionVariant parse_attention_variant(std::string_view name);
std::string_view attention_variant_name(AttentionVariant v);
DecodeStrategy parse_decode_strategy(std::string_view name);
std::string_view decode_strategy_name(DecodeStrategy d);

struct MsTcnConfig {
    std::vector<std::size_t> kernel_widths{1, 2, 3}; // distinct, >= 1
    std::size_t channels = 8;                       // per branch
    Activation activation = Activation::Tanh;
    std::size_t projection = 16;

    std::size_t max_width() const;
    void validate() const;
};

struct ModelConfig {
    std::size_t input_width = dataset::feature::kWidth;
    std::size_t lookback = 28;
    std::vector<int> horizons{1, 7, 14};
    MsTcnConfig tcn;
    std::size_t hidden = 32;
    Activation phi = Activation::Tanh;
    AttentionVariant attention = AttentionVariant::Multiplicative;
    std::size_t d_k = 16;
    bool kernel_identity = false; // multiplicative variant with w == 1
    std::size_t period = 7;
    double tau_init = 7.0;
    double bump_init = 0.5;
    double tau_min = 0.5;
    std::size_t n_countries = 1;
    std::size_t country_dim = 4;
    std::size_t horizon_dim = 8;
    std::size_t head_hidden = 32;
    DecodeStrategy decode = DecodeStrategy::Direct;
    std::size_t policy_actions = 11;

    std::size_t max_horizon() const { return static_cast<std::size_t>(horizons.back()); }
    // attention output, last hidden state, country embedding
    std::size_t context_width() const { return d_k + hidden + country_dim; }
    // additive bias table covers every offset reachable while decoding
    std::size_t gamma_length() const { return lookback + max_horizon(); }
    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    bool operator==(const ModelConfig&) const;
};

// Weights of a single query over keys ordered oldest first; key j of n sits
// dt = n - j steps before the query.
struct AttentionKernel {
    AttentionVariant variant = AttentionVariant::Multiplicative;
    double tau = 7.0;
    double bump = 0.5;
    bool identity = false;
    std::size_t period = 7;
    std::vector<double> gamma; // additive bias, gamma[dt - 1]
};

// q: [d], keys: [n, d] with n >= 1.
std::vector<double> attention_weights(std::span<const double> q, const Tensor& keys, const AttentionKernel& kernel);

struct CellParams {
    Tensor W_g, U_g, b_g;
    Tensor W_c, U_c, b_c;
    Tensor W_o, U_o, b_o;
    Activation phi = Activation::Tanh;
};

struct CellState {
    std::vector<double> h, c;
};

// One recurrent step on single vectors.
CellState cell_step(std::span<const double> x, std::span<const double> h_prev, const CellParams& cell);

// Taped counterpart on [B, *] rows. x_* are the input projections with
// their biases already added.
struct CellVars {
    Var U_g, U_c, U_o;
    Activation phi = Activation::Tanh;
};
struct CellOutput {
    Var h, c;
};
CellOutput cell_step(Var xg, Var xc, Var xo, Var h_prev, const CellVars& cell);

struct Batch {
    Tensor x;                         // [B, L, F]
    Tensor future;                    // [B, max_h, F]
    std::vector<std::size_t> country; // [B]
    Tensor target_scaled;             // [B, |H|]; empty when targets are absent
    std::vector<const dataset::WindowSample*> windows;

    std::size_t size() const { return windows.size(); }
    bool has_targets() const { return target_scaled.size() > 0; }
};

Batch make_batch(std::span<const dataset::WindowSample> windows, std::span<const std::size_t> indices);
Batch make_batch(std::span<const dataset::WindowSample> windows);

struct Forward {
    Var preds;   // [B, |H|], scaled space
    Var path;    // [B, S], consecutive predictions for the smoothness term
    Var context; // [B, context_width]
};

class HybridForecaster {
public:
    HybridForecaster(ModelConfig cfg, ParameterSet params);
    static HybridForecaster init(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    const ParameterSet& params() const { return params_; }
    ParameterSet& params() { return params_; }

    // Differentiable forward over a batch. `p` holds one Var per parameter in
    // registration order; `x` replaces batch.x when given.
    Forward forward(Tape& tape, std::span<const Var> p, const Batch& batch, std::optional<Var> x = {}) const;
    Var policy_logits(std::span<const Var> p, Var context) const;

    // [n, |H|] scaled predictions, evaluated in fixed chunks so results do
    // not depend on the worker count.
    Tensor predict_scaled(std::span<const dataset::WindowSample> windows) const;
    // Original units, one value per configured horizon.
    std::vector<double> forecast(const dataset::WindowSample& window) const;
    double forecast(const dataset::WindowSample& window, int h) const;

    struct Trace {
        Tensor tcn;    // [L, projection]
        Tensor hidden; // [L, hidden]
    };
    Trace trace_encoder(const dataset::WindowSample& window) const;

    // Clamps tau >= tau_min and bump >= 0.
    void project();
    std::size_t horizon_index(int h) const;

private:
    struct Encoded {
        std::vector<Var> hidden;
        Var x, z;
    };
    Encoded encode(Tape& tape, std::span<const Var> p, const Batch& batch, std::optional<Var> x) const;
    Var attend(std::span<const Var> p, const std::vector<Var>& hidden, Var country) const;
    Var head(std::span<const Var> p, Var context, std::size_t horizon_row) const;
    Var tcn_block(std::span<const Var> p, Var x) const;

    ModelConfig cfg_;
    ParameterSet params_;
    struct Index {
        std::vector<std::size_t> tcn_kernel, tcn_bias;
        std::size_t tcn_proj, tcn_proj_b;
        std::size_t W_g, U_g, b_g, W_c, U_c, b_c, W_o, U_o, b_o;
        std::size_t W_q, W_k, W_v, tau, bump, gamma, init_context;
        std::size_t country_embed, horizon_embed;
        std::size_t W1, b1, W2, b2;
        std::size_t policy_W, policy_b;
    } ix_{};
};

} // namespace tempora::model
