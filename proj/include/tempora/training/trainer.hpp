#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "tempora/model/hybrid.hpp"
#include "tempora/objectives/loss.hpp"

namespace tempora::training {

struct TrainConfig {
    double learning_rate = 0.005;
    std::size_t max_iterations = 1200;
    std::size_t batch_size = 64;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    long patience = 50; // negative disables early stopping
    double clip_norm = 5.0;
    std::size_t val_every = 10;
    std::size_t val_windows = 256;
    std::uint64_t seed = 42;

    void validate() const;
    nlohmann::json to_json() const;
};

struct AdamState {
    std::vector<numerics::Tensor> m, v;
    std::uint64_t step = 0;
    bool operator==(const AdamState&) const = default;
};

AdamState adam_init(const model::ParameterSet& params);

// Scales grads in place so their global norm is at most max_norm; returns
// the norm before scaling.
double clip_global_norm(std::vector<numerics::Tensor>& grads, double max_norm);

// Global-norm clipping followed by a bias-corrected Adam update. A
// non-finite gradient aborts, naming the parameter.
void adam_step(model::ParameterSet& params, std::vector<numerics::Tensor> grads, AdamState& state,
               const TrainConfig& cfg);

// Indices of the batch for a 0-based iteration: consecutive slices of
// per-epoch seeded permutations, min(B, n) entries. Pure in its arguments.
std::vector<std::size_t> batch_indices(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                       std::uint64_t iteration);

struct TrainState {
    std::uint64_t iteration = 0; // completed optimizer steps
    objectives::RewardBaseline baseline;
    double best_val = std::numeric_limits<double>::infinity();
    std::uint64_t best_iter = 0;
    bool stopped = false;
    model::ParameterSet best; // empty until the first validation check
    bool operator==(const TrainState&) const = default;
};

struct HistoryRow {
    std::uint64_t iteration = 0;
    double train_total = 0.0;
    double train_primary = 0.0;
    double val_primary = std::numeric_limits<double>::quiet_NaN(); // NaN between checks
    double entropy = 0.0;
    double wall_ms = 0.0;
};

struct TrainResult {
    model::HybridForecaster model; // parameters after the last step
    AdamState adam;
    TrainState state;
    std::vector<HistoryRow> history;
    std::string stop_reason;

    model::HybridForecaster best() const;
};

struct ResumePoint {
    model::HybridForecaster model;
    AdamState adam;
    TrainState state;
};

// Runs optimizer steps until `until` total steps (default max_iterations)
// or early stop. Validation primary loss is checked every val_every steps
// and at max_iterations.
TrainResult train(const model::HybridForecaster& init, std::span<const dataset::WindowSample> train_windows,
                  std::span<const dataset::WindowSample> val_windows, const objectives::LossConfig& loss,
                  const TrainConfig& cfg, const ResumePoint* resume = nullptr, std::size_t until = 0);

// Primary loss on a fixed, evenly spaced subset of at most cfg.val_windows.
double validation_loss(const model::HybridForecaster& model, std::span<const dataset::WindowSample> windows,
                       const objectives::LossConfig& loss, const TrainConfig& cfg);

// Mean squared error in scaled space over every window and horizon.
double scaled_mse(const model::HybridForecaster& model, std::span<const dataset::WindowSample> windows);

void write_history_csv(const std::vector<HistoryRow>& rows, const std::filesystem::path& path);

} // namespace tempora::training
