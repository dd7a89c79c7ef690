#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "json.hpp"

#include "tempora/model/hybrid.hpp"
#include "tempora/training/trainer.hpp"

namespace tempora::training {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout, little-endian throughout:
//   "TMPRCKPT" u32 version
//   u64 len + config JSON text
//   u64 seed
//   params:   u32 count, then per parameter u32 name_len, name, u32 rank,
//             u64 dims[rank], f64 values
//   u8 has_state; if set: current params (same encoding), u64 adam step,
//             adam m and v values, u64 iteration, u8 baseline_init,
//             f64 baseline, f64 best_val, u64 best_iter, u8 stopped,
//             best params (count 0 when none)
//   u64 FNV-1a of every preceding byte
struct Checkpoint {
    nlohmann::json config; // must hold "model" with the model config
    std::uint64_t seed = 0;
    model::ParameterSet params; // the model to forecast with
    std::optional<ResumePoint> resume;

    model::HybridForecaster forecaster() const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws tempora::Error(ArtifactMismatch) on a foreign, truncated, corrupt or
// wrong-version file, naming the byte offset.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Checkpoint for a finished or paused run; params hold the best snapshot.
Checkpoint make_checkpoint(const TrainResult& result, nlohmann::json config, std::uint64_t seed);

} // namespace tempora::training
