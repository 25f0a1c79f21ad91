#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "qw/model.hpp"
#include "qw/optimizer.hpp"

namespace qw {

inline constexpr char kCheckpointMagic[4] = {'Q', 'W', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "QWCK" file: magic, u32 version, u32 meta length, JSON meta, u32 record
/// count, then per record: u32 name length, name, u32 rank, u64 dims, f64
/// payload. Integers and floats are little-endian.
struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

/// Copies model parameters and optimizer moments ("adam.m/<name>",
/// "adam.v/<name>") into a checkpoint; meta["optimizer_step"] is set.
void store_model(Checkpoint& ck, const Forecaster& model, const AdamW* opt = nullptr);

/// Restores parameter values (and optimizer state if requested). Throws
/// checkpoint_mismatch if names or shapes disagree with the model.
void restore_model(const Checkpoint& ck, Forecaster& model, AdamW* opt = nullptr);

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Normalizer& n);
Normalizer normalizer_from_json(const nlohmann::json& j);

}  // namespace qw
