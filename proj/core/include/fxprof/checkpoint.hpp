#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fxprof/effects.hpp"
#include "fxprof/model.hpp"

namespace fxprof::model {

inline constexpr const char* kCheckpointFormat = "fxck-v1";

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  ModelParams<float> params;
  std::optional<fx::EffectInstance> effect;
  std::uint64_t step = 0;
};

/// Writes `<stem>.json` (manifest) and `<stem>.bin` (parameter blob) next to
/// each other; `json_path` names the manifest. Returns the blob's SHA-256.
std::string save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& json_path);

/// Loads and verifies a checkpoint (format tag, tensor shapes, blob hash).
Checkpoint load_checkpoint(const std::filesystem::path& json_path);

/// Little-endian float32 values of every tensor in layout order.
std::vector<std::byte> serialize_parameters(const ModelParams<float>& params);

std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_file(const std::filesystem::path& path);

/// JSON text for configs and effect metadata (used for manifests and the
/// resolved-configuration echo).
std::string config_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);
std::string effect_json(const fx::EffectInstance& fx);
fx::EffectInstance effect_from_json(const std::string& text);

}  // namespace fxprof::model
