#include "fxprof/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "json.hpp"

namespace fxprof::model {

using nlohmann::json;

namespace {

json config_to(const ModelConfig& c) {
  return json{{"chunk_size", c.chunk_size},
              {"frame_size", c.frame_size},
              {"hop", c.hop},
              {"hidden_widths", c.hidden_widths},
              {"knob_count", c.knob_count},
              {"freeze_transforms", c.freeze_transforms},
              {"final_skip", c.final_skip},
              {"seed", c.seed}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.chunk_size = j.at("chunk_size").get<std::size_t>();
  c.frame_size = j.at("frame_size").get<std::size_t>();
  c.hop = j.at("hop").get<std::size_t>();
  c.hidden_widths = j.at("hidden_widths").get<std::array<std::size_t, kStackDepth>>();
  c.knob_count = j.at("knob_count").get<std::size_t>();
  c.freeze_transforms = j.at("freeze_transforms").get<bool>();
  c.final_skip = j.at("final_skip").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

json effect_to(const fx::EffectInstance& fx) {
  json knobs = json::array();
  for (const auto& k : fx.knobs()) {
    knobs.push_back({{"name", k.name}, {"min", k.min}, {"max", k.max}, {"units", k.units}});
  }
  return json{{"effect_id", std::string(fx::effect_name(fx.id()))},
              {"sample_rate", fx.sample_rate()},
              {"knobs", knobs}};
}

fx::EffectInstance effect_from(const json& j) {
  const auto name = j.at("effect_id").get<std::string>();
  const auto id = fx::parse_effect(name);
  if (!id) throw std::invalid_argument("unknown effect id '" + name + "'");
  std::vector<fx::KnobSpec> knobs;
  for (const auto& k : j.at("knobs")) {
    knobs.push_back({k.at("name").get<std::string>(), k.at("min").get<double>(),
                     k.at("max").get<double>(), k.at("units").get<std::string>()});
  }
  return fx::EffectInstance(*id, std::move(knobs), j.at("sample_rate").get<int>());
}

void write_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing '" + path.string() + "'");
}

std::vector<std::byte> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open '" + path.string() + "'");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> bytes(size);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
  return bytes;
}

}  // namespace

std::string config_json(const ModelConfig& config) { return config_to(config).dump(); }
ModelConfig config_from_json(const std::string& text) { return config_from(json::parse(text)); }
std::string effect_json(const fx::EffectInstance& fx) { return effect_to(fx).dump(); }
fx::EffectInstance effect_from_json(const std::string& text) { return effect_from(json::parse(text)); }

std::string sha256_hex(std::span<const std::byte> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_bytes(path)); }

std::vector<std::byte> serialize_parameters(const ModelParams<float>& params) {
  static_assert(sizeof(float) == 4);
  std::vector<std::byte> out;
  out.reserve(params.parameter_count() * 4);
  for (const auto& p : params.tensors) {
    for (float v : p.value.values()) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      for (int b = 0; b < 4; ++b) {
        out.push_back(static_cast<std::byte>(bits & 0xffu));
        bits >>= 8;
      }
    }
  }
  return out;
}

std::string save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& json_path) {
  const auto blob = serialize_parameters(ckpt.params);
  const std::string digest = sha256_hex(blob);
  auto blob_path = json_path;
  blob_path.replace_extension(".bin");

  json tensors = json::array();
  for (const auto& p : ckpt.params.tensors) {
    tensors.push_back({{"name", p.name},
                       {"rows", p.value.rows()},
                       {"cols", p.value.cols()},
                       {"frozen", p.frozen}});
  }
  json manifest{{"format", kCheckpointFormat},
                {"config", config_to(ckpt.params.config)},
                {"effect", ckpt.effect ? effect_to(*ckpt.effect) : json(nullptr)},
                {"step", ckpt.step},
                {"blob", blob_path.filename().string()},
                {"blob_bytes", blob.size()},
                {"blob_sha256", digest},
                {"dtype", "float32-le"},
                {"tensors", tensors}};

  if (json_path.has_parent_path()) std::filesystem::create_directories(json_path.parent_path());
  write_bytes(blob_path, blob);
  std::ofstream out(json_path, std::ios::trunc);
  if (!out) throw CheckpointError("cannot open '" + json_path.string() + "' for writing");
  out << manifest.dump(2) << "\n";
  return digest;
}

Checkpoint load_checkpoint(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw CheckpointError("cannot open checkpoint '" + json_path.string() + "'");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint '" + json_path.string() + "' is not valid JSON: " + e.what());
  }
  if (manifest.value("format", "") != kCheckpointFormat) {
    throw CheckpointError("checkpoint '" + json_path.string() + "' is not " + kCheckpointFormat);
  }
  Checkpoint ckpt;
  const ModelConfig config = config_from(manifest.at("config"));
  ckpt.params = init_model<float>(config);
  ckpt.step = manifest.at("step").get<std::uint64_t>();
  if (!manifest.at("effect").is_null()) ckpt.effect = effect_from(manifest.at("effect"));

  const auto blob_path = json_path.parent_path() / manifest.at("blob").get<std::string>();
  const auto blob = read_bytes(blob_path);
  if (sha256_hex(blob) != manifest.at("blob_sha256").get<std::string>()) {
    throw CheckpointError("checkpoint blob '" + blob_path.string() + "' fails its SHA-256 check");
  }
  const auto& tensors = manifest.at("tensors");
  if (tensors.size() != ckpt.params.tensors.size()) {
    throw CheckpointError("checkpoint tensor count does not match its config");
  }
  if (blob.size() != ckpt.params.parameter_count() * 4) {
    throw CheckpointError("checkpoint blob size does not match its config");
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& p = ckpt.params.tensors[i];
    if (tensors[i].at("name").get<std::string>() != p.name ||
        tensors[i].at("rows").get<std::size_t>() != p.value.rows() ||
        tensors[i].at("cols").get<std::size_t>() != p.value.cols()) {
      throw CheckpointError("checkpoint tensor '" + p.name + "' has an unexpected layout");
    }
    p.frozen = tensors[i].at("frozen").get<bool>();
    for (float& v : p.value.values()) {
      std::uint32_t bits = 0;
      for (int b = 3; b >= 0; --b) bits = (bits << 8) | std::to_integer<std::uint32_t>(blob[offset + b]);
      v = std::bit_cast<float>(bits);
      offset += 4;
    }
  }
  return ckpt;
}

}  // namespace fxprof::model
