#pragma once

#include <filesystem>

#include <nlohmann/json_fwd.hpp>

#include "edgecap/decode.hpp"
#include "edgecap/model.hpp"

namespace edgecap {

// Binary container layout (all integers little-endian):
//   magic (5 bytes) | version u8 | config block | vocab block | tensor records
// Config block: u32 length + JSON bytes. Vocab block: u32 count + length-
// prefixed token strings. Tensor record: length-prefixed name, u8 rank,
// u32 dims, row-major f64 payload. Checkpoints use magic "JSSF1"; archives
// use "JSSA1" with entry records instead of tensors.

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

std::vector<std::uint8_t> serialize_checkpoint(CaptionModel& model);
CaptionModel deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(CaptionModel& model, const std::filesystem::path& path);
CaptionModel load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize_archive(const Archive& archive);
Archive deserialize_archive(const std::vector<std::uint8_t>& bytes);

void save_archive(const Archive& archive, const std::filesystem::path& path);
Archive load_archive(const std::filesystem::path& path);

}  // namespace edgecap
