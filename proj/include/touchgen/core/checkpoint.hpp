#pragma once

// Checkpoint file layout (all integers little-endian):
//
//   bytes 0..7   magic "TGCKPT01"
//   bytes 8..15  u64 header length N
//   next N bytes UTF-8 JSON header:
//                {"metadata": {...config echo...},
//                 "tensors": [{"name", "shape": [rows, cols], "dtype": "float32",
//                              "offset": byte offset into payload}, ...]}
//   payload      float32 values, row-major per tensor

#include <filesystem>
#include <string>

#include <json.hpp>

#include "touchgen/core/autograd.hpp"

namespace touchgen {

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& metadata,
                     const ag::ParameterList<float>& params);

// Fills every listed parameter from the file. Missing tensors and shape
// mismatches raise ConfigError; extra tensors in the file are ignored.
nlohmann::json load_checkpoint(const std::filesystem::path& path, const ag::ParameterList<float>& params);

nlohmann::json read_checkpoint_metadata(const std::filesystem::path& path);

}  // namespace touchgen
