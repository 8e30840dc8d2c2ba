#pragma once

// Flat checkpoint container: a text manifest followed by a little-endian
// float64 payload.
//
//   sca-checkpoint 1
//   <name> <d0>x<d1>x... <byte offset into payload>
//   ...
//   end
//   <payload>

#include <filesystem>
#include <string>

#include "sca/layers.hpp"

namespace sca {

std::string encode_checkpoint(const ParamList& tensors);
void save_checkpoint(const ParamList& tensors, const std::filesystem::path& path);

// Entries of a decoded checkpoint, in file order.
ParamList decode_checkpoint(const std::string& bytes);
ParamList read_checkpoint(const std::filesystem::path& path);

// Copies stored values into `into` (matched by name). Every tensor in `into`
// must be present with an identical shape; otherwise ConfigError.
void load_into(const ParamList& stored, const ParamList& into, const std::string& source = "checkpoint");
void load_checkpoint(const std::filesystem::path& path, const ParamList& into);

}  // namespace sca
