#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "fusereader/encoder.hpp"

namespace fusereader {

// Checkpoint layout: one FTSR tensor file per parameter plus manifest.json
// holding {config, parameter names, seed} and any extra run metadata.
void save_checkpoint(const std::filesystem::path& dir, const ParamMap& params,
                     const nlohmann::json& manifest_extra);

nlohmann::json load_checkpoint_manifest(const std::filesystem::path& dir);

// Loads tensors into the given (already shaped) parameter map; every listed
// name must exist with a matching shape.
void load_checkpoint_into(const std::filesystem::path& dir, ParamMap& params);

// Hash over the serialized bytes of the parameters, in registry order.
std::string params_hash(const ParamMap& params);

nlohmann::json encoder_config_to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

}  // namespace fusereader
