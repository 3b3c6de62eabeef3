#pragma once

#include <json.hpp>
#include <string>

#include "mbpi/model.hpp"

namespace mbpi {

/// Parses the model-file JSON layout. Missing "exit_rate" means conservative.
/// Structural problems raise MalformedInput or DimensionMismatch; rate checks
/// are left to validate().
ModelSpec spec_from_json(const nlohmann::json& doc);
ModelSpec spec_from_json_text(const std::string& text);
ModelSpec spec_from_file(const std::string& path);

nlohmann::json spec_to_json(const ModelSpec& spec);

/// FNV-1a 64-bit digest of a byte string, rendered as 16 hex digits.
std::string digest_hex(const std::string& bytes);

}  // namespace mbpi
