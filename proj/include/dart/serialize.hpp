#pragma once

#include <string>

#include <json.hpp>

#include "dart/types.hpp"

namespace dart {

/// Shortest round-trip decimal representation ('.' separator, no locale).
std::string format_double(double value);

/// RFC-4180 field escaping (quotes a field only when it needs it).
std::string csv_escape(const std::string& field);

nlohmann::json noise_to_json(const NoiseParam& psi);
NoiseParam noise_from_json(const nlohmann::json& j);

nlohmann::json policy_to_json(const PolicyParams& policy);
PolicyParams policy_from_json(const nlohmann::json& j);

/// Line-delimited dataset: a metadata header line followed by one JSON
/// record per (state, label, executed) step.
std::string dataset_to_jsonl(const Dataset& dataset);
Dataset dataset_from_jsonl(const std::string& text);

void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace dart
