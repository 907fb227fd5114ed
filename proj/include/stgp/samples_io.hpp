#pragma once

#include <filesystem>

#include <json.hpp>

#include "stgp/inference.hpp"

namespace stgp {

nlohmann::ordered_json prior_to_json(const PriorConfig& p);
/// Parses a prior object; unknown keys raise ConfigError naming the key.
PriorConfig prior_from_json(const nlohmann::json& j);

/// Writes meta.json, hyper.csv, lambda.bin and (when M was sampled) m.bin into `dir`.
void save_samples(const PosteriorSamples& s, const std::filesystem::path& dir);
PosteriorSamples load_samples(const std::filesystem::path& dir);

}  // namespace stgp
