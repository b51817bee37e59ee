#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace eog {

// FNV-1a over raw bytes; stable fingerprint for run manifests.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);
std::string digest_file(const std::string& path);

// Run manifest: command name, seed, config (plus its digest), and input
// file digests. Carries no timestamps so reruns are byte-identical.
nlohmann::json make_manifest(const std::string& command, std::uint64_t seed,
                             const nlohmann::json& config,
                             const std::vector<std::string>& input_paths);

void write_manifest_file(const std::string& path, const nlohmann::json& manifest);

}  // namespace eog
