#pragma once

#include <filesystem>
#include <string>

#include "smishing/pipeline.hpp"

namespace smishing {

inline constexpr int kBundleFormat = 1;

// Writes the bundle directory (manifest.json, tagging/, streams/, fusion/,
// threshold) and returns the SHA-256 of manifest.json. The manifest lists a
// SHA-256 for every other file and carries no timestamps, so identical
// pipelines produce identical hashes.
std::string save_bundle(const Pipeline& pipeline, const std::filesystem::path& directory);

// Verifies every listed hash and the tagging pattern fingerprint before
// loading. Throws BundleError naming the offending file or field.
Pipeline load_bundle(const std::filesystem::path& directory);

// SHA-256 of an existing bundle's manifest.json.
std::string bundle_hash(const std::filesystem::path& directory);

}  // namespace smishing
