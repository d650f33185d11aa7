#pragma once

#include <filesystem>
#include <string>

#include "atlas/map.hpp"

namespace atlas {

// On-disk map format: a directory holding a line-oriented `manifest`
// (format version, descriptor bit-length, counts, cameras, mission
// baseframes, per-blob CRC32 checksums) plus little-endian binary blobs
// `vertices.bin`, `edges.bin`, `landmarks.bin`, `descriptors.bin`, each a
// sequence of records with 64-bit length prefixes. Round trips are
// bit-identical.
constexpr int kMapFormatVersion = 1;

void save_map(const Map& map, const std::filesystem::path& dir);

// Write-temp-rename: the map is fully staged in a sibling directory and then
// swapped in, so a crash mid-save leaves the previous map readable (possibly
// under a ".old" suffix). An existing index.bin is carried over.
void save_map_atomic(const Map& map, const std::filesystem::path& dir);

// Throws UnsupportedVersion, CorruptBlob (checksum mismatch or truncated
// record) or IoFailure.
Map load_map(const std::filesystem::path& dir);

// CRC32 of a whole file; throws IoFailure when unreadable.
std::uint32_t crc32_file(const std::filesystem::path& file);

// Re-computes and rewrites the manifest checksum line for one blob (used for
// auxiliary blobs such as the descriptor index).
void update_manifest_checksum(const std::filesystem::path& dir,
                              const std::string& blob_name);

// Returns the checksum recorded in the manifest for blob_name, if any.
bool manifest_checksum(const std::filesystem::path& dir, const std::string& blob_name,
                       std::uint32_t* out);

}  // namespace atlas
