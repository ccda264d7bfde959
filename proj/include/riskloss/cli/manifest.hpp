#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace riskloss::cli {

inline constexpr std::string_view kToolName = "riskloss";
inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr std::string_view kManifestFile = "manifest.json";

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// {"path": absolute path, "sha256": digest}
nlohmann::ordered_json file_entry(const std::filesystem::path& path);

// Two-space indented, trailing LF.
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc);
nlohmann::ordered_json read_json(const std::filesystem::path& path);

// Skeleton shared by every manifest: tool, version, command.
nlohmann::ordered_json manifest_header(std::string_view command);

}  // namespace riskloss::cli
