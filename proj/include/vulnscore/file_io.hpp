#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace vulnscore {

/// Reads a whole file; throws IoError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

} // namespace vulnscore
