#pragma once

#include <filesystem>
#include <string_view>

namespace vtreid {

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace vtreid
