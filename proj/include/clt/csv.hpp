#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace clt {

/// 12 significant digits, '.' decimal separator, locale independent.
std::string format_number(double v);

/// Writes `content` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partially written report. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace clt
