#pragma once

#include <filesystem>
#include <string>

namespace ctlsched {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace ctlsched
