#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ghnet {

// Writes to "<path>.tmp" and renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Shortest decimal text that parses back to exactly `v`.
std::string format_real(double v);

}  // namespace ghnet
