#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace edgecap {

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

// Write-to-temp-then-rename so readers never observe partial files.
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace edgecap
