#pragma once
// Small locale-independent text/binary IO helpers shared by the CSV, JSON
// and checkpoint writers.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace camox {

// Round-trip exact, locale independent ("%.17g" trimmed to shortest form).
std::string format_double(double v);

double parse_double(std::string_view s);  // throws DataError on junk
long parse_long(std::string_view s);

std::vector<std::string_view> split_csv(std::string_view line);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

void append_u32_le(std::string& out, std::uint32_t v);
std::uint32_t read_u32_le(const unsigned char* p);

}  // namespace camox
