#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace aggcausal {

std::string sha256_hex(const std::string& bytes);

// Shortest text that round-trips the double exactly.
std::string format_double(double v);

std::vector<std::string> split(const std::string& s, char sep);
std::string trim(const std::string& s);

std::string read_file(const std::filesystem::path& path);
// Throws Error("IO_ERROR") naming the path on failure.
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace aggcausal
