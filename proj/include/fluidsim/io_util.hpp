#pragma once

#include <string>
#include <vector>

namespace fluidsim {

/// Write-to-temp + atomic rename; the destination never holds a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

std::vector<std::string> split_csv_line(const std::string& line);

} // namespace fluidsim
