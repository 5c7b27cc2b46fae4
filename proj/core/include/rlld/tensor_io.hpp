#pragma once

#include "rlld/common.hpp"

#include <filesystem>
#include <string>

namespace rlld {

// Text matrix format: one row per line, entries separated by single spaces,
// doubles written in shortest round-trip form. Blank lines and lines starting
// with '#' are ignored on read. All rows must have the same number of entries.

std::string format_double(double value);

void write_matrix_text(const std::filesystem::path& path, const Matrix& values);
void write_binary_matrix_text(const std::filesystem::path& path, const BinaryMatrix& values);

/// Throws Error(parse) on ragged rows or unparsable entries, and Error(numerical)
/// naming the file if any entry is NaN or infinite.
Matrix read_matrix_text(const std::filesystem::path& path);
BinaryMatrix read_binary_matrix_text(const std::filesystem::path& path);

}  // namespace rlld
