#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dbrlab/common.hpp"

namespace dbrlab::io {

// Round-trippable formatting for result files ("%.17g"): reading the text
// back yields the identical double.
std::string format_double(double v);

// Writes via a temp file in the same directory, then renames into place.
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

// Comma-delimited numeric matrix, one unit per row, optional single header
// row (detected by a non-numeric first token). Errors carry 1-based row and
// column of the offending cell; NaN cells are rejected.
Mat read_csv_matrix(const std::filesystem::path& path);

// Full-precision CSV without header.
std::string csv_from_matrix(const Mat& m);
void write_csv_matrix(const std::filesystem::path& path, const Mat& m);

}  // namespace dbrlab::io
