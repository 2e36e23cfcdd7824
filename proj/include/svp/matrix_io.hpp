#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "svp/matrix.hpp"

namespace svp {

// Shortest text that parses back to the same double ("%.17g").
std::string format_double(double value);

// Text format: a "rows cols" header line, then one line per row of
// space-separated values. Throws FormatError on malformed input.
Matrix read_matrix(std::istream& in);
Matrix read_matrix_file(const std::filesystem::path& path);
void write_matrix(std::ostream& out, const Matrix& m);
void write_matrix_file(const std::filesystem::path& path, const Matrix& m);

}  // namespace svp
