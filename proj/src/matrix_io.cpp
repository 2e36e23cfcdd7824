#include "svp/matrix_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "svp/errors.hpp"

namespace svp {

std::string format_double(double value) {
  char buf[32];
  const int len = std::snprintf(buf, sizeof buf, "%.17g", value);
  return std::string(buf, static_cast<std::size_t>(len));
}

namespace {

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) return true;
  }
  return false;
}

}  // namespace

Matrix read_matrix(std::istream& in) {
  std::string line;
  if (!next_data_line(in, line)) throw FormatError("matrix text: missing \"rows cols\" header");
  std::istringstream header(line);
  long long rows = -1, cols = -1;
  std::string extra;
  if (!(header >> rows >> cols) || rows < 0 || cols < 0 || (header >> extra)) {
    throw FormatError("matrix text: bad header \"" + line + "\"");
  }
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(rows * cols));
  for (long long i = 0; i < rows; ++i) {
    if (!next_data_line(in, line)) {
      throw FormatError("matrix text: expected " + std::to_string(rows) + " rows, got " +
                        std::to_string(i));
    }
    std::istringstream fields(line);
    std::string token;
    long long count = 0;
    while (fields >> token) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
        throw FormatError("matrix text: bad value \"" + token + "\" in row " + std::to_string(i));
      }
      data.push_back(v);
      ++count;
    }
    if (count != cols) {
      throw FormatError("matrix text: row " + std::to_string(i) + " has " +
                        std::to_string(count) + " values, expected " + std::to_string(cols));
    }
  }
  return Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols), std::move(data));
}

Matrix read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_matrix(in);
}

void write_matrix(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_matrix_file(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_matrix(out, m);
}

}  // namespace svp
