#include "textio.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "cbsolve/errors.hpp"

namespace cbsolve::cli {

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  // Next non-blank, non-comment line split into tokens; false at end of input.
  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      tokens.clear();
      std::istringstream ss(line);
      for (std::string t; ss >> t;) tokens.push_back(t);
      return true;
    }
    return false;
  }

  std::size_t line() const noexcept { return line_no_; }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

std::size_t parse_count(const std::string& tok, std::size_t line, const char* what) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ParseError(line, std::string("expected a non-negative integer for ") + what + ", got '" + tok + "'");
  }
  return v;
}

double parse_value(const std::string& tok, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw ParseError(line, "expected a finite number, got '" + tok + "'");
  }
  return v;
}

bool parse_flag(const std::string& tok, std::size_t line) {
  if (tok == "1" || tok == "true") return true;
  if (tok == "0" || tok == "false") return false;
  throw ParseError(line, "expected cyclic flag 0/1/true/false, got '" + tok + "'");
}

std::vector<double> read_row(LineReader& reader, std::size_t count, const char* what) {
  std::vector<std::string> tokens;
  if (!reader.next(tokens)) throw ParseError(reader.line() + 1, std::string("unexpected end of input, missing ") + what);
  if (tokens.size() != count) {
    throw ParseError(reader.line(), std::string(what) + " has " + std::to_string(tokens.size()) + " values, expected " +
                                        std::to_string(count));
  }
  std::vector<double> row;
  row.reserve(count);
  for (const auto& t : tokens) row.push_back(parse_value(t, reader.line()));
  return row;
}

void expect_end(LineReader& reader) {
  std::vector<std::string> tokens;
  if (reader.next(tokens)) throw ParseError(reader.line(), "unexpected trailing data");
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return in;
}

}  // namespace

BandedMatrix read_matrix(std::istream& in) {
  LineReader reader(in);
  std::vector<std::string> head;
  if (!reader.next(head)) throw ParseError(1, "empty matrix file");
  if (head.size() != 4 || head[0] != "banded") {
    throw ParseError(reader.line(), "matrix header must be 'banded n w cyclic'");
  }
  const std::size_t line = reader.line();
  const std::size_t n = parse_count(head[1], line, "n");
  const std::size_t w = parse_count(head[2], line, "w");
  const bool cyclic = parse_flag(head[3], line);
  if (w < 3 || w % 2 == 0) throw ParseError(line, "bandwidth must be odd and at least 3");
  if (n == 0) throw ParseError(line, "matrix must have at least one row");
  std::vector<std::vector<double>> bands;
  for (std::size_t d = 0; d < w; ++d) bands.push_back(read_row(reader, n, "diagonal"));
  expect_end(reader);
  try {
    return BandedMatrix::from_bands(bands, cyclic);
  } catch (const Error& e) {
    throw ParseError(line, e.what());
  }
}

RhsBatch read_rhs(std::istream& in) {
  LineReader reader(in);
  std::vector<std::string> head;
  if (!reader.next(head)) throw ParseError(1, "empty rhs file");
  if (head.size() != 3 || head[0] != "rhs") throw ParseError(reader.line(), "rhs header must be 'rhs n m'");
  const std::size_t n = parse_count(head[1], reader.line(), "n");
  const std::size_t m = parse_count(head[2], reader.line(), "m");
  if (n == 0 || m == 0) throw ParseError(reader.line(), "rhs dimensions must be positive");
  RhsBatch b(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = read_row(reader, m, "rhs row");
    std::copy(row.begin(), row.end(), b.row(i).begin());
  }
  expect_end(reader);
  return b;
}

BandedMatrix read_matrix_file(const std::string& path) {
  auto in = open(path);
  return read_matrix(in);
}

RhsBatch read_rhs_file(const std::string& path) {
  auto in = open(path);
  return read_rhs(in);
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

void write_matrix(std::ostream& out, const BandedMatrix& a) {
  out << "banded " << a.size() << ' ' << a.width() << ' ' << (a.cyclic() ? 1 : 0) << '\n';
  const int r = static_cast<int>(a.half_width());
  for (int t = -r; t <= r; ++t) {
    for (std::size_t i = 0; i < a.size(); ++i) out << (i ? " " : "") << format_double(a.band(t, i));
    out << '\n';
  }
}

void write_rhs(std::ostream& out, const RhsBatch& b) {
  out << "rhs " << b.rows() << ' ' << b.cols() << '\n';
  for (std::size_t i = 0; i < b.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) out << (j ? " " : "") << format_double(b(i, j));
    out << '\n';
  }
}

}  // namespace cbsolve::cli
