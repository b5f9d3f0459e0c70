#pragma once

#include <iosfwd>
#include <string>

#include "cbsolve/banded.hpp"
#include "cbsolve/dense.hpp"

namespace cbsolve::cli {

// Matrix file:  "banded n w cyclic" then w lines of n values, lowest diagonal
// first. cyclic is 0/1 or true/false.
// Rhs file:     "rhs n m" then n lines of m values.
// Blank lines and lines starting with '#' are ignored. Errors are
// ParseError carrying the 1-based line number.

BandedMatrix read_matrix(std::istream& in);
RhsBatch read_rhs(std::istream& in);

BandedMatrix read_matrix_file(const std::string& path);
RhsBatch read_rhs_file(const std::string& path);

void write_matrix(std::ostream& out, const BandedMatrix& a);
void write_rhs(std::ostream& out, const RhsBatch& b);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace cbsolve::cli
