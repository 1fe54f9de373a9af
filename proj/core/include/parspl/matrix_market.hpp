#pragma once

#include <iosfwd>
#include <string>

#include "parspl/sparse.hpp"

namespace parspl {

/// Reads a "matrix coordinate real {general,symmetric}" Matrix Market stream.
/// Indices are 1-based on disk and 0-based in memory; symmetric files are
/// expanded to full storage.
SparseCSC<double> read_matrix_market(std::istream& in);
SparseCSC<double> read_matrix_market_file(const std::string& path);

/// Writes "matrix coordinate real general" with round-trip precision.
template <typename T>
void write_matrix_market(std::ostream& out, const SparseCSC<T>& a);
template <typename T>
void write_matrix_market_file(const std::string& path, const SparseCSC<T>& a);

}  // namespace parspl
