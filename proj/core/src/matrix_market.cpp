#include "parspl/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace parspl {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

SparseCSC<double> read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("matrix market: empty stream");
  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket") throw FormatError("matrix market: missing banner");
  object = lower(object);
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (object != "matrix" || format != "coordinate")
    throw FormatError("matrix market: only 'matrix coordinate' is supported");
  if (field != "real" && field != "integer")
    throw FormatError("matrix market: unsupported field '" + field + "'");
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general")
    throw FormatError("matrix market: unsupported symmetry '" + symmetry + "'");

  do {
    if (!std::getline(in, line)) throw FormatError("matrix market: missing size line");
  } while (line.empty() || line[0] == '%');

  long long nrows = 0, ncols = 0, nnz = 0;
  {
    std::istringstream size_line(line);
    if (!(size_line >> nrows >> ncols >> nnz))
      throw FormatError("matrix market: malformed size line");
  }
  if (nrows < 0 || ncols < 0 || nnz < 0 ||
      nrows > std::numeric_limits<index_t>::max() ||
      ncols > std::numeric_limits<index_t>::max())
    throw FormatError("matrix market: invalid dimensions");

  std::vector<Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(symmetric ? 2 * nnz : nnz));
  for (long long k = 0; k < nnz; ++k) {
    long long i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) throw FormatError("matrix market: truncated entry list");
    if (i < 1 || i > nrows || j < 1 || j > ncols)
      throw FormatError("matrix market: entry index out of range");
    const auto r = static_cast<index_t>(i - 1);
    const auto c = static_cast<index_t>(j - 1);
    entries.push_back({r, c, v});
    if (symmetric && r != c) entries.push_back({c, r, v});
  }
  return SparseCSC<double>::from_triplets(static_cast<index_t>(nrows),
                                          static_cast<index_t>(ncols), entries);
}

SparseCSC<double> read_matrix_market_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  return read_matrix_market(in);
}

template <typename T>
void write_matrix_market(std::ostream& out, const SparseCSC<T>& a) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nnz() << '\n';
  const auto old = out.precision(std::numeric_limits<T>::max_digits10);
  for (index_t j = 0; j < a.cols(); ++j) {
    const auto rows = a.col_rows(j);
    const auto vals = a.col_values(j);
    for (std::size_t k = 0; k < rows.size(); ++k)
      out << rows[k] + 1 << ' ' << j + 1 << ' ' << vals[k] << '\n';
  }
  out.precision(old);
}

template <typename T>
void write_matrix_market_file(const std::string& path, const SparseCSC<T>& a) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  write_matrix_market(out, a);
}

template void write_matrix_market(std::ostream&, const SparseCSC<float>&);
template void write_matrix_market(std::ostream&, const SparseCSC<double>&);
template void write_matrix_market_file(const std::string&, const SparseCSC<float>&);
template void write_matrix_market_file(const std::string&, const SparseCSC<double>&);

}  // namespace parspl
