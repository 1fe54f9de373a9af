#include "parspl/qp.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "parspl/matrix_market.hpp"

namespace parspl {

template <typename T>
void QpProblem<T>::validate() const {
  if (n() == 0) throw DimensionError("qp: problem has no variables");
  if (!P.square()) throw DimensionError("qp: P must be square");
  if (A.cols() != n()) throw DimensionError("qp: A must have n columns");
  if (static_cast<index_t>(q.size()) != n()) throw DimensionError("qp: q must have length n");
  if (static_cast<index_t>(l.size()) != m() || static_cast<index_t>(u.size()) != m())
    throw DimensionError("qp: l and u must have length m");
  for (index_t j = 0; j < P.cols(); ++j)
    for (index_t i : P.col_rows(j))
      if (i > j) throw Error(ErrorCode::invalid_argument, "qp: P must store the upper triangle only");
  for (index_t i = 0; i < m(); ++i) {
    if (std::isnan(static_cast<double>(l[i])) || std::isnan(static_cast<double>(u[i])))
      throw Error(ErrorCode::invalid_argument, "qp: NaN bound in row " + std::to_string(i));
    if (l[i] > u[i])
      throw Error(ErrorCode::invalid_argument, "qp: l > u in row " + std::to_string(i));
  }
}

template <typename T>
T QpProblem<T>::objective(std::span<const T> x) const {
  std::vector<T> px(n(), T(0));
  P.symmetric_upper_multiply_add(x, px);
  T v = T(0);
  for (index_t i = 0; i < n(); ++i) v += T(0.5) * x[i] * px[i] + q[i] * x[i];
  return v;
}

template struct QpProblem<float>;
template struct QpProblem<double>;

namespace {

void write_vector(std::ostream& out, const std::vector<double>& v) {
  out << v.size() << '\n';
  for (double x : v) {
    if (std::isinf(x))
      out << (x > 0 ? "inf" : "-inf") << '\n';
    else
      out << x << '\n';
  }
}

std::vector<double> read_vector(std::istream& in) {
  std::size_t count = 0;
  if (!(in >> count)) throw FormatError("qp: missing vector length");
  std::vector<double> v(count);
  for (auto& x : v) {
    std::string tok;
    if (!(in >> tok)) throw FormatError("qp: truncated vector");
    if (tok == "inf" || tok == "+inf")
      x = std::numeric_limits<double>::infinity();
    else if (tok == "-inf")
      x = -std::numeric_limits<double>::infinity();
    else {
      std::size_t used = 0;
      try {
        x = std::stod(tok, &used);
      } catch (const std::exception&) {
        throw FormatError("qp: bad number '" + tok + "'");
      }
      if (used != tok.size()) throw FormatError("qp: bad number '" + tok + "'");
    }
  }
  return v;
}

void expect_section(std::istream& in, const std::string& name) {
  std::string tok;
  if (!(in >> tok) || tok != "[" + name + "]")
    throw FormatError("qp: expected section [" + name + "]");
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
}

}  // namespace

void write_qp(std::ostream& out, const QpProblem<double>& qp) {
  out << "parspl-qp " << kQpFormatMajor << '.' << kQpFormatMinor << '\n';
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  out << "[P]\n";
  write_matrix_market(out, qp.P);
  out << "[A]\n";
  write_matrix_market(out, qp.A);
  out << "[q]\n";
  write_vector(out, qp.q);
  out << "[l]\n";
  write_vector(out, qp.l);
  out << "[u]\n";
  write_vector(out, qp.u);
  out.precision(old);
}

QpProblem<double> read_qp(std::istream& in) {
  std::string magic, version;
  if (!(in >> magic >> version) || magic != "parspl-qp")
    throw FormatError("qp: missing 'parspl-qp' header");
  const auto dot = version.find('.');
  int major = -1;
  try {
    major = std::stoi(version.substr(0, dot));
  } catch (const std::exception&) {
    throw FormatError("qp: malformed version '" + version + "'");
  }
  if (major != kQpFormatMajor)
    throw VersionError("qp: unsupported format version " + version);
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');

  QpProblem<double> qp;
  expect_section(in, "P");
  qp.P = read_matrix_market(in);
  expect_section(in, "A");
  qp.A = read_matrix_market(in);
  expect_section(in, "q");
  qp.q = read_vector(in);
  expect_section(in, "l");
  qp.l = read_vector(in);
  expect_section(in, "u");
  qp.u = read_vector(in);
  qp.validate();
  return qp;
}

void save_qp(const std::string& path, const QpProblem<double>& qp) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  write_qp(out, qp);
}

QpProblem<double> load_qp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  return read_qp(in);
}

void write_trace_csv(std::ostream& out, const std::vector<ResidualSample>& trace) {
  out << "iteration,r_prim,r_dual\n";
  const auto old = out.precision(10);
  for (const auto& s : trace) out << s.iteration << ',' << s.r_prim << ',' << s.r_dual << '\n';
  out.precision(old);
}

void save_trace_csv(const std::string& path, const std::vector<ResidualSample>& trace) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  write_trace_csv(out, trace);
}

}  // namespace parspl
