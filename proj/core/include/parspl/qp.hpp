#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "parspl/sparse.hpp"

namespace parspl {

/// minimize 1/2 x'Px + q'x  subject to  l <= Ax <= u.
/// P holds the upper triangle only. Infinite bounds are allowed.
template <typename T>
struct QpProblem {
  SparseCSC<T> P;
  std::vector<T> q;
  SparseCSC<T> A;
  std::vector<T> l;
  std::vector<T> u;

  [[nodiscard]] index_t n() const noexcept { return P.cols(); }
  [[nodiscard]] index_t m() const noexcept { return A.rows(); }

  /// Throws DimensionError / Error(invalid_argument) on malformed input.
  void validate() const;

  /// Objective value at x.
  [[nodiscard]] T objective(std::span<const T> x) const;

  template <typename U>
  [[nodiscard]] QpProblem<U> cast() const {
    return {P.template cast<U>(), std::vector<U>(q.begin(), q.end()), A.template cast<U>(),
            std::vector<U>(l.begin(), l.end()), std::vector<U>(u.begin(), u.end())};
  }
};

/// Text container, first line "parspl-qp <major>.<minor>", then sections
/// [P] and [A] holding Matrix Market blocks, and [q] [l] [u] holding one
/// value per line ("inf" / "-inf" for unbounded).
inline constexpr int kQpFormatMajor = 1;
inline constexpr int kQpFormatMinor = 0;

void write_qp(std::ostream& out, const QpProblem<double>& qp);
QpProblem<double> read_qp(std::istream& in);
void save_qp(const std::string& path, const QpProblem<double>& qp);
QpProblem<double> load_qp(const std::string& path);

struct ResidualSample {
  int iteration;
  double r_prim;
  double r_dual;
};

void write_trace_csv(std::ostream& out, const std::vector<ResidualSample>& trace);
void save_trace_csv(const std::string& path, const std::vector<ResidualSample>& trace);

}  // namespace parspl
