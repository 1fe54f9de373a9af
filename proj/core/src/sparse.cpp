#include "parspl/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace parspl {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::dimension: return "dimension";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::factorization: return "factorization";
    case ErrorCode::format: return "format";
    case ErrorCode::version: return "version";
    case ErrorCode::io: return "io";
    case ErrorCode::internal: return "internal";
    case ErrorCode::no_candidate: return "no_candidate";
  }
  return "unknown";
}

template <typename T>
SparseCSC<T>::SparseCSC(index_t nrows, index_t ncols)
    : nrows_(nrows), ncols_(ncols), colptr_(static_cast<std::size_t>(ncols) + 1, 0) {
  if (nrows < 0 || ncols < 0) throw DimensionError("negative matrix dimension");
}

template <typename T>
SparseCSC<T>::SparseCSC(index_t nrows, index_t ncols, std::vector<index_t> colptr,
                        std::vector<index_t> rowidx, std::vector<T> values)
    : nrows_(nrows),
      ncols_(ncols),
      colptr_(std::move(colptr)),
      rowidx_(std::move(rowidx)),
      values_(std::move(values)) {
  validate();
}

template <typename T>
void SparseCSC<T>::validate() const {
  if (nrows_ < 0 || ncols_ < 0) throw DimensionError("negative matrix dimension");
  if (colptr_.size() != static_cast<std::size_t>(ncols_) + 1)
    throw DimensionError("colptr length must be ncols+1");
  if (colptr_.front() != 0) throw FormatError("colptr[0] must be 0");
  if (rowidx_.size() != values_.size())
    throw DimensionError("rowidx and values lengths differ");
  if (colptr_.back() != static_cast<index_t>(rowidx_.size()))
    throw FormatError("colptr[ncols] must equal nnz");
  for (index_t j = 0; j < ncols_; ++j) {
    if (colptr_[j + 1] < colptr_[j]) throw FormatError("colptr must be non-decreasing");
    for (index_t p = colptr_[j]; p < colptr_[j + 1]; ++p) {
      if (rowidx_[p] < 0 || rowidx_[p] >= nrows_)
        throw FormatError("row index out of range in column " + std::to_string(j));
      if (p > colptr_[j] && rowidx_[p] <= rowidx_[p - 1])
        throw FormatError("row indices not strictly increasing in column " +
                          std::to_string(j));
    }
  }
}

template <typename T>
SparseCSC<T> SparseCSC<T>::from_triplets(index_t nrows, index_t ncols,
                                         std::span<const Triplet<T>> entries) {
  if (nrows < 0 || ncols < 0) throw DimensionError("negative matrix dimension");
  std::vector<index_t> counts(static_cast<std::size_t>(ncols) + 1, 0);
  for (const auto& t : entries) {
    if (t.row < 0 || t.row >= nrows || t.col < 0 || t.col >= ncols)
      throw DimensionError("triplet index out of range");
    ++counts[t.col + 1];
  }
  std::partial_sum(counts.begin(), counts.end(), counts.begin());
  std::vector<index_t> next(counts.begin(), counts.end() - 1);
  std::vector<index_t> rows(entries.size());
  std::vector<T> vals(entries.size());
  for (const auto& t : entries) {
    rows[next[t.col]] = t.row;
    vals[next[t.col]] = t.value;
    ++next[t.col];
  }

  // Sort each column and sum duplicates.
  std::vector<index_t> colptr(static_cast<std::size_t>(ncols) + 1, 0);
  std::vector<index_t> out_rows;
  std::vector<T> out_vals;
  out_rows.reserve(rows.size());
  out_vals.reserve(rows.size());
  std::vector<index_t> order;
  for (index_t j = 0; j < ncols; ++j) {
    const index_t b = counts[j];
    const index_t e = counts[j + 1];
    order.resize(static_cast<std::size_t>(e - b));
    std::iota(order.begin(), order.end(), b);
    std::stable_sort(order.begin(), order.end(),
                     [&](index_t a, index_t c) { return rows[a] < rows[c]; });
    for (index_t p : order) {
      if (!out_rows.empty() && static_cast<index_t>(out_rows.size()) > colptr[j] &&
          out_rows.back() == rows[p]) {
        out_vals.back() += vals[p];
      } else {
        out_rows.push_back(rows[p]);
        out_vals.push_back(vals[p]);
      }
    }
    colptr[j + 1] = static_cast<index_t>(out_rows.size());
  }
  return SparseCSC(nrows, ncols, std::move(colptr), std::move(out_rows),
                   std::move(out_vals));
}

template <typename T>
SparseCSC<T> SparseCSC<T>::identity(index_t n) {
  std::vector<index_t> colptr(static_cast<std::size_t>(n) + 1);
  std::vector<index_t> rows(static_cast<std::size_t>(n));
  std::iota(colptr.begin(), colptr.end(), 0);
  std::iota(rows.begin(), rows.end(), 0);
  return SparseCSC(n, n, std::move(colptr), std::move(rows),
                   std::vector<T>(static_cast<std::size_t>(n), T(1)));
}

template <typename T>
T SparseCSC<T>::coeff(index_t i, index_t j) const {
  const auto rows = col_rows(j);
  const auto it = std::lower_bound(rows.begin(), rows.end(), i);
  if (it == rows.end() || *it != i) return T(0);
  return values_[colptr_[j] + (it - rows.begin())];
}

template <typename T>
SparseCSC<T> SparseCSC<T>::transpose() const {
  std::vector<index_t> colptr(static_cast<std::size_t>(nrows_) + 1, 0);
  for (index_t r : rowidx_) ++colptr[r + 1];
  std::partial_sum(colptr.begin(), colptr.end(), colptr.begin());
  std::vector<index_t> next(colptr.begin(), colptr.end() - 1);
  std::vector<index_t> rows(rowidx_.size());
  std::vector<T> vals(values_.size());
  for (index_t j = 0; j < ncols_; ++j) {
    for (index_t p = colptr_[j]; p < colptr_[j + 1]; ++p) {
      const index_t q = next[rowidx_[p]]++;
      rows[q] = j;
      vals[q] = values_[p];
    }
  }
  return SparseCSC(ncols_, nrows_, std::move(colptr), std::move(rows), std::move(vals));
}

template <typename T>
std::vector<Triplet<T>> SparseCSC<T>::to_triplets() const {
  std::vector<Triplet<T>> out;
  out.reserve(rowidx_.size());
  for (index_t j = 0; j < ncols_; ++j)
    for (index_t p = colptr_[j]; p < colptr_[j + 1]; ++p)
      out.push_back({rowidx_[p], j, values_[p]});
  return out;
}

namespace {

template <typename T, typename Keep>
SparseCSC<T> filter(const SparseCSC<T>& a, Keep keep) {
  std::vector<index_t> colptr(static_cast<std::size_t>(a.cols()) + 1, 0);
  std::vector<index_t> rows;
  std::vector<T> vals;
  for (index_t j = 0; j < a.cols(); ++j) {
    const auto r = a.col_rows(j);
    const auto v = a.col_values(j);
    for (std::size_t k = 0; k < r.size(); ++k) {
      if (keep(r[k], j)) {
        rows.push_back(r[k]);
        vals.push_back(v[k]);
      }
    }
    colptr[j + 1] = static_cast<index_t>(rows.size());
  }
  return SparseCSC<T>(a.rows(), a.cols(), std::move(colptr), std::move(rows),
                      std::move(vals));
}

}  // namespace

template <typename T>
SparseCSC<T> SparseCSC<T>::upper() const {
  return filter(*this, [](index_t i, index_t j) { return i <= j; });
}

template <typename T>
SparseCSC<T> SparseCSC<T>::strictly_lower() const {
  return filter(*this, [](index_t i, index_t j) { return i > j; });
}

template <typename T>
void SparseCSC<T>::multiply_add(std::span<const T> x, std::span<T> y, T alpha) const {
  if (x.size() != static_cast<std::size_t>(ncols_) ||
      y.size() != static_cast<std::size_t>(nrows_))
    throw DimensionError("multiply_add: vector length mismatch");
  for (index_t j = 0; j < ncols_; ++j) {
    const T xj = alpha * x[j];
    if (xj == T(0)) continue;
    for (index_t p = colptr_[j]; p < colptr_[j + 1]; ++p) y[rowidx_[p]] += values_[p] * xj;
  }
}

template <typename T>
void SparseCSC<T>::multiply_transpose_add(std::span<const T> x, std::span<T> y,
                                          T alpha) const {
  if (x.size() != static_cast<std::size_t>(nrows_) ||
      y.size() != static_cast<std::size_t>(ncols_))
    throw DimensionError("multiply_transpose_add: vector length mismatch");
  for (index_t j = 0; j < ncols_; ++j) {
    T acc = T(0);
    for (index_t p = colptr_[j]; p < colptr_[j + 1]; ++p) acc += values_[p] * x[rowidx_[p]];
    y[j] += alpha * acc;
  }
}

template <typename T>
void SparseCSC<T>::symmetric_upper_multiply_add(std::span<const T> x, std::span<T> y,
                                                T alpha) const {
  if (!square() || x.size() != static_cast<std::size_t>(ncols_) ||
      y.size() != static_cast<std::size_t>(nrows_))
    throw DimensionError("symmetric multiply: dimension mismatch");
  for (index_t j = 0; j < ncols_; ++j) {
    for (index_t p = colptr_[j]; p < colptr_[j + 1]; ++p) {
      const index_t i = rowidx_[p];
      y[i] += alpha * values_[p] * x[j];
      if (i != j) y[j] += alpha * values_[p] * x[i];
    }
  }
}

Permutation::Permutation(std::vector<index_t> perm) : perm_(std::move(perm)) {
  inv_.assign(perm_.size(), -1);
  const auto n = static_cast<index_t>(perm_.size());
  for (index_t k = 0; k < n; ++k) {
    const index_t p = perm_[k];
    if (p < 0 || p >= n || inv_[p] != -1)
      throw Error(ErrorCode::invalid_argument, "permutation is not a bijection");
    inv_[p] = k;
  }
}

Permutation Permutation::identity(index_t n) {
  std::vector<index_t> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  return Permutation(std::move(p));
}

Permutation Permutation::inverse() const { return Permutation(inv_); }

bool Permutation::is_identity() const noexcept {
  for (std::size_t k = 0; k < perm_.size(); ++k)
    if (perm_[k] != static_cast<index_t>(k)) return false;
  return true;
}

template <typename T>
SparseCSC<T> symperm_upper(const SparseCSC<T>& a, const Permutation& p) {
  if (!a.square()) throw DimensionError("symperm_upper: matrix must be square");
  if (p.size() != a.cols()) throw DimensionError("symperm_upper: permutation size mismatch");
  const auto pinv = p.inv_perm();
  std::vector<Triplet<T>> out;
  out.reserve(static_cast<std::size_t>(a.nnz()));
  for (index_t j = 0; j < a.cols(); ++j) {
    const auto rows = a.col_rows(j);
    const auto vals = a.col_values(j);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const index_t i = rows[k];
      if (i > j) continue;
      index_t r = pinv[i];
      index_t c = pinv[j];
      if (r > c) std::swap(r, c);
      out.push_back({r, c, vals[k]});
    }
  }
  return SparseCSC<T>::from_triplets(a.rows(), a.cols(), out);
}

template <typename T>
SparseCSC<T> symmetric_from_upper(const SparseCSC<T>& upper) {
  if (!upper.square()) throw DimensionError("symmetric_from_upper: matrix must be square");
  std::vector<Triplet<T>> out;
  for (const auto& t : upper.to_triplets()) {
    if (t.row > t.col) continue;
    out.push_back(t);
    if (t.row != t.col) out.push_back({t.col, t.row, t.value});
  }
  return SparseCSC<T>::from_triplets(upper.rows(), upper.cols(), out);
}

template <typename T>
SparseCSC<T> symmetric_pattern(const SparseCSC<T>& a) {
  if (!a.square()) throw DimensionError("symmetric_pattern: matrix must be square");
  std::vector<Triplet<T>> out;
  for (const auto& t : a.to_triplets()) {
    if (t.row == t.col) continue;
    out.push_back({t.row, t.col, T(1)});
    out.push_back({t.col, t.row, T(1)});
  }
  auto s = SparseCSC<T>::from_triplets(a.rows(), a.cols(), out);
  for (auto& v : s.values_mut()) v = T(1);
  return s;
}

template <typename T>
T max_abs(std::span<const T> v) noexcept {
  T m = T(0);
  for (const T& x : v) m = std::max(m, std::abs(x));
  return m;
}

#define PARSPL_INSTANTIATE(T)                                                    \
  template class SparseCSC<T>;                                                   \
  template SparseCSC<T> symperm_upper(const SparseCSC<T>&, const Permutation&); \
  template SparseCSC<T> symmetric_from_upper(const SparseCSC<T>&);               \
  template SparseCSC<T> symmetric_pattern(const SparseCSC<T>&);                  \
  template T max_abs(std::span<const T>) noexcept;

PARSPL_INSTANTIATE(float)
PARSPL_INSTANTIATE(double)

#undef PARSPL_INSTANTIATE

}  // namespace parspl
