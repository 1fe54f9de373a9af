#include "parspl/ldl.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "parspl/amd.hpp"

namespace parspl {

namespace {

void check_length(std::size_t got, index_t want, const char* what) {
  if (got != static_cast<std::size_t>(want))
    throw DimensionError(std::string(what) + ": length mismatch (" + std::to_string(got) +
                         " vs " + std::to_string(want) + ")");
}

}  // namespace

template <typename T>
std::vector<index_t> elimination_tree(const SparseCSC<T>& upper) {
  if (!upper.square()) throw DimensionError("elimination_tree: matrix must be square");
  const index_t n = upper.cols();
  std::vector<index_t> parent(n, -1), ancestor(n, -1);
  for (index_t k = 0; k < n; ++k) {
    for (index_t i : upper.col_rows(k)) {
      if (i >= k) continue;
      // Walk to the root of i's subtree with path compression.
      while (i != -1 && i < k) {
        const index_t next = ancestor[i];
        ancestor[i] = k;
        if (next == -1) {
          parent[i] = k;
          break;
        }
        i = next;
      }
    }
  }
  return parent;
}

template <typename T>
LdlSymbolic ldl_symbolic(const SparseCSC<T>& K, const Permutation& perm) {
  if (!K.square()) throw DimensionError("ldl_symbolic: matrix must be square");
  check_length(static_cast<std::size_t>(perm.size()), K.cols(), "ldl_symbolic");
  const index_t n = K.cols();
  const auto upper = symperm_upper(K, perm);
  auto parent = elimination_tree(upper);

  std::vector<index_t> flag(n, -1);
  std::vector<index_t> count(n, 0);
  auto for_each_in_row = [&](index_t k, auto&& visit) {
    flag[k] = k;
    for (index_t i : upper.col_rows(k)) {
      for (; i < k && flag[i] != k; i = parent[i]) {
        flag[i] = k;
        visit(i);
      }
    }
  };
  for (index_t k = 0; k < n; ++k) for_each_in_row(k, [&](index_t j) { ++count[j]; });

  std::vector<index_t> colptr(n + 1, 0);
  for (index_t j = 0; j < n; ++j) colptr[j + 1] = colptr[j] + count[j];
  std::vector<index_t> rowidx(colptr[n]);
  std::vector<index_t> next(colptr.begin(), colptr.end() - 1);
  std::fill(flag.begin(), flag.end(), -1);
  for (index_t k = 0; k < n; ++k)
    for_each_in_row(k, [&](index_t j) { rowidx[next[j]++] = k; });

  std::vector<double> values(rowidx.size(), 0.0);
  return {perm, std::move(parent),
          SparseCSC<double>(n, n, std::move(colptr), std::move(rowidx), std::move(values))};
}

template <typename T>
LdlFactor<T> ldl_numeric(const SparseCSC<T>& K, const LdlSymbolic& sym, double pivot_tol) {
  if (!K.square()) throw DimensionError("ldl_numeric: matrix must be square");
  const index_t n = K.cols();
  check_length(static_cast<std::size_t>(sym.perm.size()), n, "ldl_numeric");
  const auto upper = symperm_upper(K, sym.perm);
  const auto& pat = sym.pattern;

  std::vector<index_t> colptr(pat.colptr().begin(), pat.colptr().end());
  std::vector<index_t> rowidx(pat.rowidx().begin(), pat.rowidx().end());
  std::vector<T> lx(rowidx.size(), T(0));
  std::vector<T> dinv(n);
  std::vector<index_t> next(colptr.begin(), colptr.end() - 1);

  std::vector<T> y(n, T(0));
  std::vector<index_t> flag(n, -1);
  std::vector<index_t> reach;
  reach.reserve(n);

  for (index_t k = 0; k < n; ++k) {
    reach.clear();
    flag[k] = k;
    T d = T(0);
    const auto rows = upper.col_rows(k);
    const auto vals = upper.col_values(k);
    for (std::size_t t = 0; t < rows.size(); ++t) {
      index_t i = rows[t];
      if (i == k) {
        d += vals[t];
        continue;
      }
      if (i > k) continue;
      y[i] += vals[t];
      for (; i < k && flag[i] != k; i = sym.parent[i]) {
        flag[i] = k;
        reach.push_back(i);
      }
    }
    std::sort(reach.begin(), reach.end());
    for (index_t j : reach) {
      const T yj = y[j];
      y[j] = T(0);
      for (index_t p = colptr[j]; p < next[j]; ++p) y[rowidx[p]] -= lx[p] * yj;
      const T lkj = yj * dinv[j];
      d -= yj * lkj;
      if (next[j] >= colptr[j + 1] || rowidx[next[j]] != k)
        throw Error(ErrorCode::internal, "ldl_numeric: symbolic pattern does not match matrix");
      lx[next[j]++] = lkj;
    }
    if (!(std::abs(static_cast<double>(d)) >= pivot_tol))
      throw FactorizationError("ldl_numeric: pivot below tolerance at column " +
                                   std::to_string(k),
                               k);
    dinv[k] = T(1) / d;
  }

  return {SparseCSC<T>(n, n, std::move(colptr), std::move(rowidx), std::move(lx)),
          std::move(dinv), sym.perm};
}

template <typename T>
LdlFactor<T> ldl_factor(const SparseCSC<T>& K, double pivot_tol) {
  const auto perm = amd_order(K);
  return ldl_numeric(K, ldl_symbolic(K, perm), pivot_tol);
}

template <typename T>
void sptrsv_fe_inplace(const SparseCSC<T>& L, std::span<T> x) {
  check_length(x.size(), L.cols(), "sptrsv_fe");
  const auto& cp = L.colptr();
  const auto& ri = L.rowidx();
  const auto& v = L.values();
  for (index_t j = 0; j < L.cols(); ++j) {
    const T xj = x[j];
    for (index_t p = cp[j]; p < cp[j + 1]; ++p) x[ri[p]] -= v[p] * xj;
  }
}

template <typename T>
void sptrsv_bs_inplace(const SparseCSC<T>& L, std::span<T> x) {
  check_length(x.size(), L.cols(), "sptrsv_bs");
  const auto& cp = L.colptr();
  const auto& ri = L.rowidx();
  const auto& v = L.values();
  for (index_t j = L.cols() - 1; j >= 0; --j) {
    T acc = x[j];
    for (index_t p = cp[j]; p < cp[j + 1]; ++p) acc -= v[p] * x[ri[p]];
    x[j] = acc;
  }
}

template <typename T>
void diag_scale_inplace(std::span<const T> dinv, std::span<T> x) {
  if (dinv.size() != x.size()) throw DimensionError("diag_scale: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= dinv[i];
}

template <typename T>
std::vector<T> sptrsv_fe(const SparseCSC<T>& L, std::span<const T> b) {
  std::vector<T> x(b.begin(), b.end());
  sptrsv_fe_inplace<T>(L, x);
  return x;
}

template <typename T>
std::vector<T> sptrsv_bs(const SparseCSC<T>& L, std::span<const T> b) {
  std::vector<T> x(b.begin(), b.end());
  sptrsv_bs_inplace<T>(L, x);
  return x;
}

template <typename T>
std::vector<T> diag_scale(std::span<const T> dinv, std::span<const T> b) {
  std::vector<T> x(b.begin(), b.end());
  diag_scale_inplace<T>(dinv, x);
  return x;
}

template <typename T>
std::vector<T> ldl_solve(const LdlFactor<T>& f, std::span<const T> b) {
  check_length(b.size(), f.size(), "ldl_solve");
  std::vector<T> pb(b.size()), x(b.size());
  f.perm.apply(b, std::span<T>(pb));
  ReferenceSolver<T>(f).solve_permuted(pb);
  f.perm.apply_inverse(std::span<const T>(pb), std::span<T>(x));
  return x;
}

#define PARSPL_INSTANTIATE(T)                                                          \
  template std::vector<index_t> elimination_tree(const SparseCSC<T>&);                 \
  template LdlSymbolic ldl_symbolic(const SparseCSC<T>&, const Permutation&);          \
  template LdlFactor<T> ldl_numeric(const SparseCSC<T>&, const LdlSymbolic&, double);  \
  template LdlFactor<T> ldl_factor(const SparseCSC<T>&, double);                       \
  template void sptrsv_fe_inplace(const SparseCSC<T>&, std::span<T>);                  \
  template void sptrsv_bs_inplace(const SparseCSC<T>&, std::span<T>);                  \
  template void diag_scale_inplace(std::span<const T>, std::span<T>);                  \
  template std::vector<T> sptrsv_fe(const SparseCSC<T>&, std::span<const T>);          \
  template std::vector<T> sptrsv_bs(const SparseCSC<T>&, std::span<const T>);          \
  template std::vector<T> diag_scale(std::span<const T>, std::span<const T>);          \
  template std::vector<T> ldl_solve(const LdlFactor<T>&, std::span<const T>);

PARSPL_INSTANTIATE(float)
PARSPL_INSTANTIATE(double)

}  // namespace parspl
