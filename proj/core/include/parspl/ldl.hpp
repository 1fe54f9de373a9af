#pragma once

#include <span>
#include <vector>

#include "parspl/sparse.hpp"

namespace parspl {

/// Elimination tree of a square matrix given by its upper triangle
/// (entries with row > col are ignored). Roots have parent -1.
template <typename T>
std::vector<index_t> elimination_tree(const SparseCSC<T>& upper);

struct LdlSymbolic {
  Permutation perm;
  std::vector<index_t> parent;
  // Pattern of L (strictly lower, sorted rows per column); values are zero.
  SparseCSC<double> pattern;
};

template <typename T>
struct LdlFactor {
  SparseCSC<T> L;
  std::vector<T> dinv;
  Permutation perm;

  [[nodiscard]] index_t size() const noexcept { return L.cols(); }
};

template <typename T>
constexpr double default_pivot_tol() {
  return sizeof(T) >= 8 ? 1e-12 : 1e-7;
}

/// Pattern of L for P K P^T. K may be stored full or upper only.
template <typename T>
LdlSymbolic ldl_symbolic(const SparseCSC<T>& K, const Permutation& perm);

/// Numeric factorization P K P^T = (I+L) D (I+L)^T with dinv = 1/diag(D).
/// Throws FactorizationError when |d_k| < pivot_tol.
template <typename T>
LdlFactor<T> ldl_numeric(const SparseCSC<T>& K, const LdlSymbolic& sym,
                         double pivot_tol = default_pivot_tol<T>());

/// Convenience: AMD ordering, symbolic and numeric in one call.
template <typename T>
LdlFactor<T> ldl_factor(const SparseCSC<T>& K,
                        double pivot_tol = default_pivot_tol<T>());

/// In-place kernels on the permuted system.
template <typename T>
void sptrsv_fe_inplace(const SparseCSC<T>& L, std::span<T> x);
template <typename T>
void sptrsv_bs_inplace(const SparseCSC<T>& L, std::span<T> x);
template <typename T>
void diag_scale_inplace(std::span<const T> dinv, std::span<T> x);

template <typename T>
std::vector<T> sptrsv_fe(const SparseCSC<T>& L, std::span<const T> b);
template <typename T>
std::vector<T> sptrsv_bs(const SparseCSC<T>& L, std::span<const T> b);
template <typename T>
std::vector<T> diag_scale(std::span<const T> dinv, std::span<const T> b);

/// Solves K x = b in the original ordering.
template <typename T>
std::vector<T> ldl_solve(const LdlFactor<T>& f, std::span<const T> b);

/// Backend for the three triangular stages on the permuted system. The
/// reference backend runs the sequential kernels above; the executor provides
/// a parallel one driven by a precomputed schedule.
template <typename T>
class TriangularSolver {
 public:
  virtual ~TriangularSolver() = default;
  // x holds P b on entry and P K^{-1} b on exit.
  virtual void solve_permuted(std::span<T> x) = 0;
};

template <typename T>
class ReferenceSolver final : public TriangularSolver<T> {
 public:
  explicit ReferenceSolver(const LdlFactor<T>& f) : f_(&f) {}
  void solve_permuted(std::span<T> x) override {
    sptrsv_fe_inplace(f_->L, x);
    diag_scale_inplace<T>(f_->dinv, x);
    sptrsv_bs_inplace(f_->L, x);
  }

 private:
  const LdlFactor<T>* f_;
};

}  // namespace parspl
