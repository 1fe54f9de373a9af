#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "parspl/error.hpp"

namespace parspl {

using index_t = std::int32_t;

template <typename T>
struct Triplet {
  index_t row;
  index_t col;
  T value;
};

/// Compressed-sparse-column matrix.
///
/// Invariants (checked by validate()): colptr has ncols+1 entries, starts at 0
/// and is non-decreasing; row indices inside a column are strictly increasing
/// and below nrows.
template <typename T>
class SparseCSC {
 public:
  using value_type = T;

  SparseCSC() = default;
  SparseCSC(index_t nrows, index_t ncols);
  SparseCSC(index_t nrows, index_t ncols, std::vector<index_t> colptr,
            std::vector<index_t> rowidx, std::vector<T> values);

  /// Builds a matrix from unordered triplets. Duplicates are summed.
  static SparseCSC from_triplets(index_t nrows, index_t ncols,
                                 std::span<const Triplet<T>> entries);
  static SparseCSC identity(index_t n);

  [[nodiscard]] index_t rows() const noexcept { return nrows_; }
  [[nodiscard]] index_t cols() const noexcept { return ncols_; }
  [[nodiscard]] index_t nnz() const noexcept {
    return static_cast<index_t>(rowidx_.size());
  }
  [[nodiscard]] bool square() const noexcept { return nrows_ == ncols_; }

  [[nodiscard]] std::span<const index_t> colptr() const noexcept { return colptr_; }
  [[nodiscard]] std::span<const index_t> rowidx() const noexcept { return rowidx_; }
  [[nodiscard]] std::span<const T> values() const noexcept { return values_; }
  [[nodiscard]] std::span<T> values_mut() noexcept { return values_; }

  [[nodiscard]] std::span<const index_t> col_rows(index_t j) const {
    return {rowidx_.data() + colptr_[j],
            static_cast<std::size_t>(colptr_[j + 1] - colptr_[j])};
  }
  [[nodiscard]] std::span<const T> col_values(index_t j) const {
    return {values_.data() + colptr_[j],
            static_cast<std::size_t>(colptr_[j + 1] - colptr_[j])};
  }

  /// Value at (i, j); zero when not stored.
  [[nodiscard]] T coeff(index_t i, index_t j) const;

  [[nodiscard]] SparseCSC transpose() const;
  [[nodiscard]] std::vector<Triplet<T>> to_triplets() const;

  /// Entries with row <= col (upper triangle including the diagonal).
  [[nodiscard]] SparseCSC upper() const;
  /// Entries with row > col.
  [[nodiscard]] SparseCSC strictly_lower() const;

  template <typename U>
  [[nodiscard]] SparseCSC<U> cast() const {
    std::vector<U> v(values_.begin(), values_.end());
    return SparseCSC<U>(nrows_, ncols_, colptr_, rowidx_, std::move(v));
  }

  /// y += alpha * A x
  void multiply_add(std::span<const T> x, std::span<T> y, T alpha = T(1)) const;
  /// y += alpha * A^T x
  void multiply_transpose_add(std::span<const T> x, std::span<T> y,
                              T alpha = T(1)) const;
  /// y += alpha * (A + A^T - diag(A)) x for an upper-stored symmetric matrix.
  void symmetric_upper_multiply_add(std::span<const T> x, std::span<T> y,
                                    T alpha = T(1)) const;

  void validate() const;

  [[nodiscard]] bool same_pattern(const SparseCSC& other) const noexcept {
    return nrows_ == other.nrows_ && ncols_ == other.ncols_ &&
           colptr_ == other.colptr_ && rowidx_ == other.rowidx_;
  }

 private:
  index_t nrows_ = 0;
  index_t ncols_ = 0;
  std::vector<index_t> colptr_{0};
  std::vector<index_t> rowidx_;
  std::vector<T> values_;
};

/// Symmetric permutation, new position k holds old index perm[k].
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<index_t> perm);
  static Permutation identity(index_t n);

  [[nodiscard]] index_t size() const noexcept {
    return static_cast<index_t>(perm_.size());
  }
  [[nodiscard]] std::span<const index_t> perm() const noexcept { return perm_; }
  [[nodiscard]] std::span<const index_t> inv_perm() const noexcept { return inv_; }
  [[nodiscard]] index_t operator[](index_t k) const { return perm_[k]; }
  [[nodiscard]] Permutation inverse() const;

  /// y[k] = x[perm[k]]
  template <typename T>
  void apply(std::span<const T> x, std::span<T> y) const {
    for (std::size_t k = 0; k < perm_.size(); ++k) y[k] = x[perm_[k]];
  }
  /// y[perm[k]] = x[k]
  template <typename T>
  void apply_inverse(std::span<const T> x, std::span<T> y) const {
    for (std::size_t k = 0; k < perm_.size(); ++k) y[perm_[k]] = x[k];
  }

  [[nodiscard]] bool is_identity() const noexcept;

 private:
  std::vector<index_t> perm_;
  std::vector<index_t> inv_;
};

/// Upper triangle of P*A*P^T, reading only entries with row <= col of A.
/// A may be stored either full-symmetric or upper-only.
template <typename T>
SparseCSC<T> symperm_upper(const SparseCSC<T>& a, const Permutation& p);

/// Full symmetric matrix from an upper-stored one.
template <typename T>
SparseCSC<T> symmetric_from_upper(const SparseCSC<T>& upper);

/// Structural symmetrisation A + A^T with the diagonal removed (pattern only).
template <typename T>
SparseCSC<T> symmetric_pattern(const SparseCSC<T>& a);

template <typename T>
T max_abs(std::span<const T> v) noexcept;

}  // namespace parspl
