#pragma once

#include "parspl/sparse.hpp"

namespace parspl {

/// Fill-reducing symmetric ordering for the pattern of a square matrix.
///
/// Minimum-degree elimination on the quotient graph with AMD-style approximate
/// degree updates and element absorption, followed by a postorder of the
/// resulting elimination tree so that subtrees occupy contiguous index ranges.
/// Ties are broken by (initial degree, index), which makes the result fully
/// deterministic. The pattern is symmetrised internally; values are ignored.
template <typename T>
Permutation amd_order(const SparseCSC<T>& pattern);

/// Postorder of a forest given as a parent array (-1 marks a root). Children
/// are visited in increasing index order.
std::vector<index_t> postorder(std::span<const index_t> parent);

}  // namespace parspl
