#pragma once

#include <vector>

#include "parspl/sparse.hpp"

namespace parspl {

/// Augmenting-path max flow (BFS layering with blocking flows) on real
/// capacities.
class MaxFlow {
 public:
  explicit MaxFlow(index_t nodes);

  /// Arc u -> v with capacity cap, plus the reverse arc with rev_cap.
  void add_edge(index_t u, index_t v, double cap, double rev_cap = 0.0);

  double run(index_t source, index_t sink);

  /// Nodes reachable from the source in the residual graph after run(). This
  /// is the smallest source side over all minimum cuts.
  [[nodiscard]] std::vector<bool> source_side() const;

  [[nodiscard]] index_t nodes() const noexcept { return static_cast<index_t>(head_.size()); }

 private:
  struct Arc {
    index_t to;
    index_t next;
    double residual;
  };

  bool layer(index_t s, index_t t);
  double push(index_t u, index_t t, double limit);

  std::vector<index_t> head_;
  std::vector<Arc> arcs_;
  std::vector<index_t> level_, cursor_;
  index_t source_ = -1;
  double eps_ = 0.0;
  double max_cap_ = 0.0;
};

}  // namespace parspl
