#include "parspl/maxflow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace parspl {

MaxFlow::MaxFlow(index_t nodes) {
  if (nodes < 0) throw Error(ErrorCode::invalid_argument, "maxflow: negative node count");
  head_.assign(nodes, -1);
}

void MaxFlow::add_edge(index_t u, index_t v, double cap, double rev_cap) {
  const index_t n = nodes();
  if (u < 0 || v < 0 || u >= n || v >= n) throw DimensionError("maxflow: node out of range");
  if (!(cap >= 0.0) || !(rev_cap >= 0.0))
    throw Error(ErrorCode::invalid_argument, "maxflow: capacities must be non-negative");
  arcs_.push_back({v, head_[u], cap});
  head_[u] = static_cast<index_t>(arcs_.size()) - 1;
  arcs_.push_back({u, head_[v], rev_cap});
  head_[v] = static_cast<index_t>(arcs_.size()) - 1;
  // Effectively infinite arcs must not set the tolerance scale.
  for (double c : {cap, rev_cap})
    if (c < 1e15) max_cap_ = std::max(max_cap_, c);
}

bool MaxFlow::layer(index_t s, index_t t) {
  level_.assign(head_.size(), -1);
  std::deque<index_t> queue{s};
  level_[s] = 0;
  while (!queue.empty()) {
    const index_t u = queue.front();
    queue.pop_front();
    for (index_t a = head_[u]; a != -1; a = arcs_[a].next) {
      const Arc& arc = arcs_[a];
      if (arc.residual > eps_ && level_[arc.to] < 0) {
        level_[arc.to] = level_[u] + 1;
        queue.push_back(arc.to);
      }
    }
  }
  return level_[t] >= 0;
}

double MaxFlow::push(index_t u, index_t t, double limit) {
  if (u == t) return limit;
  for (index_t& a = cursor_[u]; a != -1; a = arcs_[a].next) {
    Arc& arc = arcs_[a];
    if (arc.residual <= eps_ || level_[arc.to] != level_[u] + 1) continue;
    const double got = push(arc.to, t, std::min(limit, arc.residual));
    if (got > 0.0) {
      arc.residual -= got;
      arcs_[a ^ 1].residual += got;
      return got;
    }
  }
  return 0.0;
}

double MaxFlow::run(index_t source, index_t sink) {
  const index_t n = nodes();
  if (source < 0 || sink < 0 || source >= n || sink >= n) throw DimensionError("maxflow: terminal out of range");
  if (source == sink) throw Error(ErrorCode::invalid_argument, "maxflow: source equals sink");
  source_ = source;
  eps_ = 1e-12 * std::max(max_cap_, 1e-300);
  double total = 0.0;
  while (layer(source, sink)) {
    cursor_ = head_;
    for (;;) {
      const double got = push(source, sink, std::numeric_limits<double>::infinity());
      if (got <= 0.0) break;
      total += got;
    }
  }
  return total;
}

std::vector<bool> MaxFlow::source_side() const {
  std::vector<bool> seen(head_.size(), false);
  if (source_ < 0) return seen;
  std::deque<index_t> queue{source_};
  seen[source_] = true;
  while (!queue.empty()) {
    const index_t u = queue.front();
    queue.pop_front();
    for (index_t a = head_[u]; a != -1; a = arcs_[a].next)
      if (arcs_[a].residual > eps_ && !seen[arcs_[a].to]) {
        seen[arcs_[a].to] = true;
        queue.push_back(arcs_[a].to);
      }
  }
  return seen;
}

}  // namespace parspl
