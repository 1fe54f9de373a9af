#include "parspl/amd.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "parspl/ldl.hpp"

namespace parspl {

namespace {

struct QuotientGraph {
  // Variable-variable adjacency (live variables only after pruning).
  std::vector<std::vector<index_t>> var_adj;
  // Elements adjacent to each variable (may contain absorbed ids; filtered lazily).
  std::vector<std::vector<index_t>> elem_adj;
  // Live variables of each element.
  std::vector<std::vector<index_t>> elem_vars;
  std::vector<char> eliminated;
  std::vector<char> absorbed;
};

std::vector<index_t> minimum_degree(const SparseCSC<double>& sym) {
  const index_t n = sym.cols();
  QuotientGraph g;
  g.var_adj.resize(n);
  g.elem_adj.resize(n);
  g.elem_vars.resize(n);
  g.eliminated.assign(n, 0);
  g.absorbed.assign(n, 0);

  std::vector<index_t> degree(n), initial(n);
  for (index_t j = 0; j < n; ++j) {
    const auto rows = sym.col_rows(j);
    g.var_adj[j].assign(rows.begin(), rows.end());
    degree[j] = initial[j] = static_cast<index_t>(rows.size());
  }

  using Key = std::tuple<index_t, index_t, index_t>;
  std::set<Key> queue;
  for (index_t j = 0; j < n; ++j) queue.insert({degree[j], initial[j], j});

  std::vector<index_t> mark(n, -1);
  std::vector<index_t> wmark(n, -1);
  std::vector<index_t> w(n, 0);
  std::vector<index_t> order;
  order.reserve(n);

  for (index_t k = 0; k < n; ++k) {
    const auto [deg, init, p] = *queue.begin();
    queue.erase(queue.begin());
    order.push_back(p);
    g.eliminated[p] = 1;

    // Lp = A_p U (union of L_e for e in E_p), minus p.
    std::vector<index_t> lp;
    mark[p] = p;
    for (index_t v : g.var_adj[p]) {
      if (!g.eliminated[v] && mark[v] != p) {
        mark[v] = p;
        lp.push_back(v);
      }
    }
    for (index_t e : g.elem_adj[p]) {
      if (g.absorbed[e]) continue;
      for (index_t v : g.elem_vars[e]) {
        if (!g.eliminated[v] && mark[v] != p) {
          mark[v] = p;
          lp.push_back(v);
        }
      }
      g.absorbed[e] = 1;
      g.elem_vars[e].clear();
      g.elem_vars[e].shrink_to_fit();
    }
    std::sort(lp.begin(), lp.end());
    g.var_adj[p].clear();
    g.elem_adj[p].clear();
    g.elem_vars[p] = lp;

    // Update adjacency of every variable in Lp.
    for (index_t i : lp) {
      auto& va = g.var_adj[i];
      va.erase(std::remove_if(va.begin(), va.end(),
                              [&](index_t v) { return g.eliminated[v] || mark[v] == p; }),
               va.end());
      auto& ea = g.elem_adj[i];
      ea.erase(std::remove_if(ea.begin(), ea.end(),
                              [&](index_t e) { return g.absorbed[e]; }),
               ea.end());
      ea.push_back(p);
    }

    // |Le \ Lp| for every other element touching Lp.
    for (index_t i : lp) {
      for (index_t e : g.elem_adj[i]) {
        if (e == p) continue;
        if (wmark[e] != p) {
          wmark[e] = p;
          w[e] = static_cast<index_t>(g.elem_vars[e].size());
        }
        --w[e];
      }
    }

    // Aggressive absorption of elements covered by Lp.
    for (index_t i : lp) {
      for (index_t e : g.elem_adj[i]) {
        if (e != p && wmark[e] == p && w[e] == 0 && !g.absorbed[e]) {
          g.absorbed[e] = 1;
          g.elem_vars[e].clear();
        }
      }
    }

    const index_t remaining = n - k - 1;
    const auto lp_size = static_cast<index_t>(lp.size());
    for (index_t i : lp) {
      auto& ea = g.elem_adj[i];
      ea.erase(std::remove_if(ea.begin(), ea.end(),
                              [&](index_t e) { return g.absorbed[e]; }),
               ea.end());
      index_t d = static_cast<index_t>(g.var_adj[i].size()) + lp_size - 1;
      for (index_t e : ea)
        if (e != p) d += (wmark[e] == p) ? w[e] : static_cast<index_t>(g.elem_vars[e].size());
      d = std::min({d, remaining - 1 < 0 ? 0 : remaining - 1, degree[i] + lp_size});
      d = std::max<index_t>(d, 0);
      if (d != degree[i]) {
        queue.erase({degree[i], initial[i], i});
        degree[i] = d;
        queue.insert({degree[i], initial[i], i});
      }
    }
  }
  return order;
}

}  // namespace

std::vector<index_t> postorder(std::span<const index_t> parent) {
  const auto n = static_cast<index_t>(parent.size());
  std::vector<index_t> head(n, -1), next(n, -1);
  // Build child lists in increasing order by inserting in reverse.
  for (index_t j = n - 1; j >= 0; --j) {
    if (parent[j] == -1) continue;
    next[j] = head[parent[j]];
    head[parent[j]] = j;
  }
  std::vector<index_t> post;
  post.reserve(n);
  std::vector<index_t> stack;
  for (index_t root = 0; root < n; ++root) {
    if (parent[root] != -1) continue;
    stack.push_back(root);
    while (!stack.empty()) {
      const index_t top = stack.back();
      const index_t child = head[top];
      if (child == -1) {
        stack.pop_back();
        post.push_back(top);
      } else {
        head[top] = next[child];
        stack.push_back(child);
      }
    }
  }
  return post;
}

template <typename T>
Permutation amd_order(const SparseCSC<T>& pattern) {
  if (!pattern.square()) throw DimensionError("amd_order: matrix must be square");
  const index_t n = pattern.cols();
  if (n == 0) return Permutation::identity(0);

  const auto sym = symmetric_pattern(pattern.template cast<double>());
  const auto order = minimum_degree(sym);
  Permutation md(order);

  // Postorder the elimination tree of the reordered pattern.
  auto full = sym;
  {
    std::vector<Triplet<double>> t = full.to_triplets();
    for (index_t i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    full = SparseCSC<double>::from_triplets(n, n, t);
  }
  const auto parent = elimination_tree(symperm_upper(full, md));
  const auto post = postorder(parent);
  std::vector<index_t> composed(n);
  for (index_t k = 0; k < n; ++k) composed[k] = order[post[k]];
  return Permutation(std::move(composed));
}

template Permutation amd_order(const SparseCSC<float>&);
template Permutation amd_order(const SparseCSC<double>&);

}  // namespace parspl
