#include "parspl/hypt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "parspl/maxflow.hpp"

namespace parspl {

namespace {

constexpr double kUnbounded = 1e30;

void require_strictly_lower(const SparseCSC<double>& L, const char* who) {
  if (!L.square()) throw DimensionError(std::string(who) + ": L must be square");
  for (index_t j = 0; j < L.cols(); ++j)
    for (index_t i : L.col_rows(j))
      if (i <= j) throw Error(ErrorCode::invalid_argument, std::string(who) + ": L must be strictly lower");
}

bool overlaps(index_t a0, index_t a1, index_t b0, index_t b1) { return a0 < b1 && b0 < a1; }

void sort_elements(std::vector<TileElement>& e) {
  std::sort(e.begin(), e.end(), [](const TileElement& a, const TileElement& b) {
    return a.out != b.out ? a.out < b.out : a.in < b.in;
  });
}

}  // namespace

const char* to_string(TileKind k) noexcept {
  switch (k) {
    case TileKind::mapping: return "Mapping";
    case TileKind::diaginv: return "Diaginv";
    case TileKind::collist: return "Collist";
    case TileKind::diag_scale: return "DiagScale";
  }
  return "?";
}

const char* to_string(ScheduleKind k) noexcept {
  switch (k) {
    case ScheduleKind::parspl: return "parspl";
    case ScheduleKind::naive_level: return "naive-level";
    case ScheduleKind::naive_column: return "naive-column";
  }
  return "?";
}

// ---------------------------------------------------------------- levels

std::vector<index_t> column_levels(const SparseCSC<double>& L) {
  require_strictly_lower(L, "column_levels");
  std::vector<index_t> level(L.cols(), 0);
  for (index_t j = 0; j < L.cols(); ++j)
    for (index_t i : L.col_rows(j)) level[i] = std::max(level[i], level[j] + 1);
  return level;
}

LevelSchedule level_schedule(const SparseCSC<double>& L) {
  const auto level = column_levels(L);
  LevelSchedule out;
  const index_t depth = level.empty() ? 0 : *std::max_element(level.begin(), level.end()) + 1;
  out.levels.resize(depth);
  for (index_t j = 0; j < L.cols(); ++j) out.levels[level[j]].push_back(j);
  out.cutoff_level = depth;
  out.total_levels = depth;
  return out;
}

LevelSchedule partial_level_select(const LevelSchedule& full, index_t threshold) {
  LevelSchedule out;
  out.total_levels = full.total_levels;
  std::size_t k = 0;
  while (k < full.levels.size() && static_cast<index_t>(full.levels[k].size()) >= threshold) {
    out.levels.push_back(full.levels[k]);
    ++k;
  }
  out.cutoff_level = static_cast<index_t>(k);
  for (; k < full.levels.size(); ++k)
    out.remainder.insert(out.remainder.end(), full.levels[k].begin(), full.levels[k].end());
  out.remainder.insert(out.remainder.end(), full.remainder.begin(), full.remainder.end());
  std::sort(out.remainder.begin(), out.remainder.end());
  return out;
}

// ---------------------------------------------------------------- tiling

index_t min_cut_boundary(const SparseCSC<double>& region, index_t lo, index_t hi, double* cut_cost) {
  if (lo < 0 || hi > region.cols() || hi - lo < 2)
    throw Error(ErrorCode::invalid_argument, "min_cut_boundary: range must hold at least two columns");
  const index_t m = hi - lo;
  MaxFlow g(m);
  // Arcs k+1 -> k of unbounded capacity force the source side to be a prefix,
  // so every finite cut is a single boundary position.
  for (index_t k = 0; k + 1 < m; ++k) g.add_edge(k + 1, k, kUnbounded);
  for (index_t j = lo; j < hi; ++j)
    for (index_t i : region.col_rows(j)) {
      if (i >= hi) break;
      if (i <= j) continue;
      const double d = static_cast<double>(i - j);
      const double w = 1.0 / (d * d);
      g.add_edge(j - lo, i - lo, w, w);
    }
  const double flow = g.run(0, m - 1);
  const auto side = g.source_side();
  index_t b = 0;
  while (b < m && side[b]) ++b;
  if (cut_cost) *cut_cost = flow;
  return lo + b;
}

namespace {

void bisect(const SparseCSC<double>& region, index_t lo, index_t hi, int depth, const TilingOptions& opt,
            std::vector<index_t>& cuts) {
  if (hi - lo < 2 || hi - lo <= opt.max_size || depth >= opt.max_depth) return;
  const index_t b = min_cut_boundary(region, lo, hi);
  cuts.push_back(b);
  bisect(region, lo, b, depth + 1, opt, cuts);
  bisect(region, b, hi, depth + 1, opt, cuts);
}

}  // namespace

std::vector<index_t> graph_tile(const SparseCSC<double>& region, const TilingOptions& opt) {
  if (!region.square()) throw DimensionError("graph_tile: region must be square");
  if (opt.max_size < 1 || opt.max_depth < 0) throw Error(ErrorCode::invalid_argument, "graph_tile: bad options");
  std::vector<index_t> cuts;
  bisect(region, 0, region.cols(), 0, opt, cuts);
  std::sort(cuts.begin(), cuts.end());
  return cuts;
}

// ---------------------------------------------------------------- kernels

bool mapping_eligible(std::span<const std::pair<index_t, index_t>> entries) {
  std::vector<index_t> rows, cols;
  rows.reserve(entries.size());
  cols.reserve(entries.size());
  for (const auto& [r, c] : entries) {
    rows.push_back(r);
    cols.push_back(c);
  }
  std::sort(rows.begin(), rows.end());
  std::sort(cols.begin(), cols.end());
  return std::adjacent_find(rows.begin(), rows.end()) == rows.end() &&
         std::adjacent_find(cols.begin(), cols.end()) == cols.end();
}

std::vector<double> invert_unit_lower(std::span<const double> l, index_t s) {
  if (s < 0 || l.size() != static_cast<std::size_t>(s) * s) throw DimensionError("invert_unit_lower: need s*s values");
  std::vector<double> inv(static_cast<std::size_t>(s) * s, 0.0);
  // Column c of the inverse by forward substitution on e_c.
  for (index_t c = 0; c < s; ++c) {
    inv[c * s + c] = 1.0;
    for (index_t r = c + 1; r < s; ++r) {
      double acc = 0.0;
      for (index_t k = c; k < r; ++k) acc += l[r * s + k] * inv[k * s + c];
      inv[r * s + c] = -acc;
    }
  }
  return inv;
}

KernelAssignment assign_kernels(const SparseCSC<double>& L, std::span<const double> dinv, const Tiling& tiling,
                                double invert_limit) {
  require_strictly_lower(L, "assign_kernels");
  const index_t n = L.cols();
  if (static_cast<index_t>(dinv.size()) != n) throw DimensionError("assign_kernels: dinv length");
  if (static_cast<index_t>(tiling.order.size()) != n) throw DimensionError("assign_kernels: order length");
  const auto& bounds = tiling.bounds;
  if (bounds.empty() || bounds.front() != 0 || bounds.back() != n)
    throw Error(ErrorCode::invalid_argument, "assign_kernels: bounds must span [0, n]");
  for (std::size_t k = 1; k < bounds.size(); ++k)
    if (bounds[k] <= bounds[k - 1] && n > 0)
      throw Error(ErrorCode::invalid_argument, "assign_kernels: bounds must increase");
  const index_t nb = static_cast<index_t>(bounds.size()) - 1;

  std::vector<index_t> pos(n, -1), block_of(n, 0);
  for (index_t p = 0; p < n; ++p) {
    const index_t c = tiling.order[p];
    if (c < 0 || c >= n || pos[c] >= 0) throw Error(ErrorCode::invalid_argument, "assign_kernels: order is not a permutation");
    pos[c] = p;
  }
  for (index_t b = 0; b < nb; ++b)
    for (index_t p = bounds[b]; p < bounds[b + 1]; ++p) block_of[p] = b;

  struct Entry {
    index_t i, j;
    double v;
  };
  std::vector<std::vector<Entry>> internal(nb);
  std::map<std::pair<index_t, index_t>, std::vector<Entry>> rects;  // (col block, row block)
  for (index_t j = 0; j < n; ++j) {
    const auto rows = L.col_rows(j);
    const auto vals = L.col_values(j);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const index_t i = rows[k];
      if (pos[i] <= pos[j]) throw Error(ErrorCode::invalid_argument, "assign_kernels: order breaks a dependency");
      const index_t bi = block_of[pos[i]], bj = block_of[pos[j]];
      if (bi == bj) {
        if (bj < tiling.n_level_blocks) throw Error(ErrorCode::internal, "assign_kernels: dependency inside a level");
        internal[bj].push_back({i, j, vals[k]});
      } else {
        rects[{bj, bi}].push_back({i, j, vals[k]});
      }
    }
  }

  KernelAssignment out;
  std::vector<std::uint8_t> inverted(n, 0);
  std::vector<std::vector<double>> inverses(nb);
  std::vector<bool> fallback(nb, false);
  for (index_t b = tiling.n_level_blocks; b < nb; ++b) {
    if (internal[b].empty()) continue;
    const index_t lo = bounds[b], s = bounds[b + 1] - lo;
    std::vector<double> dense(static_cast<std::size_t>(s) * s, 0.0);
    for (const auto& e : internal[b]) dense[(pos[e.i] - lo) * s + (pos[e.j] - lo)] = e.v;
    auto inv = invert_unit_lower(dense, s);
    double big = 0.0;
    for (double v : inv) big = std::max(big, std::abs(v));
    if (!(big <= invert_limit)) {
      fallback[b] = true;
      ++out.fallbacks;
      continue;
    }
    inverses[b] = std::move(inv);
    for (index_t p = lo; p < lo + s; ++p) inverted[tiling.order[p]] = 1;
  }
  auto src = [&](index_t j) { return inverted[j] ? n + j : j; };

  index_t seq = 0;
  auto rect_tile = [&](std::vector<Entry> entries, TileKind kind, index_t r0, index_t r1, index_t c0, index_t c1) {
    Tile t;
    t.kind = kind;
    t.row_begin = r0;
    t.row_end = r1;
    t.col_begin = c0;
    t.col_end = c1;
    t.seq = seq++;
    t.elements.reserve(entries.size());
    for (const auto& e : entries) t.elements.push_back({e.i, src(e.j), e.v});
    sort_elements(t.elements);
    out.tiles.push_back(std::move(t));
  };

  for (index_t bj = 0; bj < nb; ++bj) {
    const index_t lo = bounds[bj], hi = bounds[bj + 1];
    if (!inverses[bj].empty()) {
      const index_t s = hi - lo;
      Tile t;
      t.kind = TileKind::diaginv;
      t.row_begin = t.col_begin = lo;
      t.row_end = t.col_end = hi;
      t.seq = seq++;
      t.block.assign(tiling.order.begin() + lo, tiling.order.begin() + hi);
      t.elements.reserve(static_cast<std::size_t>(s) * (s + 1) / 2);
      for (index_t r = 0; r < s; ++r)
        for (index_t c = 0; c <= r; ++c) t.elements.push_back({n + t.block[r], t.block[c], inverses[bj][r * s + c]});
      sort_elements(t.elements);
      out.tiles.push_back(std::move(t));
    } else if (fallback[bj]) {
      // Column-by-column substitution inside the triangle.
      std::map<index_t, std::vector<Entry>> by_col;
      for (const auto& e : internal[bj]) by_col[pos[e.j]].push_back(e);
      for (auto& [pc, entries] : by_col) rect_tile(std::move(entries), TileKind::collist, pc + 1, hi, pc, pc + 1);
    }
    for (auto it = rects.lower_bound({bj, 0}); it != rects.end() && it->first.first == bj; ++it) {
      const index_t bi = it->first.second;
      std::vector<std::pair<index_t, index_t>> ij;
      for (const auto& e : it->second) ij.emplace_back(e.i, e.j);
      const bool level_cols = bj < tiling.n_level_blocks;
      const TileKind kind = level_cols && mapping_eligible(ij) ? TileKind::mapping : TileKind::collist;
      rect_tile(std::move(it->second), kind, bounds[bi], bounds[bi + 1], lo, hi);
    }
  }

  out.diag.kind = TileKind::diag_scale;
  out.diag.row_end = out.diag.col_end = n;
  for (index_t r = 0; r < n; ++r) out.diag.elements.push_back({r, src(r), dinv[r]});
  for (index_t j = 0; j < n; ++j)
    if (inverted[j]) out.triangle_columns.push_back(j);
  return out;
}

std::vector<Tile> merge_static(std::vector<Tile> tiles) {
  std::map<std::pair<index_t, index_t>, std::vector<std::size_t>> by_rows;
  for (std::size_t k = 0; k < tiles.size(); ++k)
    if (tiles[k].kind != TileKind::diag_scale) by_rows[{tiles[k].row_begin, tiles[k].row_end}].push_back(k);
  std::vector<bool> dead(tiles.size(), false);
  for (auto& [rows, idx] : by_rows) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return tiles[a].col_begin < tiles[b].col_begin; });
    std::size_t cur = idx[0];
    for (std::size_t k = 1; k < idx.size(); ++k) {
      Tile& a = tiles[cur];
      Tile& b = tiles[idx[k]];
      if (a.kind == TileKind::collist && b.kind == TileKind::collist) {
        a.elements.insert(a.elements.end(), b.elements.begin(), b.elements.end());
        a.col_begin = std::min(a.col_begin, b.col_begin);
        a.col_end = std::max(a.col_end, b.col_end);
        a.seq = std::max(a.seq, b.seq);
        dead[idx[k]] = true;
      } else {
        cur = idx[k];
      }
    }
  }
  std::vector<Tile> out;
  for (std::size_t k = 0; k < tiles.size(); ++k)
    if (!dead[k]) {
      sort_elements(tiles[k].elements);
      out.push_back(std::move(tiles[k]));
    }
  std::stable_sort(out.begin(), out.end(), [](const Tile& a, const Tile& b) { return a.seq < b.seq; });
  return out;
}

// ---------------------------------------------------------------- shards

namespace {

std::vector<index_t> unique_sorted(std::vector<index_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<index_t> tile_writes(const Tile& t) {
  std::vector<index_t> w;
  for (const auto& e : t.elements) w.push_back(e.out);
  return unique_sorted(std::move(w));
}

std::vector<index_t> tile_reads(const Tile& t) {
  std::vector<index_t> r;
  for (const auto& e : t.elements) r.push_back(e.in);
  return unique_sorted(std::move(r));
}

}  // namespace

std::vector<index_t> schedule_steps(std::span<const Tile> tiles, ShardPolicy policy) {
  const std::size_t nt = tiles.size();
  std::vector<index_t> step(nt, 0);
  if (nt == 0) return step;

  if (policy == ShardPolicy::static_asap) {
    // Footprints only: tiles are black boxes reading their column range and
    // writing their row range (a triangle reads and writes its block).
    for (std::size_t b = 0; b < nt; ++b) {
      const Tile& t = tiles[b];
      for (std::size_t a = 0; a < b; ++a) {
        const Tile& s = tiles[a];
        const bool raw = overlaps(s.row_begin, s.row_end, t.col_begin, t.col_end);
        const bool war = overlaps(s.col_begin, s.col_end, t.row_begin, t.row_end);
        const bool waw = overlaps(s.row_begin, s.row_end, t.row_begin, t.row_end);
        if (raw || war)
          step[b] = std::max(step[b], step[a] + 1);
        else if (waw)
          step[b] = std::max(step[b], step[a]);
      }
    }
    return step;
  }

  // Exact read/write sets, edges in program order.
  std::map<index_t, std::vector<index_t>> readers, writers;  // buffer index -> tiles, ascending
  std::vector<std::vector<index_t>> reads(nt), writes(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    reads[t] = tile_reads(tiles[t]);
    writes[t] = tile_writes(tiles[t]);
    for (index_t x : reads[t]) readers[x].push_back(static_cast<index_t>(t));
    for (index_t x : writes[t]) writers[x].push_back(static_cast<index_t>(t));
  }
  auto later = [](const std::vector<index_t>& v, index_t t) { return std::upper_bound(v.begin(), v.end(), t); };
  std::vector<index_t> height(nt, 0);
  for (std::size_t tt = nt; tt-- > 0;) {
    const auto t = static_cast<index_t>(tt);
    index_t h = 0;
    for (index_t x : writes[t]) {
      if (auto it = readers.find(x); it != readers.end())
        for (auto r = later(it->second, t); r != it->second.end(); ++r) h = std::max(h, height[*r] + 1);
      if (auto it = writers.find(x); it != writers.end())
        for (auto w = later(it->second, t); w != it->second.end(); ++w) h = std::max(h, height[*w]);
    }
    for (index_t x : reads[t])
      if (auto it = writers.find(x); it != writers.end())
        for (auto w = later(it->second, t); w != it->second.end(); ++w) h = std::max(h, height[*w] + 1);
    height[t] = h;
  }
  const index_t top = *std::max_element(height.begin(), height.end());
  for (std::size_t t = 0; t < nt; ++t) step[t] = top - height[t];
  return step;
}

std::vector<Shard> alap_merge(std::span<const Tile> tiles, ShardPolicy policy) {
  const auto step = schedule_steps(tiles, policy);
  std::vector<Shard> shards;
  if (tiles.empty()) return shards;
  const index_t n_steps = *std::max_element(step.begin(), step.end()) + 1;
  shards.resize(n_steps);
  for (std::size_t t = 0; t < tiles.size(); ++t) shards[step[t]].tiles.push_back(static_cast<index_t>(t));
  std::erase_if(shards, [](const Shard& s) { return s.tiles.empty(); });
  return shards;
}

void partition_intra_shard(Shard& shard, std::span<const Tile> tiles, int n_workers, bool snap) {
  if (n_workers < 1) throw Error(ErrorCode::invalid_argument, "partition: need at least one worker");
  shard.work.assign(n_workers, {});
  shard.reductions.clear();
  shard.n_slots = 0;
  shard.barriers_after = 1;

  struct Run {
    index_t out, tile, begin, end;
  };
  std::vector<Run> runs;
  for (index_t t : shard.tiles) {
    const auto& e = tiles[t].elements;
    for (index_t k = 0; k < static_cast<index_t>(e.size());) {
      index_t m = k;
      while (m < static_cast<index_t>(e.size()) && e[m].out == e[k].out) ++m;
      runs.push_back({e[k].out, t, k, m});
      k = m;
    }
  }
  std::stable_sort(runs.begin(), runs.end(), [](const Run& a, const Run& b) { return a.out < b.out; });
  if (runs.empty()) return;

  // Output groups: consecutive runs with equal out.
  std::vector<std::size_t> group_first;
  for (std::size_t r = 0; r < runs.size(); ++r)
    if (r == 0 || runs[r].out != runs[r - 1].out) group_first.push_back(r);
  const std::size_t G = group_first.size();
  std::vector<index_t> prefix(G + 1, 0);  // elements before each group
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t r_end = g + 1 < G ? group_first[g + 1] : runs.size();
    index_t w = 0;
    for (std::size_t r = group_first[g]; r < r_end; ++r) w += runs[r].end - runs[r].begin;
    prefix[g + 1] = prefix[g] + w;
  }
  const index_t total = prefix[G];
  const index_t W = n_workers;

  auto push_item = [&](int worker, const WorkItem& it) {
    auto& list = shard.work[worker];
    if (it.slot < 0 && !list.empty() && list.back().slot < 0 && list.back().tile == it.tile &&
        list.back().end == it.begin) {
      list.back().end = it.end;
      return;
    }
    list.push_back(it);
  };

  if (snap) {
    std::vector<std::size_t> cut{0};
    for (index_t k = 1; k < W; ++k) {
      const double target = static_cast<double>(total) * k / W;
      std::size_t g = std::lower_bound(prefix.begin() + cut.back(), prefix.end(), static_cast<index_t>(std::ceil(target))) -
                      prefix.begin();
      if (g > G) g = G;
      if (g > cut.back() && std::abs(prefix[g - 1] - target) <= std::abs(prefix[g] - target)) --g;
      cut.push_back(std::max(g, cut.back()));
    }
    cut.push_back(G);
    index_t lo = total, hi = 0;
    for (index_t k = 0; k < W; ++k) {
      const index_t load = prefix[cut[k + 1]] - prefix[cut[k]];
      lo = std::min(lo, load);
      hi = std::max(hi, load);
    }
    if (total < 4 * W || (lo > 0 && hi <= 1.5 * lo)) {
      for (index_t k = 0; k < W; ++k)
        for (std::size_t g = cut[k]; g < cut[k + 1]; ++g) {
          const std::size_t r_end = g + 1 < G ? group_first[g + 1] : runs.size();
          for (std::size_t r = group_first[g]; r < r_end; ++r)
            push_item(static_cast<int>(k), {runs[r].tile, runs[r].begin, runs[r].end, -1});
        }
      return;
    }
  }

  // Element-exact split; outputs straddling a cut are reduced in phase two.
  std::vector<index_t> cuts(W + 1);
  for (index_t k = 0; k <= W; ++k) cuts[k] = static_cast<index_t>((static_cast<long long>(total) * k) / W);
  auto worker_of = [&](index_t offset) {
    return static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), offset) - cuts.begin()) - 1;
  };
  for (std::size_t g = 0; g < G; ++g) {
    const index_t g0 = prefix[g], g1 = prefix[g + 1];
    const bool shared = worker_of(g0) != worker_of(g1 - 1);
    const std::size_t r_end = g + 1 < G ? group_first[g + 1] : runs.size();
    Reduction red;
    red.slot_begin = shard.n_slots;
    index_t offset = g0;
    for (std::size_t r = group_first[g]; r < r_end; ++r) {
      const Run& run = runs[r];
      index_t k = run.begin;
      while (k < run.end) {
        const int w = worker_of(offset);
        const index_t take = std::min<index_t>(run.end - k, cuts[w + 1] - offset);
        if (shared) {
          shard.work[w].push_back({run.tile, k, k + take, shard.n_slots++});
        } else {
          push_item(w, {run.tile, k, k + take, -1});
        }
        k += take;
        offset += take;
      }
    }
    if (shared) {
      red.out = runs[group_first[g]].out;
      red.assign = tiles[runs[group_first[g]].tile].assigns();
      red.worker = static_cast<index_t>(shard.reductions.size() % W);
      red.slot_end = shard.n_slots;
      shard.reductions.push_back(red);
    }
  }
  if (!shard.reductions.empty()) shard.barriers_after = 2;
}

// ---------------------------------------------------------------- schedule

Tile transpose_tile(const Tile& t, index_t n, std::span<const std::uint8_t> inverted) {
  Tile b = t;
  std::swap(b.row_begin, b.col_begin);
  std::swap(b.row_end, b.col_end);
  if (t.kind == TileKind::diag_scale) return b;
  for (auto& e : b.elements) {
    if (t.kind == TileKind::diaginv) {
      const index_t r = e.out - n, c = e.in;
      e.out = n + c;
      e.in = r;
    } else {
      const index_t i = e.out;
      const index_t j = e.in >= n ? e.in - n : e.in;
      e.out = j;
      e.in = inverted[i] ? n + i : i;
    }
  }
  sort_elements(b.elements);
  return b;
}

index_t Schedule::slots_needed() const {
  index_t m = diag_shard.n_slots;
  for (const auto& s : fe_shards) m = std::max(m, s.n_slots);
  for (const auto& s : bs_shards) m = std::max(m, s.n_slots);
  return m;
}

namespace {

Schedule finish(ScheduleKind kind, index_t n, index_t nnz_l, int n_workers, std::vector<Tile> fe_tiles, Tile diag,
                std::vector<index_t> commit, const std::vector<std::vector<index_t>>& fe_groups, bool snap) {
  Schedule s;
  s.kind = kind;
  s.n = n;
  s.n_workers = n_workers;
  s.commit = std::move(commit);
  std::vector<std::uint8_t> inverted(n, 0);
  for (index_t c : s.commit) inverted[c] = 1;

  s.fe_tiles = std::move(fe_tiles);
  for (const auto& t : s.fe_tiles) s.bs_tiles.push_back(transpose_tile(t, n, inverted));
  s.diag_tiles.push_back(std::move(diag));

  for (const auto& g : fe_groups) {
    Shard sh;
    sh.tiles = g;
    partition_intra_shard(sh, s.fe_tiles, n_workers, snap);
    s.fe_shards.push_back(std::move(sh));
  }
  for (auto it = fe_groups.rbegin(); it != fe_groups.rend(); ++it) {
    Shard sh;
    sh.tiles = *it;
    partition_intra_shard(sh, s.bs_tiles, n_workers, snap);
    s.bs_shards.push_back(std::move(sh));
  }
  s.diag_shard.tiles = {0};
  partition_intra_shard(s.diag_shard, s.diag_tiles, n_workers, snap);

  auto& m = s.metrics;
  m.nnz_l = nnz_l;
  m.worker_nnz.assign(n_workers, 0);
  auto account = [&](const std::vector<Shard>& shards) {
    for (const auto& sh : shards) {
      m.sync_count += sh.barriers_after;
      m.reductions += static_cast<index_t>(sh.reductions.size());
      for (int w = 0; w < n_workers; ++w)
        for (const auto& it : sh.work[w]) m.worker_nnz[w] += it.end - it.begin;
    }
  };
  account(s.fe_shards);
  account({s.diag_shard});
  account(s.bs_shards);
  m.shard_count = static_cast<index_t>(s.fe_shards.size() + s.bs_shards.size() + 1);
  m.sl = m.sync_count > 0 ? static_cast<double>(nnz_l) / m.sync_count : 0.0;
  return s;
}

std::vector<std::vector<index_t>> groups_of(const std::vector<Shard>& shards) {
  std::vector<std::vector<index_t>> g;
  for (const auto& s : shards) g.push_back(s.tiles);
  return g;
}

Tile plain_diag(std::span<const double> dinv) {
  Tile d;
  d.kind = TileKind::diag_scale;
  const auto n = static_cast<index_t>(dinv.size());
  d.row_end = d.col_end = n;
  for (index_t r = 0; r < n; ++r) d.elements.push_back({r, r, dinv[r]});
  return d;
}

Tile column_tile(const SparseCSC<double>& L, std::span<const index_t> cols, index_t seq) {
  Tile t;
  t.kind = TileKind::collist;
  t.seq = seq;
  for (index_t j : cols) {
    const auto rows = L.col_rows(j);
    const auto vals = L.col_values(j);
    for (std::size_t k = 0; k < rows.size(); ++k) t.elements.push_back({rows[k], j, vals[k]});
  }
  sort_elements(t.elements);
  return t;
}

}  // namespace

Schedule build_schedule(const SparseCSC<double>& L, std::span<const double> dinv, int n_workers,
                        const HyptOptions& opt) {
  require_strictly_lower(L, "build_schedule");
  const index_t n = L.cols();
  if (static_cast<index_t>(dinv.size()) != n) throw DimensionError("build_schedule: dinv length");
  if (n_workers < 1) throw Error(ErrorCode::invalid_argument, "build_schedule: need at least one worker");

  if (opt.kind == ScheduleKind::naive_column) {
    std::vector<Tile> tiles;
    std::vector<std::vector<index_t>> groups;
    for (index_t j = 0; j < n; ++j) {
      if (L.col_rows(j).empty()) continue;
      const index_t c[1] = {j};
      tiles.push_back(column_tile(L, c, j));
      tiles.back().row_begin = j + 1;
      tiles.back().row_end = n;
      tiles.back().col_begin = j;
      tiles.back().col_end = j + 1;
      groups.push_back({static_cast<index_t>(tiles.size()) - 1});
    }
    auto s = finish(opt.kind, n, L.nnz(), n_workers, std::move(tiles), plain_diag(dinv), {}, groups, false);
    s.metrics.total_levels = level_schedule(L).total_levels;
    return s;
  }

  const auto full = level_schedule(L);
  if (opt.kind == ScheduleKind::naive_level) {
    std::vector<Tile> tiles;
    std::vector<std::vector<index_t>> groups;
    for (std::size_t k = 0; k < full.levels.size(); ++k) {
      Tile t = column_tile(L, full.levels[k], static_cast<index_t>(k));
      if (t.elements.empty()) continue;
      tiles.push_back(std::move(t));
      groups.push_back({static_cast<index_t>(tiles.size()) - 1});
    }
    auto s = finish(opt.kind, n, L.nnz(), n_workers, std::move(tiles), plain_diag(dinv), {}, groups, true);
    s.metrics.kept_levels = s.metrics.total_levels = full.total_levels;
    return s;
  }

  const index_t threshold = opt.level_threshold > 0 ? opt.level_threshold : 2 * n_workers;
  const auto part = partial_level_select(full, threshold);

  Tiling tiling;
  tiling.bounds.push_back(0);
  for (const auto& lv : part.levels) {
    tiling.order.insert(tiling.order.end(), lv.begin(), lv.end());
    tiling.bounds.push_back(static_cast<index_t>(tiling.order.size()));
  }
  tiling.n_level_blocks = static_cast<index_t>(part.levels.size());
  const index_t r0 = static_cast<index_t>(tiling.order.size());
  tiling.order.insert(tiling.order.end(), part.remainder.begin(), part.remainder.end());
  if (r0 < n) {
    std::vector<index_t> rpos(n, -1);
    for (index_t p = r0; p < n; ++p) rpos[tiling.order[p]] = p - r0;
    std::vector<Triplet<double>> entries;
    for (index_t j : part.remainder)
      for (index_t i : L.col_rows(j))
        if (rpos[i] >= 0) entries.push_back({rpos[i], rpos[j], 1.0});
    const auto region = SparseCSC<double>::from_triplets(n - r0, n - r0, entries);
    TilingOptions topt;
    topt.max_size = opt.max_tile > 0 ? opt.max_tile : 4 * n_workers;
    topt.max_depth = opt.max_depth;
    for (index_t c : graph_tile(region, topt)) tiling.bounds.push_back(r0 + c);
    tiling.bounds.push_back(n);
  }
  if (n == 0) tiling.bounds = {0, 0};

  auto ka = assign_kernels(L, dinv, tiling, opt.invert_limit);
  const auto before = static_cast<index_t>(ka.tiles.size());
  auto merged = merge_static(std::move(ka.tiles));
  const auto after = static_cast<index_t>(merged.size());

  const auto static_groups = groups_of(alap_merge(merged, ShardPolicy::static_asap));
  const auto alap_groups = groups_of(alap_merge(merged, ShardPolicy::alap));

  auto stat = finish(opt.kind, n, L.nnz(), n_workers, merged, ka.diag, ka.triangle_columns, static_groups, true);
  auto alap = finish(opt.kind, n, L.nnz(), n_workers, std::move(merged), std::move(ka.diag),
                     std::move(ka.triangle_columns), alap_groups, true);
  // Late placement can pile heavy outputs into one shard and force a
  // reduction barrier; keep the static grouping when that costs more.
  const bool fallback = opt.policy == ShardPolicy::alap && alap.metrics.sync_count > stat.metrics.sync_count;
  const index_t alap_shards = alap.metrics.shard_count, alap_syncs = alap.metrics.sync_count;
  const index_t static_shards = stat.metrics.shard_count, static_syncs = stat.metrics.sync_count;
  Schedule s = opt.policy == ShardPolicy::static_asap || fallback ? std::move(stat) : std::move(alap);
  auto& m = s.metrics;
  m.alap_shard_count = alap_shards;
  m.alap_sync_count = alap_syncs;
  m.alap_fallback = fallback;
  m.kept_levels = static_cast<index_t>(part.levels.size());
  m.total_levels = full.total_levels;
  m.tiles_before_merge = before;
  m.tiles_after_merge = after;
  m.static_shard_count = static_shards;
  m.static_sync_count = static_syncs;
  m.diaginv_fallbacks = ka.fallbacks;
  return s;
}

// ---------------------------------------------------------------- checks

template <typename T>
void interpret(const Schedule& s, std::span<T> x) {
  const index_t n = s.n;
  if (static_cast<index_t>(x.size()) != n) throw DimensionError("interpret: rhs length");
  std::vector<T> buf(2 * static_cast<std::size_t>(n), T(0));
  std::copy(x.begin(), x.end(), buf.begin());
  std::vector<T> slots(std::max<index_t>(s.slots_needed(), 1));
  auto stage = [&](const std::vector<Shard>& shards, const std::vector<Tile>& tiles) {
    for (const auto& sh : shards) {
      for (const auto& items : sh.work)
        for (const auto& it : items) {
          const Tile& tile = tiles[it.tile];
          detail::run_item(tile, it, [&](index_t k) { return static_cast<T>(tile.elements[k].value); }, buf.data(),
                           slots.data());
        }
      for (const auto& r : sh.reductions) detail::run_reduction(r, buf.data(), slots.data());
    }
  };
  stage(s.fe_shards, s.fe_tiles);
  stage({s.diag_shard}, s.diag_tiles);
  stage(s.bs_shards, s.bs_tiles);
  for (index_t c : s.commit) buf[c] = buf[n + c];
  std::copy(buf.begin(), buf.begin() + n, x.begin());
}

template void interpret(const Schedule&, std::span<float>);
template void interpret(const Schedule&, std::span<double>);

std::vector<std::string> audit_schedule(const Schedule& s) {
  std::vector<std::string> findings;
  const index_t n2 = 2 * s.n;
  auto stage = [&](const std::vector<Shard>& shards, const std::vector<Tile>& tiles, const char* name) {
    std::vector<index_t> last_write(n2, -1);
    std::vector<int> seen(tiles.size(), 0);
    for (std::size_t k = 0; k < shards.size(); ++k) {
      const auto& sh = shards[k];
      const std::string where = std::string(name) + " shard " + std::to_string(k);
      if (static_cast<int>(sh.work.size()) != s.n_workers) findings.push_back(where + ": worker count");
      std::vector<index_t> owner(n2, -1);
      for (index_t t : sh.tiles) {
        if (t < 0 || t >= static_cast<index_t>(tiles.size())) {
          findings.push_back(where + ": tile out of range");
          return;
        }
        ++seen[t];
      }
      std::map<index_t, index_t> elems_seen;  // tile -> covered count
      for (std::size_t w = 0; w < sh.work.size(); ++w)
        for (const auto& it : sh.work[w]) {
          elems_seen[it.tile] += it.end - it.begin;
          if (it.slot >= 0) continue;
          for (index_t e = it.begin; e < it.end; ++e) {
            const index_t out = tiles[it.tile].elements[e].out;
            if (owner[out] >= 0 && owner[out] != static_cast<index_t>(w))
              findings.push_back(where + ": output " + std::to_string(out) + " written by two workers");
            owner[out] = static_cast<index_t>(w);
          }
        }
      for (const auto& r : sh.reductions) {
        if (owner[r.out] >= 0) findings.push_back(where + ": reduced output also written in phase one");
        owner[r.out] = r.worker;
      }
      for (index_t t : sh.tiles)
        if (elems_seen[t] != static_cast<index_t>(tiles[t].elements.size()))
          findings.push_back(where + ": tile " + std::to_string(t) + " not fully covered");
      for (index_t t : sh.tiles)
        for (const auto& e : tiles[t].elements) {
          if (e.in == e.out) continue;
          if (owner[e.in] >= 0) findings.push_back(where + ": reads " + std::to_string(e.in) + " written in the same shard");
          else if (last_write[e.in] >= static_cast<index_t>(k))
            findings.push_back(where + ": read of " + std::to_string(e.in) + " before its last write");
        }
      for (index_t x = 0; x < n2; ++x)
        if (owner[x] >= 0) last_write[x] = static_cast<index_t>(k);
    }
    for (std::size_t t = 0; t < tiles.size(); ++t)
      if (seen[t] != 1) findings.push_back(std::string(name) + ": tile " + std::to_string(t) + " scheduled " +
                                           std::to_string(seen[t]) + " times");
    // Every read must follow all writes of that index: recheck with final
    // write positions.
    std::vector<index_t> final_write(n2, -1);
    for (std::size_t k = 0; k < shards.size(); ++k)
      for (index_t t : shards[k].tiles)
        for (const auto& e : tiles[t].elements) final_write[e.out] = static_cast<index_t>(k);
    for (std::size_t k = 0; k < shards.size(); ++k)
      for (index_t t : shards[k].tiles)
        for (const auto& e : tiles[t].elements)
          if (e.in != e.out && final_write[e.in] >= static_cast<index_t>(k))
            findings.push_back(std::string(name) + " shard " + std::to_string(k) + ": read of " + std::to_string(e.in) +
                               " precedes a later write");
  };
  stage(s.fe_shards, s.fe_tiles, "fe");
  stage({s.diag_shard}, s.diag_tiles, "diag");
  stage(s.bs_shards, s.bs_tiles, "bs");
  std::sort(findings.begin(), findings.end());
  findings.erase(std::unique(findings.begin(), findings.end()), findings.end());
  return findings;
}

template <typename T>
double chain_relative_error(const SparseCSC<double>& L, std::span<const double> dinv, std::span<const double> b,
                            std::span<const T> got) {
  const index_t n = L.cols();
  if (static_cast<index_t>(b.size()) != n || static_cast<index_t>(got.size()) != n ||
      static_cast<index_t>(dinv.size()) != n)
    throw DimensionError("chain_relative_error: length mismatch");
  const auto Lt = L.cast<T>();
  const std::vector<T> dt(dinv.begin(), dinv.end());
  std::vector<T> ref(b.begin(), b.end());
  auto inf_norm = [](const auto& v) {
    double m = 0.0;
    for (auto x : v) m = std::max(m, std::abs(static_cast<double>(x)));
    return m;
  };
  double scale = inf_norm(ref);
  sptrsv_fe_inplace<T>(Lt, ref);
  scale = std::max(scale, inf_norm(ref));
  diag_scale_inplace<T>(dt, ref);
  scale = std::max(scale, inf_norm(ref));
  sptrsv_bs_inplace<T>(Lt, ref);
  scale = std::max(scale, inf_norm(ref));
  double err = 0.0;
  for (index_t i = 0; i < n; ++i)
    err = std::max(err, std::abs(static_cast<double>(got[i]) - static_cast<double>(ref[i])));
  if (!std::isfinite(err)) return std::numeric_limits<double>::infinity();
  return scale > 0.0 ? err / scale : err;
}

template double chain_relative_error(const SparseCSC<double>&, std::span<const double>, std::span<const double>,
                                     std::span<const float>);
template double chain_relative_error(const SparseCSC<double>&, std::span<const double>, std::span<const double>,
                                     std::span<const double>);

VerifyReport verify_schedule(const Schedule& s, const SparseCSC<double>& L, std::span<const double> dinv, int trials,
                             std::uint64_t seed) {
  VerifyReport rep;
  rep.trials = trials;
  rep.findings = audit_schedule(s);
  const index_t n = L.cols();
  if (n != s.n || static_cast<index_t>(dinv.size()) != n) throw DimensionError("verify_schedule: size mismatch");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < trials; ++t) {
    std::vector<double> b(n);
    // Every fourth trial uses a +-1 right-hand side.
    for (auto& v : b) v = t % 4 == 3 ? (u(rng) < 0 ? -1.0 : 1.0) : u(rng);
    std::vector<double> got = b;
    interpret<double>(s, got);
    rep.max_rel_error_64 = std::max(rep.max_rel_error_64, chain_relative_error<double>(L, dinv, b, got));
    std::vector<float> gotf(b.begin(), b.end());
    interpret<float>(s, gotf);
    rep.max_rel_error_32 = std::max(rep.max_rel_error_32, chain_relative_error<float>(L, dinv, b, gotf));
  }
  rep.passed = rep.findings.empty() && rep.max_rel_error_64 <= 1e-12 && rep.max_rel_error_32 <= 1e-6;
  return rep;
}

}  // namespace parspl
