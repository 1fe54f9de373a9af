#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "parspl/ldl.hpp"
#include "parspl/sparse.hpp"

namespace parspl {

// Work buffer layout used by schedules: entries [0, n) hold the running
// right-hand side (and the final value of every column that is not inside an
// inverted triangle); entries [n, 2n) receive the output of Diaginv tiles.

struct LevelSchedule {
  // Kept levels, each in ascending column order.
  std::vector<std::vector<index_t>> levels;
  // Columns of the discarded levels, ascending.
  std::vector<index_t> remainder;
  // Index of the first discarded level.
  index_t cutoff_level = 0;
  index_t total_levels = 0;
};

/// ASAP level of every column of a strictly lower triangular L.
std::vector<index_t> column_levels(const SparseCSC<double>& L);

/// Full level schedule; every level kept.
LevelSchedule level_schedule(const SparseCSC<double>& L);

/// Keeps the longest prefix of levels with at least threshold columns.
LevelSchedule partial_level_select(const LevelSchedule& full, index_t threshold);

/// Cheapest boundary b in (lo, hi) splitting [lo, hi) into [lo, b) and [b, hi)
/// by min cut between lo and hi-1. Edge (i, j) for every stored l_ij inside
/// the range, capacity 1/(i-j)^2. Ties go to the earliest boundary.
index_t min_cut_boundary(const SparseCSC<double>& region, index_t lo, index_t hi,
                         double* cut_cost = nullptr);

struct TilingOptions {
  index_t max_size = 32;
  int max_depth = 8;
};

/// Recursive bisection of a square strictly lower region. Returns the sorted
/// interior block boundaries.
std::vector<index_t> graph_tile(const SparseCSC<double>& region, const TilingOptions& opt);

enum class TileKind : std::uint8_t { mapping, diaginv, collist, diag_scale };
const char* to_string(TileKind k) noexcept;

/// One multiply: buf[out] takes value * buf[in].
struct TileElement {
  index_t out;
  index_t in;
  double value;

  friend bool operator==(const TileElement&, const TileElement&) = default;
};

struct Tile {
  TileKind kind = TileKind::collist;
  // Footprint in level-ordered positions, half-open.
  index_t row_begin = 0, row_end = 0, col_begin = 0, col_end = 0;
  // Diaginv: columns of the triangle in order; the inverse is stored as
  // dense lower elements (out = n + block[r], in = block[c], c <= r).
  std::vector<index_t> block;
  // Sorted by (out, in).
  std::vector<TileElement> elements;
  // Position in the sequential program; used for ordering only.
  index_t seq = 0;

  // Diaginv and DiagScale overwrite their output; the others subtract.
  [[nodiscard]] bool assigns() const noexcept {
    return kind == TileKind::diaginv || kind == TileKind::diag_scale;
  }
};

/// True when every row and every column holds at most one element.
bool mapping_eligible(std::span<const std::pair<index_t, index_t>> entries);

/// Dense inverse of a unit lower triangular matrix, row-major s x s. Only
/// the strictly lower part of l is read.
std::vector<double> invert_unit_lower(std::span<const double> l, index_t s);

/// Level-ordered layout: position p holds factor column order[p]. bounds
/// delimit blocks; the first n_level_blocks are kept levels.
struct Tiling {
  std::vector<index_t> order;
  std::vector<index_t> bounds;
  index_t n_level_blocks = 0;
};

struct KernelAssignment {
  std::vector<Tile> tiles;  // forward orientation, sequential program order
  Tile diag;
  std::vector<index_t> triangle_columns;  // ascending
  index_t fallbacks = 0;
};

KernelAssignment assign_kernels(const SparseCSC<double>& L, std::span<const double> dinv,
                                const Tiling& tiling, double invert_limit = 1e8);

/// Merges Collist tiles with equal row ranges that are neighbours in column
/// order. Result is in sequential program order.
std::vector<Tile> merge_static(std::vector<Tile> tiles);

struct WorkItem {
  index_t tile = 0;
  index_t begin = 0, end = 0;  // element range of the tile
  index_t slot = -1;           // >= 0: partial sum of a shared output
};

// Phase-two combine of a shared output.
struct Reduction {
  index_t out = 0;
  bool assign = false;
  index_t worker = 0;
  index_t slot_begin = 0, slot_end = 0;
};

struct Shard {
  std::vector<index_t> tiles;
  std::vector<std::vector<WorkItem>> work;  // per worker
  std::vector<Reduction> reductions;
  index_t n_slots = 0;
  int barriers_after = 1;
};

enum class ShardPolicy { alap, static_asap };

/// Scheduling step of each tile (tiles in sequential program order). With
/// alap, dependencies come from element indices and tiles are placed as late
/// as possible; static_asap uses footprints and places tiles early.
std::vector<index_t> schedule_steps(std::span<const Tile> tiles, ShardPolicy policy);

/// Groups tiles by step into shards, in step order.
std::vector<Shard> alap_merge(std::span<const Tile> tiles, ShardPolicy policy = ShardPolicy::alap);

/// Splits the shard's elements over workers by output ownership. With snap,
/// splits fall on output boundaries when the load ratio stays <= 1.5 (or the
/// shard is small); otherwise shared outputs are reduced in a second phase.
void partition_intra_shard(Shard& shard, std::span<const Tile> tiles, int n_workers, bool snap = true);

enum class ScheduleKind { parspl, naive_level, naive_column };
const char* to_string(ScheduleKind k) noexcept;

struct ScheduleMetrics {
  index_t sync_count = 0;
  double sl = 0.0;
  std::vector<index_t> worker_nnz;
  index_t nnz_l = 0;
  index_t shard_count = 0;
  index_t kept_levels = 0;
  index_t total_levels = 0;
  index_t tiles_before_merge = 0;
  index_t tiles_after_merge = 0;
  index_t static_shard_count = 0;
  index_t static_sync_count = 0;
  // The ALAP grouping, whether or not it was kept.
  index_t alap_shard_count = 0;
  index_t alap_sync_count = 0;
  bool alap_fallback = false;
  index_t diaginv_fallbacks = 0;
  index_t reductions = 0;
};

struct Schedule {
  ScheduleKind kind = ScheduleKind::parspl;
  index_t n = 0;
  int n_workers = 1;
  std::vector<Tile> fe_tiles, bs_tiles;
  std::vector<Tile> diag_tiles;  // a single DiagScale tile
  std::vector<Shard> fe_shards, bs_shards;
  Shard diag_shard;
  // Inverted columns; copied from the output half after the last barrier.
  std::vector<index_t> commit;
  ScheduleMetrics metrics;

  [[nodiscard]] index_t slots_needed() const;
};

struct HyptOptions {
  ScheduleKind kind = ScheduleKind::parspl;
  index_t level_threshold = 0;  // 0: 2 * n_workers
  index_t max_tile = 0;         // 0: 4 * n_workers
  int max_depth = 8;
  double invert_limit = 1e8;
  ShardPolicy policy = ShardPolicy::alap;
};

/// Full pipeline: levels, tiling, kernels, static merge, shard scheduling and
/// partition for FE; BS mirrors the FE shards with transposed tiles. The alap
/// policy keeps the static grouping if ALAP would need more barriers.
Schedule build_schedule(const SparseCSC<double>& L, std::span<const double> dinv, int n_workers,
                        const HyptOptions& opt = {});

template <typename T>
Schedule build_schedule(const LdlFactor<T>& f, int n_workers, const HyptOptions& opt = {}) {
  const auto L = f.L.template cast<double>();
  const std::vector<double> dinv(f.dinv.begin(), f.dinv.end());
  return build_schedule(L, dinv, n_workers, opt);
}

/// Transposed (backward) variant of a forward tile.
Tile transpose_tile(const Tile& t, index_t n, std::span<const std::uint8_t> inverted);

namespace detail {

// Runs one work item. Shared by the sequential interpreter and the executor
// so that both produce identical bits.
template <typename T, typename Value>
inline void run_item(const Tile& tile, const WorkItem& item, Value&& value, T* buf, T* slots) {
  const TileElement* e = tile.elements.data();
  index_t k = item.begin;
  const bool assign = tile.assigns();
  while (k < item.end) {
    const index_t out = e[k].out;
    T acc = T(0);
    for (; k < item.end && e[k].out == out; ++k) acc += value(k) * buf[e[k].in];
    if (item.slot >= 0)
      slots[item.slot] = acc;
    else if (assign)
      buf[out] = acc;
    else
      buf[out] -= acc;
  }
}

template <typename T>
inline void run_reduction(const Reduction& r, T* buf, const T* slots) {
  T acc = T(0);
  for (index_t s = r.slot_begin; s < r.slot_end; ++s) acc += slots[s];
  if (r.assign)
    buf[r.out] = acc;
  else
    buf[r.out] -= acc;
}

}  // namespace detail

/// Executes the schedule one worker after another. x holds the permuted
/// right-hand side on entry and the permuted solution on exit.
template <typename T>
void interpret(const Schedule& s, std::span<T> x);

/// Structural audit: per-phase write ownership, in-phase read/write hazards,
/// and read-after-final-write ordering across shards. Empty when clean.
std::vector<std::string> audit_schedule(const Schedule& s);

/// Error of a solve against the sequential kernels run in precision T,
/// relative to the largest magnitude along the reference chain (right-hand
/// side, FE output, scaled vector, solution). KKT factors cancel heavily in
/// BS, so the solution norm alone is not a usable scale.
template <typename T>
double chain_relative_error(const SparseCSC<double>& L, std::span<const double> dinv, std::span<const double> b,
                            std::span<const T> got);

struct VerifyReport {
  int trials = 0;
  double max_rel_error_64 = 0.0;
  double max_rel_error_32 = 0.0;
  std::vector<std::string> findings;
  bool passed = false;
};

/// Compares interpret() with the reference FE/diag/BS on random right-hand
/// sides: 1e-12 relative in double, 1e-6 in float.
VerifyReport verify_schedule(const Schedule& s, const SparseCSC<double>& L, std::span<const double> dinv,
                             int trials, std::uint64_t seed = 1);

}  // namespace parspl
