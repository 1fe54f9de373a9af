#include "parspl/executor.hpp"

#include <algorithm>
#include <atomic>
#include <barrier>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>

namespace parspl {

// ---------------------------------------------------------------- pool

WorkerPool::WorkerPool(int n_workers) : n_(n_workers) {
  if (n_workers < 1) throw Error(ErrorCode::invalid_argument, "pool: need at least one worker");
  for (int w = 1; w < n_; ++w) threads_.emplace_back([this, w](std::stop_token st) { loop(w, st); });
}

WorkerPool::~WorkerPool() {
  for (auto& t : threads_) t.request_stop();
  start_cv_.notify_all();
}

void WorkerPool::loop(int w, std::stop_token st) {
  std::uint64_t seen = 0;
  for (;;) {
    const std::function<void(int)>* job = nullptr;
    {
      std::unique_lock lock(m_);
      if (!start_cv_.wait(lock, st, [&] { return generation_ != seen; })) return;
      seen = generation_;
      job = job_;
    }
    std::exception_ptr err;
    try {
      (*job)(w);
    } catch (...) {
      err = std::current_exception();
    }
    std::lock_guard lock(m_);
    if (err && !error_) error_ = err;
    if (--pending_ == 0) done_cv_.notify_one();
  }
}

void WorkerPool::run(const std::function<void(int)>& job) {
  {
    std::lock_guard lock(m_);
    job_ = &job;
    error_ = nullptr;
    pending_ = n_ - 1;
    ++generation_;
  }
  start_cv_.notify_all();
  std::exception_ptr err;
  try {
    job(0);
  } catch (...) {
    err = std::current_exception();
  }
  std::unique_lock lock(m_);
  done_cv_.wait(lock, [&] { return pending_ == 0; });
  job_ = nullptr;
  if (!err) err = error_;
  if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------- cost

void CostModelParams::validate() const {
  if (!(cycles_per_mac_streamed >= 1.0) || !(cycles_per_mac_plain >= 1.0) || !(cycles_per_index_load >= 1.0))
    throw Error(ErrorCode::invalid_argument, "cost model: per-operation cycles must be >= 1");
  if (!(barrier_overhead_cycles >= 0.0)) throw Error(ErrorCode::invalid_argument, "cost model: negative overhead");
}

index_t index_loads(TileKind k) noexcept {
  switch (k) {
    case TileKind::mapping: return 2;
    case TileKind::collist: return 1;
    case TileKind::diaginv:
    case TileKind::diag_scale: return 0;
  }
  return 0;
}

namespace {

template <typename F>
void for_each_stage(const Schedule& s, F&& f) {
  f(s.fe_shards, s.fe_tiles);
  if (!s.diag_shard.tiles.empty()) f(std::vector<Shard>{s.diag_shard}, s.diag_tiles);
  f(s.bs_shards, s.bs_tiles);
}

}  // namespace

CostReport model_cost(const Schedule& s, const CostModelParams& p) {
  p.validate();
  CostReport r;
  const int W = s.n_workers;
  r.per_worker_mac_ops.assign(W, 0);
  r.per_worker_load_ops.assign(W, 0);
  const double c_mac = p.streaming_enabled ? p.cycles_per_mac_streamed : p.cycles_per_mac_plain;
  const double c_load = p.streaming_enabled ? 0.0 : p.cycles_per_index_load;
  double busy = 0.0;
  bool any_work = false;
  for_each_stage(s, [&](const std::vector<Shard>& shards, const std::vector<Tile>& tiles) {
    for (const auto& sh : shards) {
      double slowest = 0.0;
      for (int w = 0; w < W; ++w) {
        index_t macs = 0, loads = 0;
        for (const auto& it : sh.work[w]) {
          macs += it.end - it.begin;
          loads += (it.end - it.begin) * index_loads(tiles[it.tile].kind);
        }
        r.per_worker_mac_ops[w] += macs;
        r.per_worker_load_ops[w] += loads;
        slowest = std::max(slowest, macs * c_mac + loads * c_load);
        any_work |= macs > 0;
      }
      busy += slowest;
      if (!sh.reductions.empty()) {
        std::vector<index_t> adds(W, 0);
        for (const auto& red : sh.reductions) adds[red.worker] += red.slot_end - red.slot_begin;
        for (int w = 0; w < W; ++w) r.per_worker_mac_ops[w] += adds[w];
        busy += *std::max_element(adds.begin(), adds.end()) * c_mac;
      }
      r.barrier_count += sh.barriers_after;
    }
  });
  if (!any_work) return CostReport{0, r.per_worker_mac_ops, r.per_worker_load_ops, 0.0, 0.0};
  r.modeled_cycles = busy + r.barrier_count * p.barrier_overhead_cycles;
  const double mac_cycles = std::accumulate(r.per_worker_mac_ops.begin(), r.per_worker_mac_ops.end(), 0.0) * c_mac;
  r.modeled_utilization = r.modeled_cycles > 0.0 ? mac_cycles / (W * r.modeled_cycles) : 0.0;
  return r;
}

double sequential_cost(const SparseCSC<double>& L, const CostModelParams& p) {
  p.validate();
  return 2.0 * L.nnz() * (p.cycles_per_mac_plain + p.cycles_per_index_load) +
         static_cast<double>(L.cols()) * p.cycles_per_mac_plain;
}

void write_trace_csv(std::ostream& out, const ExecutionTrace& t) {
  out << "key,value\n";
  out << "barrier_count," << t.barrier_count << '\n';
  out << "modeled_cycles," << t.modeled_cycles << '\n';
  out << "modeled_utilization," << t.modeled_utilization << '\n';
  out << "wall_time_s," << t.wall_time << '\n';
  out << "audit_findings," << t.audit_findings.size() << '\n';
  for (std::size_t w = 0; w < t.per_worker_mac_ops.size(); ++w) {
    out << "worker" << w << "_mac_ops," << t.per_worker_mac_ops[w] << '\n';
    out << "worker" << w << "_load_ops," << t.per_worker_load_ops[w] << '\n';
  }
}

// ---------------------------------------------------------------- execute

template <typename T>
CompiledValues<T> compile_values(const Schedule& s) {
  auto conv = [](const std::vector<Tile>& tiles) {
    std::vector<std::vector<T>> out(tiles.size());
    for (std::size_t t = 0; t < tiles.size(); ++t)
      for (const auto& e : tiles[t].elements) out[t].push_back(static_cast<T>(e.value));
    return out;
  };
  return {conv(s.fe_tiles), conv(s.diag_tiles), conv(s.bs_tiles)};
}

namespace {

// Per-index stamps of the current phase's writer and readers. A stamp packs
// (phase + 1) and a worker id; kMany marks two or more readers.
class OwnershipAudit {
 public:
  static constexpr std::uint64_t kMany = 0xFFFF;

  explicit OwnershipAudit(index_t size) : write_(size), read_(size) {
    for (auto& a : write_) a.store(0);
    for (auto& a : read_) a.store(0);
  }

  void on_write(index_t x, index_t phase, int w) {
    const std::uint64_t me = stamp(phase, w);
    const std::uint64_t old = write_[x].exchange(me);
    if (phase_of(old) == phase && worker_of(old) != static_cast<std::uint64_t>(w))
      report("phase " + std::to_string(phase) + ": index " + std::to_string(x) + " written by workers " +
             std::to_string(worker_of(old)) + " and " + std::to_string(w));
    const std::uint64_t r = read_[x].load();
    if (phase_of(r) == phase && worker_of(r) != static_cast<std::uint64_t>(w))
      report("phase " + std::to_string(phase) + ": index " + std::to_string(x) + " read by another worker than writer " +
             std::to_string(w));
  }

  void on_read(index_t x, index_t phase, int w) {
    const std::uint64_t me = stamp(phase, w);
    std::uint64_t cur = read_[x].load();
    for (;;) {
      std::uint64_t next = me;
      if (phase_of(cur) == phase && worker_of(cur) != static_cast<std::uint64_t>(w))
        next = stamp(phase, static_cast<int>(kMany));
      if (cur == next || read_[x].compare_exchange_weak(cur, next)) break;
    }
    const std::uint64_t wr = write_[x].load();
    if (phase_of(wr) == phase && worker_of(wr) != static_cast<std::uint64_t>(w))
      report("phase " + std::to_string(phase) + ": worker " + std::to_string(w) + " reads index " + std::to_string(x) +
             " written by worker " + std::to_string(worker_of(wr)));
  }

  std::vector<std::string> take() {
    std::lock_guard lock(m_);
    std::sort(findings_.begin(), findings_.end());
    findings_.erase(std::unique(findings_.begin(), findings_.end()), findings_.end());
    return std::move(findings_);
  }

 private:
  static std::uint64_t stamp(index_t phase, int w) {
    return (static_cast<std::uint64_t>(phase) + 1) << 16 | static_cast<std::uint64_t>(w);
  }
  static index_t phase_of(std::uint64_t s) { return static_cast<index_t>((s >> 16)) - 1; }
  static std::uint64_t worker_of(std::uint64_t s) { return s & 0xFFFF; }

  void report(std::string msg) {
    std::lock_guard lock(m_);
    if (findings_.size() < 1000) findings_.push_back(std::move(msg));
  }

  std::vector<std::atomic<std::uint64_t>> write_, read_;
  std::mutex m_;
  std::vector<std::string> findings_;
};

}  // namespace

template <typename T>
ExecutionTrace execute(const Schedule& s, const CompiledValues<T>& values, std::span<T> x, WorkerPool& pool,
                       const ExecuteOptions& opt) {
  const index_t n = s.n;
  const int W = s.n_workers;
  if (static_cast<index_t>(x.size()) != n) throw DimensionError("execute: rhs length");
  if (pool.size() != W)
    throw DimensionError("execute: schedule built for " + std::to_string(W) + " workers, pool has " +
                         std::to_string(pool.size()));
  if (values.fe.size() != s.fe_tiles.size() || values.bs.size() != s.bs_tiles.size() ||
      values.diag.size() != s.diag_tiles.size())
    throw DimensionError("execute: compiled values do not match the schedule");

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<T> buf(2 * static_cast<std::size_t>(n), T(0));
  std::copy(x.begin(), x.end(), buf.begin());
  std::vector<T> slots(std::max<index_t>(s.slots_needed(), 1));
  std::optional<OwnershipAudit> audit;
  if (opt.audit) audit.emplace(2 * n);

  ExecutionTrace trace;
  trace.per_worker_mac_ops.assign(W, 0);
  trace.per_worker_load_ops.assign(W, 0);
  std::barrier<> sync(W);
  std::atomic<index_t> barriers{0};

  struct Stage {
    const std::vector<Shard>* shards;
    const std::vector<Tile>* tiles;
    const std::vector<std::vector<T>>* values;
  };
  std::vector<Shard> diag_shards;
  if (!s.diag_shard.tiles.empty()) diag_shards.push_back(s.diag_shard);
  const Stage stages[3] = {{&s.fe_shards, &s.fe_tiles, &values.fe},
                           {&diag_shards, &s.diag_tiles, &values.diag},
                           {&s.bs_shards, &s.bs_tiles, &values.bs}};

  auto worker = [&](int w) {
    index_t phase = 0;
    index_t macs = 0, loads = 0;
    auto pass = [&] {
      if (w == 0) barriers.fetch_add(1, std::memory_order_relaxed);
      sync.arrive_and_wait();
      ++phase;
    };
    try {
      for (const auto& st : stages) {
        for (const auto& sh : *st.shards) {
          if (opt.on_phase) opt.on_phase(w, phase);
          for (const auto& it : sh.work[w]) {
            const Tile& tile = (*st.tiles)[it.tile];
            const T* v = (*st.values)[it.tile].data();
            if (audit) {
              for (index_t k = it.begin; k < it.end; ++k) {
                if (tile.elements[k].in != tile.elements[k].out) audit->on_read(tile.elements[k].in, phase, w);
                if (it.slot < 0) audit->on_write(tile.elements[k].out, phase, w);
              }
            }
            detail::run_item(tile, it, [v](index_t k) { return v[k]; }, buf.data(), slots.data());
            macs += it.end - it.begin;
            loads += (it.end - it.begin) * index_loads(tile.kind);
          }
          if (!sh.reductions.empty()) {
            pass();
            if (opt.on_phase) opt.on_phase(w, phase);
            for (const auto& r : sh.reductions)
              if (r.worker == w) {
                if (audit) audit->on_write(r.out, phase, w);
                detail::run_reduction(r, buf.data(), slots.data());
                macs += r.slot_end - r.slot_begin;
              }
          }
          pass();
        }
      }
      // Commit the inverted columns; the pool join orders this before return.
      for (std::size_t k = w; k < s.commit.size(); k += W) buf[s.commit[k]] = buf[n + s.commit[k]];
    } catch (...) {
      // Leave the barrier so the remaining workers can finish.
      sync.arrive_and_drop();
      throw;
    }
    trace.per_worker_mac_ops[w] = macs;
    trace.per_worker_load_ops[w] = loads;
  };

  try {
    pool.run(worker);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::internal, std::string("execute: worker failed: ") + e.what());
  }
  std::copy(buf.begin(), buf.begin() + n, x.begin());
  trace.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  trace.barrier_count = barriers.load();
  const auto cost = model_cost(s, opt.cost);
  trace.modeled_cycles = cost.modeled_cycles;
  trace.modeled_utilization = cost.modeled_utilization;
  if (audit) trace.audit_findings = audit->take();
  return trace;
}

template CompiledValues<float> compile_values(const Schedule&);
template CompiledValues<double> compile_values(const Schedule&);
template ExecutionTrace execute(const Schedule&, const CompiledValues<float>&, std::span<float>, WorkerPool&,
                                const ExecuteOptions&);
template ExecutionTrace execute(const Schedule&, const CompiledValues<double>&, std::span<double>, WorkerPool&,
                                const ExecuteOptions&);

template <typename T>
ScheduledSolver<T>::ScheduledSolver(Schedule s, ExecuteOptions opt)
    : s_(std::move(s)), values_(compile_values<T>(s_)), opt_(std::move(opt)), pool_(s_.n_workers) {}

template <typename T>
void ScheduledSolver<T>::solve_permuted(std::span<T> x) {
  last_ = execute<T>(s_, values_, x, pool_, opt_);
  ++solves_;
}

template class ScheduledSolver<float>;
template class ScheduledSolver<double>;

// ---------------------------------------------------------------- stats

BenchStats summarize(std::span<const double> samples) {
  BenchStats b;
  b.samples = static_cast<int>(samples.size());
  if (samples.empty()) return b;
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  b.min = v.front();
  b.max = v.back();
  b.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  const std::size_t h = v.size() / 2;
  b.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  double ss = 0.0;
  for (double x : v) ss += (x - b.mean) * (x - b.mean);
  b.stdev = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  return b;
}

}  // namespace parspl
