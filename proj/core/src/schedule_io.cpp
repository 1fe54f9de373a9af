#include "parspl/schedule_io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <streambuf>

namespace parspl {

namespace {

// ---------------------------------------------------------------- text

ScheduleKind kind_from(const std::string& s) {
  if (s == "parspl") return ScheduleKind::parspl;
  if (s == "naive-level") return ScheduleKind::naive_level;
  if (s == "naive-column") return ScheduleKind::naive_column;
  throw FormatError("schedule: unknown kind '" + s + "'");
}

TileKind tile_kind_from(const std::string& s) {
  for (auto k : {TileKind::mapping, TileKind::diaginv, TileKind::collist, TileKind::diag_scale})
    if (s == to_string(k)) return k;
  throw FormatError("schedule: unknown tile kind '" + s + "'");
}

class Tokens {
 public:
  explicit Tokens(std::istream& in) : in_(in) {}

  std::string word() {
    std::string t;
    if (!(in_ >> t)) throw FormatError("schedule: unexpected end of input");
    return t;
  }
  void expect(const std::string& kw) {
    const auto t = word();
    if (t != kw) throw FormatError("schedule: expected '" + kw + "', got '" + t + "'");
  }
  long long integer() {
    const auto t = word();
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size() || t.empty()) throw FormatError("schedule: bad integer '" + t + "'");
    return v;
  }
  index_t index(long long lo, long long hi) {
    const auto v = integer();
    if (v < lo || v > hi) throw FormatError("schedule: value " + std::to_string(v) + " out of range");
    return static_cast<index_t>(v);
  }
  double real() {
    const auto t = word();
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size() || t.empty()) throw FormatError("schedule: bad number '" + t + "'");
    return v;
  }

 private:
  std::istream& in_;
};

void write_shards(std::ostream& out, const char* name, const std::vector<Shard>& shards) {
  out << "stage " << name << ' ' << shards.size() << '\n';
  for (const auto& sh : shards) {
    out << "shard " << sh.barriers_after << ' ' << sh.n_slots << ' ' << sh.tiles.size();
    for (index_t t : sh.tiles) out << ' ' << t;
    out << '\n';
    for (std::size_t w = 0; w < sh.work.size(); ++w) {
      out << "worker " << w << ' ' << sh.work[w].size();
      for (const auto& it : sh.work[w]) out << ' ' << it.tile << ' ' << it.begin << ' ' << it.end << ' ' << it.slot;
      out << '\n';
    }
    out << "reductions " << sh.reductions.size();
    for (const auto& r : sh.reductions)
      out << ' ' << r.out << ' ' << (r.assign ? 1 : 0) << ' ' << r.worker << ' ' << r.slot_begin << ' ' << r.slot_end;
    out << '\n';
  }
}

std::vector<Shard> read_shards(Tokens& tk, const char* name, int workers, const std::vector<Tile>& tiles,
                               index_t n2) {
  tk.expect("stage");
  tk.expect(name);
  const auto count = tk.index(0, 1 << 24);
  std::vector<Shard> shards(count);
  for (auto& sh : shards) {
    tk.expect("shard");
    sh.barriers_after = tk.index(1, 2);
    sh.n_slots = tk.index(0, 1 << 30);
    sh.tiles.resize(tk.index(0, 1 << 24));
    for (auto& t : sh.tiles) t = tk.index(0, static_cast<long long>(tiles.size()) - 1);
    sh.work.resize(workers);
    for (int w = 0; w < workers; ++w) {
      tk.expect("worker");
      if (tk.index(0, workers - 1) != w) throw FormatError("schedule: workers out of order");
      sh.work[w].resize(tk.index(0, 1 << 30));
      for (auto& it : sh.work[w]) {
        it.tile = tk.index(0, static_cast<long long>(tiles.size()) - 1);
        const auto size = static_cast<long long>(tiles[it.tile].elements.size());
        it.begin = tk.index(0, size);
        it.end = tk.index(it.begin, size);
        it.slot = tk.index(-1, sh.n_slots - 1);
      }
    }
    tk.expect("reductions");
    sh.reductions.resize(tk.index(0, 1 << 30));
    for (auto& r : sh.reductions) {
      r.out = tk.index(0, n2 - 1);
      r.assign = tk.index(0, 1) == 1;
      r.worker = tk.index(0, workers - 1);
      r.slot_begin = tk.index(0, sh.n_slots);
      r.slot_end = tk.index(r.slot_begin, sh.n_slots);
    }
  }
  return shards;
}

void write_elements(std::ostream& out, const std::vector<TileElement>& e) {
  for (const auto& x : e) out << x.out << ' ' << x.in << ' ' << x.value << '\n';
}

std::vector<TileElement> read_elements(Tokens& tk, std::size_t count, index_t n2) {
  std::vector<TileElement> e(count);
  for (auto& x : e) {
    x.out = tk.index(0, n2 - 1);
    x.in = tk.index(0, n2 - 1);
    x.value = tk.real();
  }
  return e;
}

void rebuild_backward(Schedule& s) {
  std::vector<std::uint8_t> inverted(s.n, 0);
  for (index_t c : s.commit) inverted[c] = 1;
  s.bs_tiles.clear();
  for (const auto& t : s.fe_tiles) s.bs_tiles.push_back(transpose_tile(t, s.n, inverted));
}

using MetricField = std::pair<const char*, index_t ScheduleMetrics::*>;
const MetricField kMetricFields[] = {
    {"sync_count", &ScheduleMetrics::sync_count},
    {"nnz_l", &ScheduleMetrics::nnz_l},
    {"shard_count", &ScheduleMetrics::shard_count},
    {"kept_levels", &ScheduleMetrics::kept_levels},
    {"total_levels", &ScheduleMetrics::total_levels},
    {"tiles_before_merge", &ScheduleMetrics::tiles_before_merge},
    {"tiles_after_merge", &ScheduleMetrics::tiles_after_merge},
    {"static_shard_count", &ScheduleMetrics::static_shard_count},
    {"static_sync_count", &ScheduleMetrics::static_sync_count},
    {"diaginv_fallbacks", &ScheduleMetrics::diaginv_fallbacks},
    {"reductions", &ScheduleMetrics::reductions},
    {"alap_shard_count", &ScheduleMetrics::alap_shard_count},
    {"alap_sync_count", &ScheduleMetrics::alap_sync_count},
};

void finish_metrics(Schedule& s) {
  auto& m = s.metrics;
  m.sl = m.sync_count > 0 ? static_cast<double>(m.nnz_l) / m.sync_count : 0.0;
  m.worker_nnz.assign(s.n_workers, 0);
  auto add = [&](const std::vector<Shard>& shards) {
    for (const auto& sh : shards)
      for (int w = 0; w < s.n_workers; ++w)
        for (const auto& it : sh.work[w]) m.worker_nnz[w] += it.end - it.begin;
  };
  add(s.fe_shards);
  add({s.diag_shard});
  add(s.bs_shards);
}

int parse_major(const std::string& version, const char* what) {
  try {
    return std::stoi(version.substr(0, version.find('.')));
  } catch (const std::exception&) {
    throw FormatError(std::string(what) + ": malformed version '" + version + "'");
  }
}

// ---------------------------------------------------------------- binary

class Out {
 public:
  Out(std::ostream& os, int index_bytes) : os_(os), ib_(index_bytes) {}
  template <typename U>
  void put(U v) {
    os_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void idx(long long v) {
    if (ib_ == 2) {
      if (v < 0 || v > 0xFFFF) throw Error(ErrorCode::invalid_argument, "packed: index exceeds 16 bits");
      put(static_cast<std::uint16_t>(v));
    } else {
      put(static_cast<std::int32_t>(v));
    }
  }
  void u32(long long v) { put(static_cast<std::uint32_t>(v)); }
  void f32(double v) { put(static_cast<float>(v)); }

 private:
  std::ostream& os_;
  int ib_;
};

class In {
 public:
  In(std::istream& is) : is_(is) {}
  template <typename U>
  U get() {
    U v{};
    if (!is_.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("packed: truncated input");
    return v;
  }
  void set_index_bytes(int b) { ib_ = b; }
  index_t idx(long long lo, long long hi) {
    const long long v = ib_ == 2 ? static_cast<long long>(get<std::uint16_t>()) : get<std::int32_t>();
    if (v < lo || v > hi) throw FormatError("packed: index out of range");
    return static_cast<index_t>(v);
  }
  index_t u32(long long hi) {
    const auto v = get<std::uint32_t>();
    if (v > hi) throw FormatError("packed: count out of range");
    return static_cast<index_t>(v);
  }
  double f32() { return get<float>(); }

 private:
  std::istream& is_;
  int ib_ = 4;
};

int pick_index_bytes(int requested, long long largest) {
  if (requested == 2 || requested == 4) return requested;
  if (requested != 0) throw Error(ErrorCode::invalid_argument, "packed: index bytes must be 0, 2 or 4");
  return largest <= 0xFFFF ? 2 : 4;
}

void check_magic(In& in, const char* magic, int expected_major, const char* what) {
  char m[4];
  for (char& c : m) c = in.get<char>();
  if (std::memcmp(m, magic, 4) != 0) throw FormatError(std::string(what) + ": bad magic");
  const auto major = in.get<std::uint16_t>();
  (void)in.get<std::uint16_t>();
  if (major != expected_major)
    throw VersionError(std::string(what) + ": unsupported format version " + std::to_string(major));
}

void put_shards(Out& o, const std::vector<Shard>& shards) {
  o.u32(shards.size());
  for (const auto& sh : shards) {
    o.put(static_cast<std::uint8_t>(sh.barriers_after));
    o.u32(sh.n_slots);
    o.u32(sh.tiles.size());
    for (index_t t : sh.tiles) o.idx(t);
    for (const auto& items : sh.work) {
      o.u32(items.size());
      for (const auto& it : items) {
        o.idx(it.tile);
        o.u32(it.begin);
        o.u32(it.end);
        o.put(static_cast<std::int32_t>(it.slot));
      }
    }
    o.u32(sh.reductions.size());
    for (const auto& r : sh.reductions) {
      o.idx(r.out);
      o.put(static_cast<std::uint8_t>(r.assign));
      o.put(static_cast<std::uint16_t>(r.worker));
      o.u32(r.slot_begin);
      o.u32(r.slot_end);
    }
  }
}

std::vector<Shard> get_shards(In& in, int workers, const std::vector<Tile>& tiles, index_t n2) {
  std::vector<Shard> shards(in.u32(1 << 24));
  const long long nt = static_cast<long long>(tiles.size()) - 1;
  for (auto& sh : shards) {
    sh.barriers_after = in.get<std::uint8_t>();
    if (sh.barriers_after < 1 || sh.barriers_after > 2) throw FormatError("packed: bad barrier count");
    sh.n_slots = in.u32(1 << 30);
    sh.tiles.resize(in.u32(1 << 24));
    for (auto& t : sh.tiles) t = in.idx(0, nt);
    sh.work.resize(workers);
    for (auto& items : sh.work) {
      items.resize(in.u32(1 << 30));
      for (auto& it : items) {
        it.tile = in.idx(0, nt);
        const auto size = static_cast<long long>(tiles[it.tile].elements.size());
        it.begin = in.u32(size);
        it.end = in.u32(size);
        it.slot = in.get<std::int32_t>();
        if (it.end < it.begin || it.slot < -1 || it.slot >= sh.n_slots) throw FormatError("packed: bad work item");
      }
    }
    sh.reductions.resize(in.u32(1 << 30));
    for (auto& r : sh.reductions) {
      r.out = in.idx(0, n2 - 1);
      r.assign = in.get<std::uint8_t>() != 0;
      r.worker = in.get<std::uint16_t>();
      r.slot_begin = in.u32(sh.n_slots);
      r.slot_end = in.u32(sh.n_slots);
      if (r.worker >= workers || r.slot_end < r.slot_begin) throw FormatError("packed: bad reduction");
    }
  }
  return shards;
}

class CountingBuf : public std::streambuf {
 public:
  std::size_t count = 0;

 protected:
  std::streamsize xsputn(const char*, std::streamsize n) override {
    count += static_cast<std::size_t>(n);
    return n;
  }
  int_type overflow(int_type c) override {
    ++count;
    return c;
  }
};

}  // namespace

void write_schedule(std::ostream& out, const Schedule& s) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  out << "parspl-schedule " << kScheduleFormatMajor << '.' << kScheduleFormatMinor << '\n';
  out << "kind " << to_string(s.kind) << '\n';
  out << "n " << s.n << '\n';
  out << "workers " << s.n_workers << '\n';
  out << "metrics " << std::size(kMetricFields) + 1;
  for (const auto& [name, field] : kMetricFields) out << ' ' << name << ' ' << s.metrics.*field;
  out << " alap_fallback " << (s.metrics.alap_fallback ? 1 : 0);
  out << '\n';
  out << "commit " << s.commit.size();
  for (index_t c : s.commit) out << ' ' << c;
  out << '\n';
  out << "tiles " << s.fe_tiles.size() << '\n';
  for (const auto& t : s.fe_tiles) {
    out << "tile " << to_string(t.kind) << ' ' << t.row_begin << ' ' << t.row_end << ' ' << t.col_begin << ' '
        << t.col_end << ' ' << t.seq << ' ' << t.block.size();
    for (index_t c : t.block) out << ' ' << c;
    out << ' ' << t.elements.size() << '\n';
    write_elements(out, t.elements);
  }
  const auto& d = s.diag_tiles.at(0);
  out << "diag " << d.elements.size() << '\n';
  write_elements(out, d.elements);
  write_shards(out, "fe", s.fe_shards);
  write_shards(out, "diag", {s.diag_shard});
  write_shards(out, "bs", s.bs_shards);
  out.precision(old);
}

Schedule read_schedule(std::istream& in) {
  Tokens tk(in);
  std::string magic = tk.word();
  if (magic != "parspl-schedule") throw FormatError("schedule: missing 'parspl-schedule' header");
  const auto version = tk.word();
  if (parse_major(version, "schedule") != kScheduleFormatMajor)
    throw VersionError("schedule: unsupported format version " + version);

  Schedule s;
  tk.expect("kind");
  s.kind = kind_from(tk.word());
  tk.expect("n");
  s.n = tk.index(0, std::numeric_limits<index_t>::max() / 2);
  tk.expect("workers");
  s.n_workers = tk.index(1, 1 << 16);
  const index_t n2 = std::max<index_t>(2 * s.n, 1);
  tk.expect("metrics");
  const auto nm = tk.index(0, 1 << 10);
  for (index_t k = 0; k < nm; ++k) {
    const auto name = tk.word();
    const auto value = tk.integer();
    for (const auto& [fname, field] : kMetricFields)
      if (name == fname) s.metrics.*field = static_cast<index_t>(value);
    if (name == "alap_fallback") s.metrics.alap_fallback = value != 0;
  }
  tk.expect("commit");
  s.commit.resize(tk.index(0, s.n));
  for (auto& c : s.commit) c = tk.index(0, s.n - 1);
  tk.expect("tiles");
  s.fe_tiles.resize(tk.index(0, 1 << 24));
  for (auto& t : s.fe_tiles) {
    tk.expect("tile");
    t.kind = tile_kind_from(tk.word());
    t.row_begin = tk.index(0, s.n);
    t.row_end = tk.index(0, s.n);
    t.col_begin = tk.index(0, s.n);
    t.col_end = tk.index(0, s.n);
    t.seq = tk.index(0, std::numeric_limits<index_t>::max());
    t.block.resize(tk.index(0, s.n));
    for (auto& c : t.block) c = tk.index(0, s.n - 1);
    t.elements = read_elements(tk, tk.index(0, std::numeric_limits<index_t>::max()), n2);
  }
  tk.expect("diag");
  Tile d;
  d.kind = TileKind::diag_scale;
  d.row_end = d.col_end = s.n;
  d.elements = read_elements(tk, tk.index(0, s.n), n2);
  s.diag_tiles = {std::move(d)};
  rebuild_backward(s);
  s.fe_shards = read_shards(tk, "fe", s.n_workers, s.fe_tiles, n2);
  auto diag = read_shards(tk, "diag", s.n_workers, s.diag_tiles, n2);
  if (diag.size() != 1) throw FormatError("schedule: expected one diagonal shard");
  s.diag_shard = std::move(diag[0]);
  s.bs_shards = read_shards(tk, "bs", s.n_workers, s.bs_tiles, n2);
  finish_metrics(s);
  return s;
}

void save_schedule(const std::string& path, const Schedule& s) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  write_schedule(out, s);
}

Schedule load_schedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  return read_schedule(in);
}

void write_schedule_packed(std::ostream& os, const Schedule& s, const PackedOptions& opt) {
  const int ib = pick_index_bytes(opt.index_bytes, 2LL * s.n - 1);
  Out o(os, ib);
  os.write("PSPK", 4);
  o.put(static_cast<std::uint16_t>(kPackedFormatMajor));
  o.put(static_cast<std::uint16_t>(kPackedFormatMinor));
  o.put(static_cast<std::uint8_t>(ib));
  o.put(static_cast<std::uint8_t>(opt.packed_triangles ? 1 : 0));
  o.put(static_cast<std::uint8_t>(s.kind));
  o.u32(s.n);
  o.u32(s.n_workers);
  o.u32(std::size(kMetricFields));
  for (const auto& f : kMetricFields) o.u32(s.metrics.*(f.second));
  o.put(static_cast<std::uint8_t>(s.metrics.alap_fallback));
  o.u32(s.commit.size());
  for (index_t c : s.commit) o.idx(c);
  o.u32(s.fe_tiles.size());
  for (const auto& t : s.fe_tiles) {
    o.put(static_cast<std::uint8_t>(t.kind));
    for (index_t v : {t.row_begin, t.row_end, t.col_begin, t.col_end}) o.idx(v);
    o.u32(t.seq);
    if (t.kind == TileKind::diaginv) {
      const auto sz = static_cast<index_t>(t.block.size());
      o.u32(sz);
      for (index_t c : t.block) o.idx(c);
      std::map<index_t, index_t> local;
      for (index_t k = 0; k < sz; ++k) local[t.block[k]] = k;
      std::vector<double> dense(static_cast<std::size_t>(sz) * sz, 0.0);
      for (const auto& e : t.elements) dense[local.at(e.out - s.n) * sz + local.at(e.in)] = e.value;
      for (index_t r = 0; r < sz; ++r)
        for (index_t c = 0; c < (opt.packed_triangles ? r + 1 : sz); ++c) o.f32(dense[r * sz + c]);
    } else {
      o.u32(t.elements.size());
      for (const auto& e : t.elements) o.idx(e.out);
      for (const auto& e : t.elements) o.idx(e.in);
      for (const auto& e : t.elements) o.f32(e.value);
    }
  }
  for (const auto& e : s.diag_tiles.at(0).elements) o.f32(e.value);
  put_shards(o, s.fe_shards);
  put_shards(o, {s.diag_shard});
  put_shards(o, s.bs_shards);
}

Schedule read_schedule_packed(std::istream& is) {
  In in(is);
  check_magic(in, "PSPK", kPackedFormatMajor, "packed schedule");
  const int ib = in.get<std::uint8_t>();
  if (ib != 2 && ib != 4) throw FormatError("packed: bad index width");
  in.set_index_bytes(ib);
  const bool packed_tri = in.get<std::uint8_t>() != 0;
  Schedule s;
  const auto kind = in.get<std::uint8_t>();
  if (kind > 2) throw FormatError("packed: bad schedule kind");
  s.kind = static_cast<ScheduleKind>(kind);
  s.n = in.u32(std::numeric_limits<index_t>::max() / 2);
  s.n_workers = in.u32(1 << 16);
  if (s.n_workers < 1) throw FormatError("packed: no workers");
  const index_t n2 = std::max<index_t>(2 * s.n, 1);
  const auto nm = in.u32(1 << 10);
  for (index_t k = 0; k < nm; ++k) {
    const auto v = in.u32(std::numeric_limits<index_t>::max());
    if (k < static_cast<index_t>(std::size(kMetricFields))) s.metrics.*(kMetricFields[k].second) = v;
  }
  s.metrics.alap_fallback = in.get<std::uint8_t>() != 0;
  s.commit.resize(in.u32(s.n));
  for (auto& c : s.commit) c = in.idx(0, s.n - 1);
  std::vector<std::uint8_t> inverted(s.n, 0);
  for (index_t c : s.commit) inverted[c] = 1;

  s.fe_tiles.resize(in.u32(1 << 24));
  for (auto& t : s.fe_tiles) {
    const auto k = in.get<std::uint8_t>();
    if (k > 2) throw FormatError("packed: bad tile kind");
    t.kind = static_cast<TileKind>(k);
    t.row_begin = in.idx(0, s.n);
    t.row_end = in.idx(0, s.n);
    t.col_begin = in.idx(0, s.n);
    t.col_end = in.idx(0, s.n);
    t.seq = in.u32(std::numeric_limits<index_t>::max());
    if (t.kind == TileKind::diaginv) {
      const auto sz = in.u32(s.n);
      t.block.resize(sz);
      for (auto& c : t.block) c = in.idx(0, s.n - 1);
      for (index_t r = 0; r < sz; ++r) {
        for (index_t c = 0; c <= r; ++c) t.elements.push_back({s.n + t.block[r], t.block[c], in.f32()});
        if (!packed_tri)
          for (index_t c = r + 1; c < sz; ++c) (void)in.f32();
      }
      std::sort(t.elements.begin(), t.elements.end(),
                [](const TileElement& a, const TileElement& b) { return std::pair(a.out, a.in) < std::pair(b.out, b.in); });
    } else {
      t.elements.resize(in.u32(std::numeric_limits<index_t>::max()));
      for (auto& e : t.elements) e.out = in.idx(0, n2 - 1);
      for (auto& e : t.elements) e.in = in.idx(0, n2 - 1);
      for (auto& e : t.elements) e.value = in.f32();
    }
  }
  Tile d;
  d.kind = TileKind::diag_scale;
  d.row_end = d.col_end = s.n;
  for (index_t r = 0; r < s.n; ++r) d.elements.push_back({r, inverted[r] ? s.n + r : r, in.f32()});
  s.diag_tiles = {std::move(d)};
  rebuild_backward(s);
  s.fe_shards = get_shards(in, s.n_workers, s.fe_tiles, n2);
  auto diag = get_shards(in, s.n_workers, s.diag_tiles, n2);
  if (diag.size() != 1) throw FormatError("packed: expected one diagonal shard");
  s.diag_shard = std::move(diag[0]);
  s.bs_shards = get_shards(in, s.n_workers, s.bs_tiles, n2);
  finish_metrics(s);
  return s;
}

namespace {

void put_csc(Out& o, const SparseCSC<double>& a) {
  for (index_t p : a.colptr()) o.u32(p);
  for (index_t i : a.rowidx()) o.idx(i);
  for (double v : a.values()) o.f32(v);
}

SparseCSC<double> get_csc(In& in, index_t rows, index_t cols) {
  std::vector<index_t> colptr(cols + 1);
  for (auto& p : colptr) p = in.u32(std::numeric_limits<index_t>::max());
  const index_t nnz = colptr.back();
  std::vector<index_t> rowidx(nnz);
  for (auto& i : rowidx) i = in.idx(0, rows - 1);
  std::vector<double> vals(nnz);
  for (auto& v : vals) v = in.f32();
  SparseCSC<double> a(rows, cols, std::move(colptr), std::move(rowidx), std::move(vals));
  try {
    a.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("packed qp: ") + e.what());
  }
  return a;
}

}  // namespace

void write_qp_packed(std::ostream& os, const QpProblem<double>& qp, int index_bytes) {
  const int ib = pick_index_bytes(index_bytes, std::max(qp.n(), qp.m()) - 1);
  Out o(os, ib);
  os.write("PQPK", 4);
  o.put(static_cast<std::uint16_t>(kPackedFormatMajor));
  o.put(static_cast<std::uint16_t>(kPackedFormatMinor));
  o.put(static_cast<std::uint8_t>(ib));
  o.u32(qp.n());
  o.u32(qp.m());
  put_csc(o, qp.P);
  put_csc(o, qp.A);
  for (const auto* v : {&qp.q, &qp.l, &qp.u})
    for (double x : *v) o.f32(x);
}

QpProblem<double> read_qp_packed(std::istream& is) {
  In in(is);
  check_magic(in, "PQPK", kPackedFormatMajor, "packed qp");
  const int ib = in.get<std::uint8_t>();
  if (ib != 2 && ib != 4) throw FormatError("packed qp: bad index width");
  in.set_index_bytes(ib);
  const index_t n = in.u32(std::numeric_limits<index_t>::max());
  const index_t m = in.u32(std::numeric_limits<index_t>::max());
  QpProblem<double> qp;
  qp.P = get_csc(in, n, n);
  qp.A = get_csc(in, m, n);
  for (auto* v : {&qp.q, &qp.l, &qp.u}) {
    v->resize(v == &qp.q ? n : m);
    for (auto& x : *v) x = in.f32();
  }
  qp.validate();
  return qp;
}

std::size_t packed_size(const Schedule& s, const PackedOptions& opt) {
  CountingBuf buf;
  std::ostream os(&buf);
  write_schedule_packed(os, s, opt);
  return buf.count;
}

std::size_t packed_size(const QpProblem<double>& qp, int index_bytes) {
  CountingBuf buf;
  std::ostream os(&buf);
  write_qp_packed(os, qp, index_bytes);
  return buf.count;
}

}  // namespace parspl
