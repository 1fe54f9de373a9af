#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>

#include "parspl/hypt.hpp"
#include "parspl/qp.hpp"

namespace parspl {

inline constexpr int kScheduleFormatMajor = 1;
inline constexpr int kScheduleFormatMinor = 0;
inline constexpr int kPackedFormatMajor = 1;
inline constexpr int kPackedFormatMinor = 0;

/// Text format, one record per line:
///
///   parspl-schedule 1.0
///   kind <parspl|naive-level|naive-column>
///   n <n>
///   workers <w>
///   metrics <key> <value> ...
///   commit <count> <col>...
///   tiles <count>
///   tile <kind> <row_begin> <row_end> <col_begin> <col_end> <seq> <block count> <col>... <element count>
///   <out> <in> <value>          (one line per element, forward orientation)
///   diag <n>
///   <out> <in> <value>          (n lines)
///   stage <fe|diag|bs> <shards>
///   shard <barriers> <slots> <tile count> <tile>...
///   worker <w> <items> then items as "<tile> <begin> <end> <slot>"
///   reductions <count> then "<out> <assign> <worker> <slot_begin> <slot_end>"
///
/// Backward tiles are not stored; they are the transposes of the forward
/// tiles and are rebuilt on load.
void write_schedule(std::ostream& out, const Schedule& s);
Schedule read_schedule(std::istream& in);
void save_schedule(const std::string& path, const Schedule& s);
Schedule load_schedule(const std::string& path);

struct PackedOptions {
  int index_bytes = 0;            // 2 or 4; 0 picks 2 when every index fits
  bool packed_triangles = false;  // Diaginv as s(s+1)/2 values instead of s*s
};

/// Little-endian binary with 32-bit values. Layout: magic "PSPK", u16 major,
/// u16 minor, u8 index bytes, u8 triangle layout, then the same records as
/// the text format with counts as u32 and element ranges as u32.
void write_schedule_packed(std::ostream& out, const Schedule& s, const PackedOptions& opt = {});
Schedule read_schedule_packed(std::istream& in);

/// Problem in the same packed style: magic "PQPK", versions, index bytes,
/// n, m, P and A as CSC (u32 column pointers), q, l, u.
void write_qp_packed(std::ostream& out, const QpProblem<double>& qp, int index_bytes = 0);
QpProblem<double> read_qp_packed(std::istream& in);

std::size_t packed_size(const Schedule& s, const PackedOptions& opt = {});
std::size_t packed_size(const QpProblem<double>& qp, int index_bytes = 0);

}  // namespace parspl
