#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dci/util.hpp"

namespace dci {

class InvalidRnti : public Error {
 public:
  explicit InvalidRnti(unsigned value)
      : Error("rnti " + std::to_string(value) + " outside C-RNTI range") {}
};

class OutOfRange : public Error {
 public:
  using Error::Error;
};

class MalformedLine : public Error {
 public:
  MalformedLine(std::size_t line_no, const std::string& what)
      : Error("line " + std::to_string(line_no) + ": " + what),
        line_no_(line_no) {}
  std::size_t line_no() const { return line_no_; }

 private:
  std::size_t line_no_;
};

class InconsistentTbs : public Error {
 public:
  using Error::Error;
};

// Cell RNTI of a connected terminal. Only the C-RNTI range is representable;
// SI-/P-/RA-RNTI values are rejected at construction.
class Rnti {
 public:
  static constexpr std::uint16_t kMin = 0x003D;
  static constexpr std::uint16_t kMax = 0xFFF3;

  explicit Rnti(std::uint16_t value) : value_(value) {
    if (value < kMin || value > kMax) throw InvalidRnti(value);
  }

  std::uint16_t value() const { return value_; }
  auto operator<=>(const Rnti&) const = default;

 private:
  std::uint16_t value_;
};

enum class Direction : std::uint8_t { Downlink, Uplink };

const char* to_string(Direction d);

// One decoded control message. tbs_bits is redundant with (mcs, n_rb) and is
// validated on parse.
struct DciRecord {
  std::int64_t tti_ms;  // milliseconds since trace start, >= 0
  Rnti rnti;
  Direction dir;
  int mcs;    // [0, 28]
  int n_rb;   // [1, 100]
  std::int64_t tbs_bits;
};

struct Trace {
  std::vector<DciRecord> records;  // sorted by (tti_ms, rnti, dir)
  std::int64_t duration_ms = 0;
};

// Per-second downlink/uplink bit totals for one RNTI burst.
struct SessionSample {
  std::int64_t dl_bits = 0;
  std::int64_t ul_bits = 0;
  bool operator==(const SessionSample&) const = default;
};

struct Session {
  Rnti rnti;
  std::int64_t start_s = 0;
  std::vector<SessionSample> samples;   // length N >= 1
  std::optional<std::string> label;     // app or service tag

  std::int64_t length_s() const { return static_cast<std::int64_t>(samples.size()); }
  std::int64_t total_bits() const;
};

// Transport block sizes. The real 3GPP lookup is replaced by a deterministic
// surrogate TBS(mcs, n_rb) = round_to_8(n_rb * 144 * eff(mcs)), where eff is
// a fixed monotone per-MCS efficiency (bits per resource element) and 144 is
// the usable resource elements per RB per TTI. Strictly increasing in n_rb,
// non-decreasing in mcs.
constexpr int kMcsCount = 29;
constexpr int kMaxRb = 100;

std::int64_t compute_tbs(int mcs, int n_rb);

// Smallest and largest entries of the surrogate table.
std::int64_t min_tbs_bits();
std::int64_t max_tbs_bits();

// Distinct table values sorted ascending, each with its representative
// (mcs, n_rb) pair (lowest mcs, then lowest n_rb). Used by the generator's
// greedy bits->records quantization.
struct TbsEntry {
  std::int64_t tbs_bits;
  int mcs;
  int n_rb;
};
const std::vector<TbsEntry>& tbs_table();

// Largest table entry with tbs_bits <= target; nullptr if target < min entry.
const TbsEntry* largest_tbs_at_most(std::int64_t target_bits);

// JSONL trace round trip. One object per line:
//   {"tti_ms":..,"rnti":..,"dir":"DL"|"UL","mcs":..,"n_rb":..,"tbs":..}
// parse_trace validates every field and the tbs consistency; write_trace is
// byte-stable (fixed key order, LF endings) so parse(write(t)) == t.
Trace parse_trace(std::istream& in);
Trace parse_trace_file(const std::string& path);
void write_trace(const Trace& trace, std::ostream& out);
void write_trace_file(const Trace& trace, const std::string& path);

// Session CSV: header "rnti,start_s,second,dl_bits,ul_bits,label", one row
// per sample, `second` absolute (start_s + index). Empty label column for
// unlabeled sessions.
void write_sessions_csv(const std::vector<Session>& sessions, std::ostream& out);
std::vector<Session> read_sessions_csv(std::istream& in);

bool operator==(const DciRecord& a, const DciRecord& b);
bool operator==(const Session& a, const Session& b);
bool operator==(const Trace& a, const Trace& b);

}  // namespace dci
