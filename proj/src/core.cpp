#include "dci/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace dci {
namespace {

// Per-MCS spectral efficiency in bits per resource element, QPSK up to
// 64QAM code rates. Monotone by construction.
constexpr std::array<double, kMcsCount> kMcsEfficiency = {
    0.1523, 0.1887, 0.2344, 0.3066, 0.3770, 0.4385, 0.5137, 0.5879,
    0.6631, 0.7402, 0.8213, 0.9229, 1.0273, 1.1758, 1.3262, 1.4766,
    1.6953, 1.9141, 2.1602, 2.4063, 2.5703, 2.7305, 3.0293, 3.3223,
    3.6094, 3.9023, 4.2129, 4.5234, 4.8164};

constexpr double kResourceElementsPerRb = 144.0;

std::int64_t round_to_8(double x) {
  return 8 * static_cast<std::int64_t>(std::floor(x / 8.0 + 0.5));
}

bool record_less(const DciRecord& a, const DciRecord& b) {
  if (a.tti_ms != b.tti_ms) return a.tti_ms < b.tti_ms;
  if (a.rnti != b.rnti) return a.rnti < b.rnti;
  return a.dir < b.dir;
}

}  // namespace

const char* to_string(Direction d) {
  return d == Direction::Downlink ? "DL" : "UL";
}

std::int64_t Session::total_bits() const {
  std::int64_t sum = 0;
  for (const auto& s : samples) sum += s.dl_bits + s.ul_bits;
  return sum;
}

std::int64_t compute_tbs(int mcs, int n_rb) {
  if (mcs < 0 || mcs >= kMcsCount)
    throw OutOfRange("mcs " + std::to_string(mcs) + " outside [0, 28]");
  if (n_rb < 1 || n_rb > kMaxRb)
    throw OutOfRange("n_rb " + std::to_string(n_rb) + " outside [1, 100]");
  return round_to_8(n_rb * kResourceElementsPerRb * kMcsEfficiency[mcs]);
}

std::int64_t min_tbs_bits() { return compute_tbs(0, 1); }
std::int64_t max_tbs_bits() { return compute_tbs(kMcsCount - 1, kMaxRb); }

const std::vector<TbsEntry>& tbs_table() {
  static const std::vector<TbsEntry> table = [] {
    std::vector<TbsEntry> entries;
    for (int mcs = 0; mcs < kMcsCount; ++mcs)
      for (int n_rb = 1; n_rb <= kMaxRb; ++n_rb)
        entries.push_back({compute_tbs(mcs, n_rb), mcs, n_rb});
    std::sort(entries.begin(), entries.end(), [](const TbsEntry& a, const TbsEntry& b) {
      if (a.tbs_bits != b.tbs_bits) return a.tbs_bits < b.tbs_bits;
      if (a.mcs != b.mcs) return a.mcs < b.mcs;
      return a.n_rb < b.n_rb;
    });
    // keep the lowest (mcs, n_rb) representative per distinct value
    std::vector<TbsEntry> dedup;
    for (const auto& e : entries)
      if (dedup.empty() || dedup.back().tbs_bits != e.tbs_bits) dedup.push_back(e);
    return dedup;
  }();
  return table;
}

const TbsEntry* largest_tbs_at_most(std::int64_t target_bits) {
  const auto& table = tbs_table();
  auto it = std::upper_bound(table.begin(), table.end(), target_bits,
                             [](std::int64_t t, const TbsEntry& e) { return t < e.tbs_bits; });
  if (it == table.begin()) return nullptr;
  return &*(it - 1);
}

Trace parse_trace(std::istream& in) {
  Trace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedLine(line_no, e.what());
    }
    if (!j.is_object()) throw MalformedLine(line_no, "not a JSON object");
    std::int64_t tti_ms, rnti_raw, tbs;
    int mcs, n_rb;
    std::string dir;
    try {
      tti_ms = j.at("tti_ms").get<std::int64_t>();
      rnti_raw = j.at("rnti").get<std::int64_t>();
      dir = j.at("dir").get<std::string>();
      mcs = j.at("mcs").get<int>();
      n_rb = j.at("n_rb").get<int>();
      tbs = j.at("tbs").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw MalformedLine(line_no, e.what());
    }
    if (tti_ms < 0) throw MalformedLine(line_no, "negative tti_ms");
    if (dir != "DL" && dir != "UL") throw MalformedLine(line_no, "dir must be DL or UL");
    if (rnti_raw < 0 || rnti_raw > 0xFFFF) throw InvalidRnti(static_cast<unsigned>(rnti_raw));
    Rnti rnti(static_cast<std::uint16_t>(rnti_raw));  // throws InvalidRnti
    std::int64_t expected;
    try {
      expected = compute_tbs(mcs, n_rb);
    } catch (const OutOfRange& e) {
      throw MalformedLine(line_no, e.what());
    }
    if (tbs != expected)
      throw InconsistentTbs("line " + std::to_string(line_no) + ": tbs " +
                            std::to_string(tbs) + " != compute_tbs(" + std::to_string(mcs) +
                            "," + std::to_string(n_rb) + ") = " + std::to_string(expected));
    trace.records.push_back({tti_ms, rnti, dir == "DL" ? Direction::Downlink : Direction::Uplink,
                             mcs, n_rb, tbs});
  }
  std::sort(trace.records.begin(), trace.records.end(), record_less);
  trace.duration_ms = trace.records.empty() ? 0 : trace.records.back().tti_ms + 1;
  return trace;
}

Trace parse_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open trace file " + path);
  return parse_trace(in);
}

void write_trace(const Trace& trace, std::ostream& out) {
  char buf[160];
  for (const auto& r : trace.records) {
    std::snprintf(buf, sizeof buf,
                  "{\"tti_ms\":%lld,\"rnti\":%u,\"dir\":\"%s\",\"mcs\":%d,\"n_rb\":%d,\"tbs\":%lld}\n",
                  static_cast<long long>(r.tti_ms), r.rnti.value(), to_string(r.dir), r.mcs,
                  r.n_rb, static_cast<long long>(r.tbs_bits));
    out << buf;
  }
}

void write_trace_file(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_trace(trace, out);
}

void write_sessions_csv(const std::vector<Session>& sessions, std::ostream& out) {
  out << "rnti,start_s,second,dl_bits,ul_bits,label\n";
  for (const auto& s : sessions) {
    for (std::size_t i = 0; i < s.samples.size(); ++i) {
      out << s.rnti.value() << ',' << s.start_s << ',' << s.start_s + static_cast<std::int64_t>(i)
          << ',' << s.samples[i].dl_bits << ',' << s.samples[i].ul_bits << ','
          << (s.label ? *s.label : "") << '\n';
    }
  }
}

std::vector<Session> read_sessions_csv(std::istream& in) {
  std::vector<Session> sessions;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) return sessions;
  ++line_no;
  if (line != "rnti,start_s,second,dl_bits,ul_bits,label")
    throw MalformedLine(line_no, "unexpected session CSV header");
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::array<std::string, 6> field;
    std::size_t pos = 0;
    for (int f = 0; f < 6; ++f) {
      auto comma = f < 5 ? line.find(',', pos) : line.size();
      if (comma == std::string::npos) throw MalformedLine(line_no, "expected 6 CSV fields");
      field[f] = line.substr(pos, comma - pos);
      pos = comma + 1;
    }
    std::int64_t rnti_raw, start_s, second, dl, ul;
    try {
      rnti_raw = std::stoll(field[0]);
      start_s = std::stoll(field[1]);
      second = std::stoll(field[2]);
      dl = std::stoll(field[3]);
      ul = std::stoll(field[4]);
    } catch (const std::exception&) {
      throw MalformedLine(line_no, "non-numeric CSV field");
    }
    if (dl < 0 || ul < 0) throw MalformedLine(line_no, "negative bit count");
    if (rnti_raw < 0 || rnti_raw > 0xFFFF) throw InvalidRnti(static_cast<unsigned>(rnti_raw));
    Rnti rnti(static_cast<std::uint16_t>(rnti_raw));
    const bool starts_new = sessions.empty() || sessions.back().rnti != rnti ||
                            sessions.back().start_s != start_s;
    if (starts_new) {
      if (second != start_s) throw MalformedLine(line_no, "session must start at start_s");
      Session s{rnti, start_s, {}, std::nullopt};
      if (!field[5].empty()) s.label = field[5];
      sessions.push_back(std::move(s));
    } else {
      if (second != sessions.back().start_s + sessions.back().length_s())
        throw MalformedLine(line_no, "non-contiguous session seconds");
    }
    sessions.back().samples.push_back({dl, ul});
  }
  return sessions;
}

bool operator==(const DciRecord& a, const DciRecord& b) {
  return a.tti_ms == b.tti_ms && a.rnti == b.rnti && a.dir == b.dir && a.mcs == b.mcs &&
         a.n_rb == b.n_rb && a.tbs_bits == b.tbs_bits;
}

bool operator==(const Session& a, const Session& b) {
  return a.rnti == b.rnti && a.start_s == b.start_s && a.samples == b.samples &&
         a.label == b.label;
}

bool operator==(const Trace& a, const Trace& b) {
  return a.duration_ms == b.duration_ms && a.records == b.records;
}

}  // namespace dci
