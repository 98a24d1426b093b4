#include "dci/sessionize.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace dci {
namespace {

struct SecondBin {
  std::int64_t second;
  std::int64_t dl_bits;
  std::int64_t ul_bits;
};

// Per-RNTI per-second totals, seconds ascending.
std::map<std::uint16_t, std::vector<SecondBin>> bin_by_rnti(const Trace& trace) {
  std::map<std::uint16_t, std::vector<SecondBin>> bins;
  for (const auto& r : trace.records) {
    const std::int64_t second = r.tti_ms / 1000;  // half-open [s, s+1) bins
    auto& v = bins[r.rnti.value()];
    if (v.empty() || v.back().second != second) v.push_back({second, 0, 0});
    if (r.dir == Direction::Downlink)
      v.back().dl_bits += r.tbs_bits;
    else
      v.back().ul_bits += r.tbs_bits;
  }
  return bins;
}

double checked_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  try {
    return pearson(a, b);
  } catch (const DegenerateInput&) {
    return 0.0;  // constant activity carries no watermark information
  }
}

void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

void put_u64(std::string& out, std::uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

}  // namespace

std::vector<Session> extract_sessions(const Trace& trace, std::int64_t idle_gap_s,
                                      std::int64_t min_len_s) {
  std::vector<Session> sessions;
  for (const auto& [rnti, bins] : bin_by_rnti(trace)) {
    std::size_t burst_begin = 0;
    for (std::size_t i = 1; i <= bins.size(); ++i) {
      const bool split = i == bins.size() || bins[i].second - bins[i - 1].second > idle_gap_s;
      if (!split) continue;
      const std::int64_t start = bins[burst_begin].second;
      const std::int64_t len = bins[i - 1].second - start + 1;
      if (len >= min_len_s) {
        Session s{Rnti(rnti), start, {}, std::nullopt};
        s.samples.assign(static_cast<std::size_t>(len), SessionSample{});
        for (std::size_t k = burst_begin; k < i; ++k) {
          auto& sample = s.samples[static_cast<std::size_t>(bins[k].second - start)];
          sample.dl_bits = bins[k].dl_bits;
          sample.ul_bits = bins[k].ul_bits;
        }
        sessions.push_back(std::move(s));
      }
      burst_begin = i;
    }
  }
  return sessions;  // map iteration is rnti-ordered, bursts are time-ordered
}

Rnti detect_watermark(const std::vector<Session>& sessions, const synth::WatermarkSpec& spec) {
  synth::validate(spec);
  if (sessions.empty()) throw NoWatermarkFound("no sessions");
  const std::int64_t span = spec.span_s();
  std::vector<double> wave(static_cast<std::size_t>(span));
  for (std::int64_t t = 0; t < span; ++t)
    wave[static_cast<std::size_t>(t)] = (t % spec.period_s()) < spec.on_duration_s ? 1.0 : 0.0;

  std::map<std::uint16_t, std::vector<double>> activity;
  for (const auto& s : sessions) {
    auto& a = activity.try_emplace(s.rnti.value(), std::vector<double>(wave.size(), 0.0))
                  .first->second;
    for (std::int64_t i = 0; i < s.length_s(); ++i) {
      const std::int64_t t = s.start_s + i;
      if (t < 0 || t >= span) continue;
      const auto& sample = s.samples[static_cast<std::size_t>(i)];
      if (sample.dl_bits > 0 || sample.ul_bits > 0) a[static_cast<std::size_t>(t)] = 1.0;
    }
  }

  double best = -2.0, second = -2.0;
  std::uint16_t best_rnti = 0;
  for (const auto& [rnti, a] : activity) {
    const double score = checked_pearson(a, wave);
    if (score > best) {
      second = best;
      best = score;
      best_rnti = rnti;
    } else if (score > second) {
      second = score;
    }
  }
  if (best <= 0.9) throw NoWatermarkFound("best activity correlation " + std::to_string(best));
  if (second > -2.0 && best - second < 0.01)
    throw AmbiguousWatermark("two RNTIs within 0.01 of the best score");
  return Rnti(best_rnti);
}

std::vector<Session> split_and_label(const std::vector<Session>& watermark_sessions,
                                     synth::AppClass app) {
  std::vector<Session> labeled = watermark_sessions;
  for (auto& s : labeled) s.label = synth::tag(app);
  return labeled;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw DegenerateInput("pearson needs two equal-length series of length >= 2");
  const double n = static_cast<double>(a.size());
  double mean_a = 0, mean_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0, var_a = 0, var_b = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0 || var_b == 0) throw DegenerateInput("zero variance series");
  return cov / std::sqrt(var_a * var_b);
}

std::vector<double> session_correlation_profile(const std::vector<Session>& sessions) {
  if (sessions.empty()) throw DegenerateInput("no sessions");
  std::vector<double> profile(sessions.size());
  profile[0] = 1.0;
  for (std::size_t n = 1; n < sessions.size(); ++n) {
    const auto len = static_cast<std::size_t>(
        std::min(sessions[0].length_s(), sessions[n].length_s()));
    std::vector<double> a(len), b(len);
    for (std::size_t i = 0; i < len; ++i) {
      a[i] = static_cast<double>(sessions[0].samples[i].dl_bits);
      b[i] = static_cast<double>(sessions[n].samples[i].dl_bits);
    }
    profile[n] = pearson(a, b);
  }
  return profile;
}

std::vector<WindowSample> make_windows(const Session& session, const WindowingParams& params) {
  if (params.w_s < 1 || params.stride_s < 1) throw Error("window and stride must be >= 1");
  std::vector<WindowSample> windows;
  const auto n = session.length_s();
  const auto w = static_cast<std::int64_t>(params.w_s);
  if (n < w) return windows;
  const auto make = [&](std::int64_t start) {
    WindowSample sample;
    sample.w = params.w_s;
    sample.values.resize(static_cast<std::size_t>(w) * 2);
    for (std::int64_t t = 0; t < w; ++t) {
      const auto& src = session.samples[static_cast<std::size_t>(start + t)];
      sample.at(static_cast<int>(t), 0) = static_cast<double>(src.dl_bits);
      sample.at(static_cast<int>(t), 1) = static_cast<double>(src.ul_bits);
    }
    sample.label = session.label;
    sample.source_rnti = session.rnti.value();
    sample.source_start_s = session.start_s + start;
    return sample;
  };
  if (params.mode == WindowMode::Synchronous) {
    windows.push_back(make(0));
  } else {
    for (std::int64_t start = 0; start + w <= n; start += params.stride_s)
      windows.push_back(make(start));
  }
  return windows;
}

void normalize_windows(std::vector<WindowSample>& samples) {
  for (auto& s : samples) {
    double max_value = 0;
    for (double v : s.values) max_value = std::max(max_value, v);
    if (max_value == 0) continue;
    for (double& v : s.values) v /= max_value;
  }
}

void save_windows(const std::vector<WindowSample>& samples, const std::string& path) {
  const std::uint64_t w = samples.empty() ? 0 : static_cast<std::uint64_t>(samples[0].w);
  for (const auto& s : samples)
    if (static_cast<std::uint64_t>(s.w) != w) throw Error("mixed window lengths");

  // label map in first-appearance order
  std::vector<std::string> labels;
  auto label_id = [&](const std::optional<std::string>& label) -> std::int32_t {
    if (!label) return -1;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == *label) return static_cast<std::int32_t>(i);
    labels.push_back(*label);
    return static_cast<std::int32_t>(labels.size() - 1);
  };
  std::vector<std::int32_t> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(label_id(s.label));

  std::string out;
  out.append("DCIW", 4);
  put_u32(out, 1);  // version
  put_u64(out, samples.size());
  put_u64(out, w);
  put_u64(out, 2);  // D
  put_u32(out, static_cast<std::uint32_t>(labels.size()));
  for (const auto& l : labels) {
    put_u32(out, static_cast<std::uint32_t>(l.size()));
    out.append(l);
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    put_u32(out, static_cast<std::uint32_t>(ids[i]));
    put_u32(out, samples[i].source_rnti);
    put_u64(out, static_cast<std::uint64_t>(samples[i].source_start_s));
    out.append(reinterpret_cast<const char*>(samples[i].values.data()),
               samples[i].values.size() * sizeof(double));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

std::vector<WindowSample> load_windows(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open window file " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > data.size()) throw Error("truncated window file " + path);
  };
  auto get_u32 = [&] {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, data.data() + pos, 4);
    pos += 4;
    return v;
  };
  auto get_u64 = [&] {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, data.data() + pos, 8);
    pos += 8;
    return v;
  };
  need(4);
  if (data.compare(0, 4, "DCIW") != 0) throw Error("bad magic in " + path);
  pos = 4;
  if (get_u32() != 1) throw Error("unsupported window file version");
  const std::uint64_t m = get_u64();
  const std::uint64_t w = get_u64();
  if (get_u64() != 2) throw Error("unsupported direction count");
  const std::uint32_t label_count = get_u32();
  std::vector<std::string> labels(label_count);
  for (auto& l : labels) {
    const std::uint32_t len = get_u32();
    need(len);
    l = data.substr(pos, len);
    pos += len;
  }
  std::vector<WindowSample> samples(m);
  for (auto& s : samples) {
    const auto id = static_cast<std::int32_t>(get_u32());
    if (id >= 0) {
      if (static_cast<std::uint32_t>(id) >= label_count) throw Error("label id out of range");
      s.label = labels[static_cast<std::size_t>(id)];
    }
    s.source_rnti = static_cast<std::uint16_t>(get_u32());
    s.source_start_s = static_cast<std::int64_t>(get_u64());
    s.w = static_cast<int>(w);
    s.values.resize(w * 2);
    need(s.values.size() * sizeof(double));
    std::memcpy(s.values.data(), data.data() + pos, s.values.size() * sizeof(double));
    pos += s.values.size() * sizeof(double);
  }
  if (pos != data.size()) throw Error("trailing bytes in window file");
  return samples;
}

}  // namespace dci
