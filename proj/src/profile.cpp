#include "dci/profile.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "dci/sessionize.hpp"
#include "dci/synth.hpp"

namespace dci::profile {
namespace {

constexpr int kOodShare = synth::kServiceCount;  // share slot after the services

int hour_of(std::int64_t second) {
  return static_cast<int>((second / 3600) % 24);
}

}  // namespace

VolumeCurve aggregate_volume(const std::vector<Session>& sessions) {
  VolumeCurve curve;
  std::array<double, 24> bits{};
  for (const auto& s : sessions)
    for (std::int64_t i = 0; i < s.length_s(); ++i) {
      const auto& sample = s.samples[static_cast<std::size_t>(i)];
      bits[static_cast<std::size_t>(hour_of(s.start_s + i))] +=
          static_cast<double>(sample.dl_bits + sample.ul_bits);
    }
  const double peak = *std::max_element(bits.begin(), bits.end());
  if (peak <= 0) return curve;  // all-zero curve, normalization flag unset
  for (std::size_t h = 0; h < 24; ++h) curve.buckets[h] = bits[h] / peak;
  curve.normalized = true;
  return curve;
}

HourlyDecomposition decompose(const Trace& trace, const learn::SavedModel& classifier,
                              const ood::OodDetector& detector,
                              const WindowingParams& windowing, Weighting weighting,
                              std::int64_t idle_gap_s, std::int64_t min_len_s, Exec exec) {
  const auto sessions = extract_sessions(trace, idle_gap_s, min_len_s);

  // session label ids: 0..2 services, kOodShare for rejected/unwindowable
  std::vector<int> session_label(sessions.size(), kOodShare);
  std::vector<WindowSample> all_windows;
  std::vector<std::size_t> window_session;
  for (std::size_t si = 0; si < sessions.size(); ++si) {
    auto windows = make_windows(sessions[si], windowing);
    normalize_windows(windows);
    for (auto& w : windows) {
      all_windows.push_back(std::move(w));
      window_session.push_back(si);
    }
  }

  const ood::ProbaFn proba = [&](const WindowSample& w) { return classifier.proba(w); };
  const auto gates = ood::classify_with_ood_batch(detector, proba, all_windows, exec);

  std::vector<std::array<int, 4>> tally(sessions.size(), {0, 0, 0, 0});
  std::vector<int> window_count(sessions.size(), 0);
  for (std::size_t wi = 0; wi < gates.size(); ++wi) {
    const auto si = window_session[wi];
    ++window_count[si];
    if (gates[wi].is_ood) {
      ++tally[si][kOodShare];
      continue;
    }
    int service = gates[wi].cls;
    if (classifier.meta.task == learn::Task::App)
      service = static_cast<int>(synth::service_of(static_cast<synth::AppClass>(gates[wi].cls)));
    ++tally[si][static_cast<std::size_t>(service)];
  }
  for (std::size_t si = 0; si < sessions.size(); ++si) {
    if (window_count[si] == 0) continue;  // unwindowable stays OOD
    if (2 * tally[si][kOodShare] >= window_count[si]) continue;  // majority rejected
    int best = 0;
    for (int c = 1; c < synth::kServiceCount; ++c)
      if (tally[si][static_cast<std::size_t>(c)] > tally[si][static_cast<std::size_t>(best)])
        best = c;
    session_label[si] = best;
  }

  HourlyDecomposition out;
  out.volume = aggregate_volume(sessions);
  out.sessions_total = static_cast<std::int64_t>(sessions.size());
  std::array<std::array<double, 4>, 24> weight{};
  std::array<std::array<bool, 4>, 24> touched{};
  for (std::size_t si = 0; si < sessions.size(); ++si) {
    const auto label = static_cast<std::size_t>(session_label[si]);
    if (session_label[si] == kOodShare) ++out.sessions_ood;
    const auto& s = sessions[si];
    for (std::int64_t i = 0; i < s.length_s(); ++i) {
      const auto h = static_cast<std::size_t>(hour_of(s.start_s + i));
      const auto& sample = s.samples[static_cast<std::size_t>(i)];
      out.buckets[h].total_bits += sample.dl_bits + sample.ul_bits;
      out.buckets[h].any = true;
      if (weighting == Weighting::Bits)
        weight[h][label] += static_cast<double>(sample.dl_bits + sample.ul_bits);
      else
        touched[h][label] = true;  // one count per session per hour it spans
    }
    if (weighting == Weighting::Sessions)
      for (std::size_t h = 0; h < 24; ++h)
        if (touched[h][label]) {
          weight[h][label] += 1.0;
          touched[h][label] = false;
        }
  }
  for (std::size_t h = 0; h < 24; ++h) {
    double total = 0;
    for (double w : weight[h]) total += w;
    if (total <= 0) continue;
    out.buckets[h].audio = weight[h][0] / total;
    out.buckets[h].video = weight[h][1] / total;
    out.buckets[h].call = weight[h][2] / total;
    out.buckets[h].ood = weight[h][3] / total;
  }
  return out;
}

std::string render_report(const HourlyDecomposition& d) {
  std::string out = "hour,total_bits,audio,video,call,ood\n";
  char line[160];
  for (int h = 0; h < 24; ++h) {
    const auto& b = d.buckets[static_cast<std::size_t>(h)];
    if (!b.any) continue;
    std::snprintf(line, sizeof line, "%d,%lld,%.4f,%.4f,%.4f,%.4f\n", h,
                  static_cast<long long>(b.total_bits), b.audio, b.video, b.call, b.ood);
    out += line;
  }
  return out;
}

std::string render_summary(const HourlyDecomposition& d) {
  std::int64_t total = 0;
  for (const auto& b : d.buckets) total += b.total_bits;
  std::ostringstream os;
  os << "sessions: " << d.sessions_total << " (" << d.sessions_ood << " ood)\n"
     << "total bits: " << total << '\n';
  return os.str();
}

}  // namespace dci::profile
