#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dci/learn.hpp"
#include "dci/ood.hpp"

namespace dci::profile {

struct VolumeCurve {
  std::array<double, 24> buckets{};
  bool normalized = false;  // unset for an all-zero trace
};

// Sums session bits into trace-relative hour buckets (wrapping past 24 h)
// and scales the curve so the peak is 1.
VolumeCurve aggregate_volume(const std::vector<Session>& sessions);

struct HourBucket {
  std::int64_t total_bits = 0;
  // bit-volume (or session-count) shares; sum to 1 when the bucket is non-empty
  double audio = 0, video = 0, call = 0, ood = 0;
  bool any = false;
};

struct HourlyDecomposition {
  std::array<HourBucket, 24> buckets{};
  VolumeCurve volume;
  std::int64_t sessions_total = 0;
  std::int64_t sessions_ood = 0;
};

enum class Weighting { Bits, Sessions };

// Full unsupervised pass: sessionize, window, classify every window through
// the OOD gate, majority-vote a label per session (OOD when at least half of
// its windows are rejected, or when it is too short to window), then
// accumulate per-hour shares. App-task classifiers are folded to services.
HourlyDecomposition decompose(const Trace& trace, const learn::SavedModel& classifier,
                              const ood::OodDetector& detector,
                              const WindowingParams& windowing,
                              Weighting weighting = Weighting::Bits,
                              std::int64_t idle_gap_s = 5, std::int64_t min_len_s = 5,
                              Exec exec = Exec::Parallel);

// CSV "hour,total_bits,audio,video,call,ood" with shares to 4 decimals.
std::string render_report(const HourlyDecomposition& d);
// Human-readable totals for the console.
std::string render_summary(const HourlyDecomposition& d);

}  // namespace dci::profile
