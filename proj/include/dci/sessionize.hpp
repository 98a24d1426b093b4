#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dci/core.hpp"
#include "dci/synth.hpp"

namespace dci {

class NoWatermarkFound : public Error {
 public:
  using Error::Error;
};

class AmbiguousWatermark : public Error {
 public:
  using Error::Error;
};

class DegenerateInput : public Error {
 public:
  using Error::Error;
};

// One classifier input row: W seconds by 2 channels (DL, UL).
struct WindowSample {
  int w = 0;
  std::vector<double> values;  // row-major, values[t*2 + c]
  std::optional<std::string> label;
  std::uint16_t source_rnti = Rnti::kMin;
  std::int64_t source_start_s = 0;

  double& at(int t, int c) { return values[static_cast<std::size_t>(t) * 2 + c]; }
  double at(int t, int c) const { return values[static_cast<std::size_t>(t) * 2 + c]; }
};

enum class WindowMode { Synchronous, Asynchronous };

struct WindowingParams {
  int w_s = 40;
  int stride_s = 15;
  WindowMode mode = WindowMode::Asynchronous;
};

// Groups records per RNTI into per-second activity, splits on idle gaps of
// at least idle_gap_s seconds and drops sessions shorter than min_len_s
// (signaling/paging filter). Output sorted by (rnti, start_s).
std::vector<Session> extract_sessions(const Trace& trace, std::int64_t idle_gap_s = 5,
                                      std::int64_t min_len_s = 5);

// RNTI whose binary per-second activity best matches the on/pause square
// wave over the watermark span, by Pearson correlation. The winning score
// must exceed 0.9 and lead the runner-up by more than 0.01.
Rnti detect_watermark(const std::vector<Session>& sessions, const synth::WatermarkSpec& spec);

// Attaches the app tag to every session of the detected watermark RNTI.
std::vector<Session> split_and_label(const std::vector<Session>& watermark_sessions,
                                     synth::AppClass app);

double pearson(const std::vector<double>& a, const std::vector<double>& b);

// Element n = pearson(DL series of session 0, DL series of session n) over
// the common prefix; element 0 is 1 by definition.
std::vector<double> session_correlation_profile(const std::vector<Session>& sessions);

std::vector<WindowSample> make_windows(const Session& session, const WindowingParams& params);

// Scales each window by its own max over both channels (all-zero windows are
// left unchanged); values end up in [0, 1].
void normalize_windows(std::vector<WindowSample>& samples);

// Binary window dataset: magic "DCIW", version, M/W/D, label map, then per
// sample its label id, source and W*D float64 values. Little-endian.
void save_windows(const std::vector<WindowSample>& samples, const std::string& path);
std::vector<WindowSample> load_windows(const std::string& path);

}  // namespace dci
