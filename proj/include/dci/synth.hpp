#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dci/core.hpp"
#include "dci/parallel.hpp"

namespace dci::synth {

class InvalidModel : public Error {
 public:
  using Error::Error;
};

class TooManyUsers : public Error {
 public:
  using Error::Error;
};

enum class ServiceClass : int { AudioStreaming = 0, VideoStreaming = 1, VideoCall = 2 };
enum class AppClass : int {
  Spotify = 0,
  GoogleMusic = 1,
  YouTube = 2,
  Vimeo = 3,
  Skype = 4,
  WhatsApp = 5
};

constexpr int kServiceCount = 3;
constexpr int kAppCount = 6;

ServiceClass service_of(AppClass app);

const char* tag(ServiceClass s);
const char* tag(AppClass a);
std::optional<AppClass> app_from_tag(const std::string& tag);
std::optional<ServiceClass> service_from_tag(const std::string& tag);
// Service class for either an app tag or a service tag.
std::optional<ServiceClass> service_of_label(const std::string& label);

// Per-app shape parameters. Streaming apps buffer at burst_rate_bps for
// burst_duration_s, then fetch one chunk of steady_rate_bps*chunk_period_s
// bits every chunk_period_s. Video calls send steady bidirectional traffic.
// Uplink is ul_dl_ratio times the downlink target. noise_cv is the
// coefficient of variation of multiplicative log-normal noise.
struct TrafficModel {
  AppClass app = AppClass::Spotify;
  double burst_rate_bps = 0;
  double steady_rate_bps = 0;
  double ul_dl_ratio = 0;
  double burst_duration_s = 0;
  double chunk_period_s = 0;
  double noise_cv = 0;
  std::uint64_t seed = 0;
};

// Repo constants; synthetic rates, the real apps only fix the shapes.
TrafficModel preset(AppClass app);
// Traffic unlike any of the trained classes; used to exercise the
// out-of-distribution path (moderate chunky downlink, mid-range uplink).
TrafficModel unknown_preset();

struct WatermarkSpec {
  std::int64_t on_duration_s = 60;
  std::int64_t pause_duration_s = 10;
  std::int64_t repetitions = 1;

  std::int64_t period_s() const { return on_duration_s + pause_duration_s; }
  std::int64_t span_s() const { return repetitions * period_s(); }
};

void validate(const TrafficModel& m);
void validate(const WatermarkSpec& spec);

// Per-second bit targets for one user. Deterministic for a fixed seed.
// Every second carries at least one minimal downlink grant (keep-alive), so
// an active session is active in every second.
Session generate_session(const TrafficModel& model, std::int64_t duration_s,
                         std::uint64_t seed);

struct CellUserSpec {
  TrafficModel model;
  int count = 1;
};

struct CellTrace {
  Trace trace;
  std::vector<Rnti> user_rntis;          // background users, generation order
  std::optional<Rnti> watermark_rnti;
};

// Multiplexes users onto one synthetic PDCCH trace. Each user gets a
// distinct random C-RNTI and an activity interval; per active second the
// bit target is quantized into per-TTI records by greedy table fill
// (largest entry <= remaining, then one smallest entry for the residue).
// The optional watermark user follows the on/pause duty cycle exactly.
// Generation is parallel across users; per-user seeds derived from
// (seed, rnti) keep the output independent of the execution policy.
CellTrace generate_cell_trace(const std::vector<CellUserSpec>& users,
                              const std::optional<std::pair<TrafficModel, WatermarkSpec>>& watermark,
                              std::int64_t duration_s, std::uint64_t seed,
                              const std::vector<Rnti>& excluded_rntis = {},
                              Exec exec = Exec::Parallel);

// Greedy bits->records quantization for one (second, direction); exposed for
// tests. Appends at most 1000 records (one per TTI).
void fill_second(std::vector<DciRecord>& out, Rnti rnti, Direction dir,
                 std::int64_t second, std::int64_t target_bits);

}  // namespace dci::synth
