#include "dci/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace dci::synth {
namespace {

bool is_streaming(ServiceClass s) { return s != ServiceClass::VideoCall; }

// Shape value for one second, before noise and keep-alive floor.
double dl_target_bps(const TrafficModel& m, std::int64_t second) {
  if (!is_streaming(service_of(m.app))) return m.steady_rate_bps;
  if (static_cast<double>(second) < m.burst_duration_s) return m.burst_rate_bps;
  const auto since_burst = second - static_cast<std::int64_t>(m.burst_duration_s);
  const auto period = static_cast<std::int64_t>(m.chunk_period_s);
  if (since_burst % period == 0) return m.steady_rate_bps * m.chunk_period_s;
  return 0.0;
}

}  // namespace

ServiceClass service_of(AppClass app) {
  switch (app) {
    case AppClass::Spotify:
    case AppClass::GoogleMusic:
      return ServiceClass::AudioStreaming;
    case AppClass::YouTube:
    case AppClass::Vimeo:
      return ServiceClass::VideoStreaming;
    case AppClass::Skype:
    case AppClass::WhatsApp:
      return ServiceClass::VideoCall;
  }
  throw Error("bad AppClass");
}

const char* tag(ServiceClass s) {
  switch (s) {
    case ServiceClass::AudioStreaming: return "audio";
    case ServiceClass::VideoStreaming: return "video";
    case ServiceClass::VideoCall: return "call";
  }
  throw Error("bad ServiceClass");
}

const char* tag(AppClass a) {
  switch (a) {
    case AppClass::Spotify: return "spotify";
    case AppClass::GoogleMusic: return "gmusic";
    case AppClass::YouTube: return "youtube";
    case AppClass::Vimeo: return "vimeo";
    case AppClass::Skype: return "skype";
    case AppClass::WhatsApp: return "whatsapp";
  }
  throw Error("bad AppClass");
}

std::optional<AppClass> app_from_tag(const std::string& t) {
  for (int a = 0; a < kAppCount; ++a)
    if (t == tag(static_cast<AppClass>(a))) return static_cast<AppClass>(a);
  return std::nullopt;
}

std::optional<ServiceClass> service_from_tag(const std::string& t) {
  for (int s = 0; s < kServiceCount; ++s)
    if (t == tag(static_cast<ServiceClass>(s))) return static_cast<ServiceClass>(s);
  return std::nullopt;
}

std::optional<ServiceClass> service_of_label(const std::string& label) {
  if (auto s = service_from_tag(label)) return s;
  if (auto a = app_from_tag(label)) return service_of(*a);
  return std::nullopt;
}

TrafficModel preset(AppClass app) {
  switch (app) {
    case AppClass::Spotify:
      return {app, 2.0e6, 160e3, 0.05, 8, 10, 0.20, 0};
    case AppClass::GoogleMusic:
      return {app, 1.2e6, 128e3, 0.05, 5, 6, 0.20, 0};
    case AppClass::YouTube:
      return {app, 8.0e6, 2.5e6, 0.03, 10, 4, 0.25, 0};
    case AppClass::Vimeo:
      return {app, 5.0e6, 2.0e6, 0.03, 6, 3, 0.25, 0};
    case AppClass::Skype:
      return {app, 1.5e6, 1.5e6, 0.90, 1, 1, 0.15, 0};
    case AppClass::WhatsApp:
      return {app, 1.1e6, 1.1e6, 0.95, 1, 1, 0.15, 0};
  }
  throw Error("bad AppClass");
}

TrafficModel unknown_preset() {
  // steady downlink with half-rate uplink and heavy jitter: between the
  // streaming and calling shapes, resembling no single training class
  TrafficModel m{AppClass::Skype, 3.0e6, 3.0e6, 0.55, 1, 1, 0.30, 0};
  return m;
}

void validate(const TrafficModel& m) {
  if (!(m.burst_rate_bps > 0) || !(m.steady_rate_bps > 0))
    throw InvalidModel("rates must be positive");
  if (!(m.noise_cv >= 0) || m.noise_cv >= 1)
    throw InvalidModel("noise_cv must lie in [0, 1)");
  if (!(m.ul_dl_ratio > 0)) throw InvalidModel("ul_dl_ratio must be positive");
  if (is_streaming(service_of(m.app))) {
    if (m.ul_dl_ratio > 0.1)
      throw InvalidModel("streaming ul_dl_ratio must be <= 0.1");
    if (!(m.burst_rate_bps > m.steady_rate_bps))
      throw InvalidModel("streaming burst rate must exceed steady rate");
    if (m.burst_duration_s < 1 || m.chunk_period_s < 1)
      throw InvalidModel("burst duration and chunk period must be >= 1 s");
  } else {
    if (m.ul_dl_ratio < 0.5 || m.ul_dl_ratio > 1.5)
      throw InvalidModel("video call ul_dl_ratio must be near 1");
  }
}

void validate(const WatermarkSpec& spec) {
  if (spec.on_duration_s <= 0 || spec.pause_duration_s <= 0 || spec.repetitions <= 0)
    throw InvalidModel("watermark durations and repetitions must be positive");
}

Session generate_session(const TrafficModel& model, std::int64_t duration_s,
                         std::uint64_t seed) {
  validate(model);
  if (duration_s < 1) throw InvalidModel("duration_s must be >= 1");
  std::mt19937_64 rng(seed);
  // lognormal with unit mean and the requested coefficient of variation
  const double sigma2 = std::log(1.0 + model.noise_cv * model.noise_cv);
  std::lognormal_distribution<double> noise(-0.5 * sigma2, std::sqrt(sigma2));
  const std::int64_t floor_bits = min_tbs_bits();

  Session session{Rnti(Rnti::kMin), 0, {}, std::nullopt};
  session.samples.reserve(static_cast<std::size_t>(duration_s));
  for (std::int64_t t = 0; t < duration_s; ++t) {
    const double dl_shape = dl_target_bps(model, t);
    const double ul_shape = dl_shape * model.ul_dl_ratio;
    const double dl = model.noise_cv > 0 ? dl_shape * noise(rng) : dl_shape;
    const double ul = model.noise_cv > 0 ? ul_shape * noise(rng) : ul_shape;
    SessionSample sample;
    sample.dl_bits = std::max<std::int64_t>(std::llround(dl), floor_bits);
    sample.ul_bits = std::max<std::int64_t>(std::llround(ul), 0);
    session.samples.push_back(sample);
  }
  return session;
}

void fill_second(std::vector<DciRecord>& out, Rnti rnti, Direction dir,
                 std::int64_t second, std::int64_t target_bits) {
  if (target_bits <= 0) return;
  std::int64_t remaining = target_bits;
  int tti = 0;
  while (remaining > 0 && tti < 1000) {
    const TbsEntry* entry = largest_tbs_at_most(remaining);
    if (entry == nullptr) entry = &tbs_table().front();  // smallest entry for the residue
    out.push_back({second * 1000 + tti, rnti, dir, entry->mcs, entry->n_rb, entry->tbs_bits});
    remaining -= entry->tbs_bits;
    ++tti;
  }
}

CellTrace generate_cell_trace(const std::vector<CellUserSpec>& users,
                              const std::optional<std::pair<TrafficModel, WatermarkSpec>>& watermark,
                              std::int64_t duration_s, std::uint64_t seed,
                              const std::vector<Rnti>& excluded_rntis, Exec exec) {
  if (duration_s < 1) throw InvalidModel("duration_s must be >= 1");
  std::size_t total_users = watermark ? 1 : 0;
  for (const auto& u : users) {
    if (u.count < 0) throw InvalidModel("negative user count");
    validate(u.model);
    total_users += static_cast<std::size_t>(u.count);
  }
  if (watermark) {
    validate(watermark->first);
    validate(watermark->second);
  }
  const std::size_t rnti_space = Rnti::kMax - Rnti::kMin + 1;
  if (total_users + excluded_rntis.size() > rnti_space)
    throw TooManyUsers("requested " + std::to_string(total_users) + " users");

  // distinct C-RNTIs, rejection-sampled from the valid range
  std::mt19937_64 rnti_rng(mix_seed(seed, 0x52'4e'54'49ULL));
  std::uniform_int_distribution<std::uint32_t> pick(Rnti::kMin, Rnti::kMax);
  std::set<std::uint16_t> used;
  for (const auto& r : excluded_rntis) used.insert(r.value());
  auto next_rnti = [&] {
    for (;;) {
      auto v = static_cast<std::uint16_t>(pick(rnti_rng));
      if (used.insert(v).second) return Rnti(v);
    }
  };

  struct UserPlan {
    TrafficModel model;
    Rnti rnti;
    std::int64_t start_s, active_s;
    bool is_watermark;
    WatermarkSpec spec;
  };
  std::vector<UserPlan> plans;
  CellTrace result;
  for (const auto& u : users) {
    for (int i = 0; i < u.count; ++i) {
      Rnti rnti = next_rnti();
      result.user_rntis.push_back(rnti);
      UserPlan plan{u.model, rnti, 0, duration_s, false, {}};
      if (duration_s >= 20) {
        // background users come and go within the trace
        std::mt19937_64 plan_rng(mix_seed(seed, 0x504c414eULL ^ rnti.value()));
        std::uniform_int_distribution<std::int64_t> start(0, duration_s / 3);
        plan.start_s = start(plan_rng);
        std::uniform_int_distribution<std::int64_t> len(
            std::max<std::int64_t>(10, duration_s / 8), duration_s - plan.start_s);
        plan.active_s = len(plan_rng);
      }
      plans.push_back(plan);
    }
  }
  if (watermark) {
    Rnti rnti = next_rnti();
    result.watermark_rnti = rnti;
    plans.push_back({watermark->first, rnti, 0, duration_s, true, watermark->second});
  }

  std::vector<std::vector<DciRecord>> per_user(plans.size());
  for_each_index(plans.size(), exec, [&](std::size_t i) {
    const UserPlan& plan = plans[i];
    auto& records = per_user[i];
    if (plan.is_watermark) {
      const auto& spec = plan.spec;
      for (std::int64_t rep = 0; rep < spec.repetitions; ++rep) {
        const std::int64_t offset = rep * spec.period_s();
        if (offset >= plan.active_s) break;
        const std::int64_t on = std::min(spec.on_duration_s, plan.active_s - offset);
        Session s = generate_session(plan.model, on,
                                     mix_seed(seed, plan.rnti.value() * 1000ULL + static_cast<std::uint64_t>(rep)));
        for (std::int64_t t = 0; t < on; ++t) {
          fill_second(records, plan.rnti, Direction::Downlink, offset + t,
                      s.samples[static_cast<std::size_t>(t)].dl_bits);
          fill_second(records, plan.rnti, Direction::Uplink, offset + t,
                      s.samples[static_cast<std::size_t>(t)].ul_bits);
        }
      }
    } else {
      Session s = generate_session(plan.model, plan.active_s,
                                   mix_seed(seed, plan.rnti.value()));
      for (std::int64_t t = 0; t < plan.active_s; ++t) {
        fill_second(records, plan.rnti, Direction::Downlink, plan.start_s + t,
                    s.samples[static_cast<std::size_t>(t)].dl_bits);
        fill_second(records, plan.rnti, Direction::Uplink, plan.start_s + t,
                    s.samples[static_cast<std::size_t>(t)].ul_bits);
      }
    }
  });

  std::size_t total = 0;
  for (const auto& r : per_user) total += r.size();
  result.trace.records.reserve(total);
  for (const auto& r : per_user)
    result.trace.records.insert(result.trace.records.end(), r.begin(), r.end());
  std::sort(result.trace.records.begin(), result.trace.records.end(),
            [](const DciRecord& a, const DciRecord& b) {
              if (a.tti_ms != b.tti_ms) return a.tti_ms < b.tti_ms;
              if (a.rnti != b.rnti) return a.rnti < b.rnti;
              return a.dir < b.dir;
            });
  result.trace.duration_ms =
      result.trace.records.empty() ? 0 : result.trace.records.back().tti_ms + 1;
  return result;
}

}  // namespace dci::synth
