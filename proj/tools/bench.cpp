// Compares the serial reference path against the OpenMP path for the three
// batch kernels: cell-trace generation, CNN batch inference, and KSD batch
// scoring. Both paths run the same per-item code and must agree exactly.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"

#include "dci/learn.hpp"
#include "dci/ood.hpp"
#include "dci/parallel.hpp"
#include "dci/synth.hpp"

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_ms(F&& f) {
  const auto t0 = Clock::now();
  f();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void report(const char* name, double serial_ms, double parallel_ms, bool equal) {
  std::printf("%-22s serial %9.1f ms   parallel %9.1f ms   speedup %5.2fx   %s\n", name,
              serial_ms, parallel_ms, serial_ms / parallel_ms, equal ? "outputs equal" : "OUTPUTS DIFFER");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP benchmark for the batch kernels"};
  int users = 150;
  int trace_s = 400;
  int windows = 1500;
  int refs = 400;
  std::uint64_t seed = 42;
  app.add_option("--users", users, "users for trace generation");
  app.add_option("--trace-seconds", trace_s, "trace duration");
  app.add_option("--windows", windows, "windows for inference/KSD");
  app.add_option("--refs", refs, "reference vectors per class");
  app.add_option("--seed", seed, "seed");
  CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP not available; parallel path falls back to serial\n");
#endif

  // --- cell trace generation -----------------------------------------------
  std::vector<dci::synth::CellUserSpec> specs;
  for (int i = 0; i < users; ++i)
    specs.push_back({dci::synth::preset(static_cast<dci::synth::AppClass>(i % dci::synth::kAppCount)), 1});
  dci::synth::CellTrace serial_trace, parallel_trace;
  const double gen_serial = time_ms([&] {
    serial_trace = dci::synth::generate_cell_trace(specs, std::nullopt, trace_s, seed, {},
                                                   dci::Exec::Serial);
  });
  const double gen_parallel = time_ms([&] {
    parallel_trace = dci::synth::generate_cell_trace(specs, std::nullopt, trace_s, seed, {},
                                                     dci::Exec::Parallel);
  });
  report("generate_cell_trace", gen_serial, gen_parallel,
         serial_trace.trace == parallel_trace.trace);

  // --- CNN batch inference --------------------------------------------------
  const int w = 40;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<dci::WindowSample> batch(static_cast<std::size_t>(windows));
  for (auto& win : batch) {
    win.w = w;
    win.values.resize(static_cast<std::size_t>(w) * 2);
    for (auto& v : win.values) v = unit(rng);
  }
  dci::learn::SavedModel model;
  model.meta = {"cnn", dci::learn::Task::Service, 3, {w, 15, dci::WindowMode::Asynchronous}, 0.7, seed};
  model.model = dci::learn::make_cnn(w, 3, seed);
  std::vector<std::vector<double>> probs_serial, probs_parallel;
  const double fwd_serial = time_ms(
      [&] { probs_serial = dci::learn::proba_batch(model, batch, dci::Exec::Serial); });
  const double fwd_parallel = time_ms(
      [&] { probs_parallel = dci::learn::proba_batch(model, batch, dci::Exec::Parallel); });
  report("cnn_batch_forward", fwd_serial, fwd_parallel, probs_serial == probs_parallel);

  // --- KSD batch scoring ------------------------------------------------------
  const int k = 3;
  dci::ood::OodDetector detector;
  detector.threshold = 0.5;
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (int c = 0; c < k; ++c) {
    dci::ood::ClassReferenceSet set;
    set.class_id = c;
    for (int i = 0; i < refs; ++i) {
      std::vector<double> v(static_cast<std::size_t>(k), 0.05);
      v[static_cast<std::size_t>(c)] = 0.9;
      for (auto& x : v) x = std::max(1e-4, x + jitter(rng));
      double sum = 0;
      for (double x : v) sum += x;
      for (auto& x : v) x /= sum;
      set.vectors.push_back(v);
    }
    set.covariance = dci::ood::estimate_covariance(set.vectors, 1e-6);
    detector.classes.push_back(std::move(set));
  }
  const dci::ood::ProbaFn proba = [&](const dci::WindowSample& win) {
    std::vector<double> v(static_cast<std::size_t>(k));
    double sum = 0;
    for (int c = 0; c < k; ++c) {
      v[static_cast<std::size_t>(c)] = 0.05 + win.values[static_cast<std::size_t>(c)];
      sum += v[static_cast<std::size_t>(c)];
    }
    for (auto& x : v) x /= sum;
    return v;
  };
  std::vector<dci::ood::GateResult> ksd_serial, ksd_parallel;
  const double ksd_s = time_ms([&] {
    ksd_serial = dci::ood::classify_with_ood_batch(detector, proba, batch, dci::Exec::Serial);
  });
  const double ksd_p = time_ms([&] {
    ksd_parallel = dci::ood::classify_with_ood_batch(detector, proba, batch, dci::Exec::Parallel);
  });
  bool equal = ksd_serial.size() == ksd_parallel.size();
  for (std::size_t i = 0; equal && i < ksd_serial.size(); ++i)
    equal = ksd_serial[i].cls == ksd_parallel[i].cls &&
            ksd_serial[i].depth == ksd_parallel[i].depth &&
            ksd_serial[i].is_ood == ksd_parallel[i].is_ood;
  report("ksd_batch", ksd_s, ksd_p, equal);
  return 0;
}
