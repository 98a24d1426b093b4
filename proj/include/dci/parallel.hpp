#pragma once

#include <cstddef>
#include <cstdint>

namespace dci {

// Execution policy for the batch kernels. Serial is the reference path;
// Parallel runs the same per-item code under OpenMP. Each item writes only
// its own output slot, so both policies produce bit-identical results.
enum class Exec { Serial, Parallel };

template <typename F>
void for_each_index(std::size_t n, Exec exec, F&& f) {
  if (exec == Exec::Parallel) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
      f(static_cast<std::size_t>(i));
    }
    return;
#endif
  }
  for (std::size_t i = 0; i < n; ++i) {
    f(i);
  }
}

}  // namespace dci
