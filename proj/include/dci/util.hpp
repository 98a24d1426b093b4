#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dci {

// Base class for all library errors. CLI maps these onto exit codes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Artifact files that do not fit together or fail their self-checks
// (hash mismatches, malformed model/detector files). Exit code 3 in the CLI.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

// splitmix64 step; used to derive independent per-entity RNG seeds so that
// parallel and serial generation produce identical output.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

// FNV-1a over a byte range; stable across platforms, used for artifact
// compatibility hashes (model files, detector files).
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

}  // namespace dci
