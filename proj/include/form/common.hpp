// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace form {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error hierarchy. The CLI maps ParamError/usage problems to exit code 2
// and everything else to exit code 1.
struct FormError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem trouble: missing roots, unreadable images, broken cache entries.
struct IoError : FormError {
  using FormError::FormError;
};

// Malformed input data; message carries file and line where possible.
struct ParseError : FormError {
  using FormError::FormError;
};

// Misconfiguration: unknown adapters, missing model artifacts, bad dataset names.
struct ConfigError : FormError {
  using FormError::FormError;
};

// Invalid argument values (k < 1, label out of range, ...).
struct ParamError : FormError {
  using FormError::FormError;
};

// --- small deterministic hashing/PRNG kit -------------------------------
// Used by the toy encoder and the feature store keys. These are pinned
// algorithms (FNV-1a, splitmix64) so recomputing them in tests or external
// tools is trivial and platform-independent.

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Map 64 random bits to a double in [-1, 1).
inline double u64_to_signed_unit(std::uint64_t x) {
  const double u = static_cast<double>(x >> 11) * (1.0 / 9007199254740992.0);  // [0,1)
  return 2.0 * u - 1.0;
}

}  // namespace form
