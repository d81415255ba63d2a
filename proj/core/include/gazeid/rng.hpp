#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gazeid {

/// Explicit random stream threaded through every stochastic operation.
using RngStream = std::mt19937_64;

/// 64-bit FNV-1a; stable across platforms, used for seed derivation and config hashes.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Derive an independent stream seed from a base seed and labels, e.g.
/// (seed, reader_id, role). Results never depend on scheduling order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view a,
                          std::string_view b = {});

inline RngStream make_stream(std::uint64_t seed, std::string_view a = {},
                             std::string_view b = {}) {
  return RngStream(derive_seed(seed, a, b));
}

}  // namespace gazeid
