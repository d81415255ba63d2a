#include "gazeid/rng.hpp"

namespace gazeid {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view a,
                          std::string_view b) {
  // Length-prefix the labels so ("ab", "c") and ("a", "bc") differ.
  std::uint64_t h = mix64(seed);
  h = fnv1a64(a, h ^ mix64(a.size() + 1));
  h = fnv1a64(b, h ^ mix64(b.size() + 0x51));
  return mix64(h);
}

}  // namespace gazeid
