#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace crea {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

// Deterministic integer stream; used to derive stable pseudo-random vectors.
constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string hex64(std::uint64_t value);

// "fnv1a64:<16 hex digits>" over raw bytes / file contents.
std::string fingerprint_bytes(std::string_view data);
std::string fingerprint_file(const std::filesystem::path& path);

}  // namespace crea
