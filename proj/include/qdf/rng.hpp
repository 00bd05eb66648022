#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qdf {

// FNV-1a, used to derive independent named streams from one run seed.
constexpr std::uint64_t stream_hash(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Engine for stream `name` under `seed`. Distinct names give decorrelated
/// streams, so e.g. "data" draws are identical across model variants.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::string_view name) {
  const std::uint64_t h = stream_hash(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h),
                    static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace qdf
