#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dsm {

// Platform-stable 64-bit hashing. Byte encodings are explicit little-endian so
// the same inputs produce the same values everywhere.
class StableHasher {
 public:
  explicit StableHasher(std::uint64_t seed = 0) { add_u64(seed); }

  StableHasher& add_bytes(std::string_view bytes);
  StableHasher& add_u64(std::uint64_t value);
  // Length-prefixed so that ("ab","c") and ("a","bc") differ.
  StableHasher& add_string(std::string_view s);

  std::uint64_t digest() const;

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

// One step of the splitmix64 generator; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

// Uniform double in [0, 1) from the top 53 bits.
inline double unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

std::string hex64(std::uint64_t value);

}  // namespace dsm
