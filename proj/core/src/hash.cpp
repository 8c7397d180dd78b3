#include "dsm/hash.hpp"

#include <cstdio>

namespace dsm {

namespace {
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;
}

StableHasher& StableHasher::add_bytes(std::string_view bytes) {
  for (unsigned char c : bytes) {
    state_ ^= c;
    state_ *= kFnvPrime;
  }
  return *this;
}

StableHasher& StableHasher::add_u64(std::uint64_t value) {
  for (int i = 0; i < 8; ++i) {
    state_ ^= (value >> (8 * i)) & 0xffU;
    state_ *= kFnvPrime;
  }
  return *this;
}

StableHasher& StableHasher::add_string(std::string_view s) {
  add_u64(s.size());
  return add_bytes(s);
}

std::uint64_t StableHasher::digest() const {
  // FNV alone mixes the high bits poorly; finish with splitmix.
  std::uint64_t s = state_;
  return splitmix64(s);
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace dsm
