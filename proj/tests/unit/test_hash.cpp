#include <gtest/gtest.h>

#include <set>
#include <string>

#include "dsm/hash.hpp"

namespace {

// Plain FNV-1a over an explicit byte string.
std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string le64(std::uint64_t v) {
  std::string s;
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  return s;
}

}  // namespace

TEST(Splitmix, ReferenceSequenceFromZero) {
  std::uint64_t state = 0;
  EXPECT_EQ(dsm::splitmix64(state), 0xe220a8397b1dcdafULL);
  EXPECT_EQ(dsm::splitmix64(state), 0x6e789e6aa1b965f4ULL);
  EXPECT_EQ(dsm::splitmix64(state), 0x06c45d188009454fULL);
}

TEST(StableHasher, MatchesByteLevelRecount) {
  const std::string bytes = le64(7) + le64(3) + "abc" + le64(42);
  std::uint64_t state = fnv1a(bytes);
  const std::uint64_t expected = dsm::splitmix64(state);
  EXPECT_EQ(dsm::StableHasher(7).add_string("abc").add_u64(42).digest(), expected);
}

TEST(StableHasher, LengthPrefixSeparatesSplits) {
  const auto a = dsm::StableHasher().add_string("ab").add_string("c").digest();
  const auto b = dsm::StableHasher().add_string("a").add_string("bc").digest();
  EXPECT_NE(a, b);
}

TEST(StableHasher, SeedChangesDigest) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    seen.insert(dsm::StableHasher(seed).add_string("x").digest());
  }
  EXPECT_EQ(seen.size(), 100u);
}

TEST(Hex64, FixedWidthLowercase) {
  EXPECT_EQ(dsm::hex64(0), "0000000000000000");
  EXPECT_EQ(dsm::hex64(0xABCDEF0123456789ULL), "abcdef0123456789");
}

TEST(UnitInterval, Bounds) {
  EXPECT_EQ(dsm::unit_interval(0), 0.0);
  EXPECT_LT(dsm::unit_interval(~0ULL), 1.0);
  EXPECT_EQ(dsm::unit_interval(1ULL << 63), 0.5);
}
