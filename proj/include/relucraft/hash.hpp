#pragma once

#include <bit>
#include <cstdint>
#include <string_view>

namespace relucraft {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive 64-bit hash accumulator. Stable across runs and platforms.
class Hasher {
 public:
  Hasher() = default;
  explicit Hasher(std::string_view tag) { add(tag); }

  Hasher& add(std::uint64_t v) {
    state_ = mix64(state_ ^ v);
    return *this;
  }
  Hasher& add_double(double v) { return add(std::bit_cast<std::uint64_t>(v)); }
  Hasher& add(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    return add(h);
  }

  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0x6a09e667f3bcc908ULL;
};

}  // namespace relucraft
