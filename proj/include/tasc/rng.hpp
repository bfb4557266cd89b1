// Copyright 2026 The tasc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace tasc {

inline constexpr std::string_view kRngName = "siphash24-xoshiro256ss";

// SipHash-2-4 with the 128-bit key given as two little-endian words.
std::uint64_t siphash24(std::uint64_t k0, std::uint64_t k1, const std::uint8_t* msg, std::size_t len);

class Xoshiro256ss {
 public:
  explicit Xoshiro256ss(std::array<std::uint64_t, 4> state);

  std::uint64_t next();
  // Uniform on [0, 1) with 53 bits of precision.
  double uniform01();
  // Box-Muller; consumes two uniforms per call, no cached second value.
  double normal(double mu, double sigma);

 private:
  std::array<std::uint64_t, 4> s_;
};

// Independent generator for (seed, index): each state word is SipHash of
// (index, word number) keyed by the seed.
Xoshiro256ss substream(std::uint64_t seed, std::uint64_t index);

}  // namespace tasc
