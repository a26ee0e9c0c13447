// Copyright 2026 The wfsmc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wfsmc/rng.hpp"

#include <bit>

namespace wfsmc {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> salts) noexcept {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t s : salts) h = splitmix64(h ^ splitmix64(s + 0x632BE59BD9B4E019ull));
  return h;
}

std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

kernels::PhiloxKey key_from_seed(std::uint64_t seed) noexcept {
  const std::uint64_t k = splitmix64(seed);
  return {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

double uniform01(kernels::PhiloxKey key, std::uint32_t a, std::uint32_t b,
                 std::uint32_t c, StreamTag tag) noexcept {
  const kernels::PhiloxBlock out = kernels::philox4x32_10(
      {{a, b, c, static_cast<std::uint32_t>(tag)}}, key);
  const std::uint64_t bits = (static_cast<std::uint64_t>(out.v[0]) << 32) | out.v[1];
  return std::bit_cast<double>((bits >> 12) | 0x3FF0000000000000ull) - 1.0;
}

}  // namespace wfsmc
