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

#pragma once

/// \file rng.hpp
/// Seed derivation for counter-based streams.
///
/// A 64-bit seed becomes a Philox key; every random number is then a pure
/// function of (key, particle, step, lane, tag). Nothing depends on the
/// order in which workers visit particles.

#include <cstdint>
#include <initializer_list>
#include <string_view>

#include "wfsmc/kernels.hpp"

namespace wfsmc {

/// Stream tags occupy the fourth counter word.
enum class StreamTag : std::uint32_t {
  diffusion = 0,
  resample = 1,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Mixes a master seed with any number of salts (method, sweep index,
/// replicate, ...). Different salt tuples give unrelated seeds.
std::uint64_t derive_seed(std::uint64_t master,
                          std::initializer_list<std::uint64_t> salts) noexcept;

/// FNV-1a; used to turn method labels into order-independent salts.
std::uint64_t hash_label(std::string_view label) noexcept;

kernels::PhiloxKey key_from_seed(std::uint64_t seed) noexcept;

/// Uniform on [0, 1) from counter (a, b, c, tag).
double uniform01(kernels::PhiloxKey key, std::uint32_t a, std::uint32_t b,
                 std::uint32_t c, StreamTag tag) noexcept;

}  // namespace wfsmc
