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

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "dispatch_internal.hpp"
#include "wfsmc/kernels.hpp"

namespace wfsmc::kernels {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(WFSMC_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

SimdLevel initial_level() {
  const SimdLevel best = cpu_has_avx2() ? SimdLevel::avx2 : SimdLevel::scalar;
  const char* env = std::getenv("WFSMC_SIMD");
  if (env == nullptr) return best;
  const std::string want(env);
  if (want == "scalar") return SimdLevel::scalar;
  if (want == "avx2" && best == SimdLevel::avx2) return SimdLevel::avx2;
  return best;
}

std::atomic<SimdLevel>& current() {
  static std::atomic<SimdLevel> level{initial_level()};
  return level;
}

}  // namespace

const KernelTable* avx2_table() noexcept {
#if defined(WFSMC_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

SimdLevel best_available() noexcept {
  return avx2_table() != nullptr ? SimdLevel::avx2 : SimdLevel::scalar;
}

const KernelTable& active() noexcept {
  if (current().load(std::memory_order_relaxed) == SimdLevel::avx2) {
    return *avx2_table();
  }
  return scalar_table();
}

SimdLevel active_level() noexcept { return current().load(std::memory_order_relaxed); }

void select(SimdLevel level) {
  if (level == SimdLevel::avx2 && avx2_table() == nullptr) {
    throw std::runtime_error("AVX2 kernels are not available on this machine");
  }
  current().store(level, std::memory_order_relaxed);
}

std::string_view level_name(SimdLevel level) noexcept {
  return level == SimdLevel::avx2 ? "avx2" : "scalar";
}

}  // namespace wfsmc::kernels
