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

/// \file smc.hpp
/// Generic sequential Monte Carlo engine: propose, weight by a potential,
/// resample multinomially when the effective sample size drops, and track
/// the running normalizing-constant estimate in log space.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfsmc/kernels.hpp"

namespace wfsmc {

enum class ResampleMode { adaptive, always, at_steps, never };

struct SmcConfig {
  std::size_t n_particles = 10000;
  /// Adaptive threshold as a fraction of n_particles.
  double ess_fraction = 0.5;
  ResampleMode mode = ResampleMode::adaptive;
  /// Used by ResampleMode::at_steps.
  std::vector<int> resample_steps;
  std::uint64_t seed = 0;
  bool record_diagnostics = false;

  void validate() const;
};

/// Particles with asset-major states plus auxiliary per-particle columns
/// (cashflow accumulators, previous weighting value, ...). Everything is
/// copied together on resampling.
class ParticleSystem {
 public:
  ParticleSystem(std::size_t n, std::size_t dim, std::size_t aux);

  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t aux_count() const noexcept { return aux_; }

  double* states() noexcept { return states_.data(); }
  const double* states() const noexcept { return states_.data(); }
  double* asset(std::size_t j) noexcept { return states_.data() + j * n_; }
  const double* asset(std::size_t j) const noexcept { return states_.data() + j * n_; }
  double* aux(std::size_t c) noexcept { return aux_data_.data() + c * n_; }
  const double* aux(std::size_t c) const noexcept { return aux_data_.data() + c * n_; }

  /// Unnormalized log weights; the maximum is kept at 0 after every step.
  std::vector<double> log_weights;
  /// log of the sum of exp(log_weights).
  double log_weight_sum = 0.0;
  double log_c_hat = 0.0;
  int step = 0;
  bool extinct = false;
  std::vector<int> resample_log;

  /// W_i = exp(log_w_i) / sum; all zero when extinct.
  std::vector<double> normalized_weights() const;
  /// Copies states and aux columns from `ancestors` and resets weights to 1/N.
  void gather(std::span<const std::uint32_t> ancestors);

 private:
  std::size_t n_;
  std::size_t dim_;
  std::size_t aux_;
  std::vector<double> states_;
  std::vector<double> aux_data_;
  std::vector<double> scratch_;
};

/// 1 / sum W_i^2. Returns 0 when every weight is zero (extinction).
double ess(std::span<const double> weights);

/// `count` i.i.d. categorical draws by inverse CDF, one uniform per draw from
/// counter (draw, step, 0, resample). Weights need not be normalized.
std::vector<std::uint32_t> multinomial_indices(std::span<const double> weights,
                                               std::size_t count,
                                               kernels::PhiloxKey key,
                                               std::uint32_t step);

/// Resamples the system in place from its current weights.
void multinomial_resample(ParticleSystem& system, kernels::PhiloxKey key);

/// Proposal, potential and payoff of one pricing problem.
class ParticleModel {
 public:
  virtual ~ParticleModel() = default;
  virtual std::size_t dim() const = 0;
  virtual std::size_t aux_count() const { return 0; }
  virtual int horizon() const = 0;
  virtual void initialize(ParticleSystem& system) const = 0;
  /// Advances every particle from step-1 to `step` (and updates aux state).
  virtual void propagate(ParticleSystem& system, int step,
                         kernels::PhiloxKey key) const = 0;
  /// Writes log G_step for every particle; may update aux columns.
  virtual void log_potential(ParticleSystem& system, int step,
                             double* out) const = 0;
  /// Test function H per particle, including any terminal correction.
  virtual void payoff(const ParticleSystem& system, double* out) const = 0;
  /// log h_0(s_0); the price is exp(prefactor) * engine estimate.
  virtual double log_prefactor() const { return 0.0; }
};

struct StepRecord {
  int step = 0;
  double ess = 0.0;
  bool resampled = false;
  double log_c_hat = 0.0;
};

/// Hook for instrumentation (the unbiasedness trace).
class StepObserver {
 public:
  virtual ~StepObserver() = default;
  virtual void on_potential(int step, std::span<const double> log_g) = 0;
  /// Called before the particles are gathered.
  virtual void on_resample(int step, const ParticleSystem& before,
                           std::span<const std::uint32_t> ancestors) = 0;
};

/// Raised for a NaN potential; names the particle and step.
class PotentialError : public std::runtime_error {
 public:
  PotentialError(std::size_t particle, int step);
  std::size_t particle;
  int step;
};

/// Advances the system by one step and applies the resampling rule.
StepRecord smc_step(ParticleSystem& system, const ParticleModel& model,
                    const SmcConfig& config, kernels::PhiloxKey key,
                    StepObserver* observer = nullptr);

/// C_hat * sum_i W_i H_i; 0 if extinct.
double estimate(const ParticleSystem& system, std::span<const double> payoff);

struct SmcOutput {
  double estimate = 0.0;        // engine estimate, without the h_0 prefactor
  double log_c_hat = 0.0;
  bool extinct = false;
  int extinction_step = 0;
  std::vector<int> resample_steps;
  std::vector<StepRecord> diagnostics;
};

/// Runs the model to its horizon. The final system is left in `*final_state`
/// when that pointer is given.
SmcOutput run_smc(const ParticleModel& model, const SmcConfig& config,
                  StepObserver* observer = nullptr,
                  ParticleSystem* final_state = nullptr);

/// Fixed-order compensated sum used by every reduction in the engine.
double stable_sum(std::span<const double> x);

}  // namespace wfsmc
