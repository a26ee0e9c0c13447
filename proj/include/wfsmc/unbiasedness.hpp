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

/// \file unbiasedness.hpp
/// Instrumented runs of the adaptive engine that expose the segment
/// structure between resampling times, and a replicate-level check that
/// E[Z psi_hat] matches an independent oracle.
///
/// Between resampling times tau_{s-1} and tau_s each particle carries the
/// product v of its potentials since the last resampling. With
/// vbar = mean(v) and V = v / (N vbar), the running estimate is
/// Z = prod_s vbar_{tau_s}, and psi_hat = sum_i V_N psi_i.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wfsmc/pricing.hpp"
#include "wfsmc/smc.hpp"

namespace wfsmc {

struct ResamplingTrace {
  std::vector<int> times;                  // tau_1 < ... < tau_r
  std::vector<double> log_segment_means;   // log vbar per segment, r + 1 entries
  /// max over resampling times of |sum_i V_i - 1|.
  double max_weight_sum_error = 0.0;
  /// max over particles and times of the log error in
  ///   Htilde_{tau_s} V_{tau_s} = H_{tau_{s-1}} / N,
  /// where H is the running estimate over the cumulative ancestral weight.
  double max_identity_error = 0.0;
  std::size_t identity_checks = 0;
  /// max |V_i - W_i| against the engine's normalized weights.
  double max_weight_mismatch = 0.0;
};

struct TracedRun {
  ResamplingTrace trace;
  double psi_hat = 0.0;
  double log_z = 0.0;           // log Z from the trace
  double log_c_hat = 0.0;       // the engine's running estimate
  double log_prefactor = 0.0;
  bool extinct = false;
  /// exp(prefactor) * Z * psi_hat, equal to the priced estimate.
  double value() const;
};

/// Runs `model` with the trace attached. psi is the model's payoff.
/// Throws std::runtime_error if log Z and the engine's log C_hat differ by
/// more than 1e-10.
TracedRun traced_run(const ParticleModel& model, const SmcConfig& config);

enum class Verdict { pass, fail, inconclusive };
std::string verdict_name(Verdict v);

struct UnbiasednessReport {
  std::size_t replicates = 0;
  double mean = 0.0;
  double se = 0.0;
  double oracle = 0.0;
  double oracle_se = 0.0;
  /// Share of replicates that resampled at least once.
  double resample_rate = 0.0;
  double mean_resamples = 0.0;
  std::size_t extinct = 0;
  double max_identity_error = 0.0;
  double max_weight_sum_error = 0.0;
  Verdict verdict = Verdict::inconclusive;
};

struct UnbiasednessOptions {
  std::size_t replicates = 2000;
  std::uint64_t master_seed = 1;
  double z_tolerance = 3.0;           // in standard errors
  double min_resample_rate = 0.3;
  double identity_tolerance = 1e-10;
  double weight_sum_tolerance = 1e-12;
};

/// Runs independent traced replicates of `request` (its method must resample
/// adaptively) and compares their mean to `oracle`, whose own standard
/// error widens the band in quadrature.
UnbiasednessReport unbiasedness_test(const PricingRequest& request, double oracle,
                                     const UnbiasednessOptions& options,
                                     double oracle_se = 0.0);

std::string report_to_json(const UnbiasednessReport& report);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights);

/// E[H(S_T) 1{L < s_T < U}] for one asset with a single monitoring date at
/// T, where s_T ~ N(s0 - sigma^2 T / 2, sigma^2 T). Composite Gauss-Legendre
/// over the corridor, split at the strike.
double barrier_quadrature(double s0, double sigma, double t_end,
                          const BarrierOption& option);

struct MonteCarloOracle {
  double mean = 0.0;
  double se = 0.0;
};

/// Plain Monte Carlo in independent batches; se is from the batch means.
MonteCarloOracle plain_mc_oracle(PricingRequest request, std::size_t batches,
                                 std::size_t per_batch, std::uint64_t seed);

}  // namespace wfsmc
