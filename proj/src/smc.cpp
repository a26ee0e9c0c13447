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

#include "wfsmc/smc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wfsmc/rng.hpp"

namespace wfsmc {
namespace {

constexpr std::size_t kChunk = 4096;

std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

}  // namespace

void SmcConfig::validate() const {
  if (n_particles < 2) throw std::invalid_argument("need at least two particles");
  if (!(ess_fraction > 0.0 && ess_fraction <= 1.0)) {
    throw std::invalid_argument("ESS threshold fraction must be in (0, 1]");
  }
  if (n_particles > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("particle count exceeds the counter range");
  }
}

ParticleSystem::ParticleSystem(std::size_t n, std::size_t dim, std::size_t aux)
    : log_weights(n, 0.0),
      log_weight_sum(std::log(static_cast<double>(n))),
      n_(n),
      dim_(dim),
      aux_(aux),
      states_(n * dim, 0.0),
      aux_data_(n * aux, 0.0),
      scratch_(n, 0.0) {}

std::vector<double> ParticleSystem::normalized_weights() const {
  std::vector<double> w(n_, 0.0);
  if (extinct) return w;
  const double m = *std::max_element(log_weights.begin(), log_weights.end());
  if (m == -std::numeric_limits<double>::infinity()) return w;
  kernels::active().exp_shifted(log_weights.data(), w.data(), n_, m);
  const double s = stable_sum(w);
  for (double& v : w) v /= s;
  return w;
}

void ParticleSystem::gather(std::span<const std::uint32_t> ancestors) {
  const auto copy_column = [&](double* col) {
    for (std::size_t i = 0; i < n_; ++i) scratch_[i] = col[ancestors[i]];
    std::copy(scratch_.begin(), scratch_.end(), col);
  };
  for (std::size_t j = 0; j < dim_; ++j) copy_column(asset(j));
  for (std::size_t c = 0; c < aux_; ++c) copy_column(aux(c));
  std::fill(log_weights.begin(), log_weights.end(), 0.0);
  log_weight_sum = std::log(static_cast<double>(n_));
  extinct = false;
}

double stable_sum(std::span<const double> x) {
  double sum = 0.0;
  double comp = 0.0;
  for (double v : x) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

double ess(std::span<const double> weights) {
  // Relative to the largest weight, so equal weights give exactly N.
  double m = 0.0;
  for (double w : weights) m = std::max(m, w);
  if (m == 0.0) return 0.0;
  double s = 0.0;
  double q = 0.0;
  for (double w : weights) {
    const double x = w / m;
    s += x;
    q += x * x;
  }
  return (s * s) / q;
}

std::vector<std::uint32_t> multinomial_indices(std::span<const double> weights,
                                               std::size_t count,
                                               kernels::PhiloxKey key,
                                               std::uint32_t step) {
  const std::size_t n = weights.size();
  std::vector<double> cum(n);
  double run = 0.0;
  std::size_t last_positive = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (weights[i] < 0.0 || std::isnan(weights[i])) {
      throw std::invalid_argument("resampling weights must be nonnegative");
    }
    run += weights[i];
    cum[i] = run;
    if (weights[i] > 0.0) last_positive = i;
  }
  if (last_positive == n) throw std::invalid_argument("cannot resample an extinct system");
  std::vector<std::uint32_t> out(count);
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < count; ++k) {
    const double u = uniform01(key, static_cast<std::uint32_t>(k), step, 0,
                               StreamTag::resample) * run;
    auto idx = static_cast<std::size_t>(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (idx >= n) idx = last_positive;
    out[k] = static_cast<std::uint32_t>(idx);
  }
  return out;
}

void multinomial_resample(ParticleSystem& system, kernels::PhiloxKey key) {
  const std::vector<double> w = system.normalized_weights();
  const auto idx = multinomial_indices(w, system.size(), key,
                                       static_cast<std::uint32_t>(system.step));
  system.gather(idx);
  system.resample_log.push_back(system.step);
}

PotentialError::PotentialError(std::size_t particle_index, int step_index)
    : std::runtime_error("invalid potential value for particle " +
                         std::to_string(particle_index) + " at step " +
                         std::to_string(step_index)),
      particle(particle_index),
      step(step_index) {}

StepRecord smc_step(ParticleSystem& system, const ParticleModel& model,
                    const SmcConfig& config, kernels::PhiloxKey key,
                    StepObserver* observer) {
  if (system.step >= model.horizon()) throw std::logic_error("smc_step past the horizon");
  const int step = system.step + 1;
  const std::size_t n = system.size();
  thread_local std::vector<double> g;
  thread_local std::vector<double> w;
  g.resize(n);
  w.resize(n);

  model.propagate(system, step, key);
  model.log_potential(system, step, g.data());
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(g[i]) || g[i] == std::numeric_limits<double>::infinity()) {
      throw PotentialError(i, step);
    }
  }
  if (observer != nullptr) observer->on_potential(step, g);

  StepRecord rec;
  rec.step = step;
  system.step = step;
  double* lw = system.log_weights.data();
  for (std::size_t i = 0; i < n; ++i) lw[i] = lw[i] + g[i];
  const double m = *std::max_element(lw, lw + n);
  if (m == -std::numeric_limits<double>::infinity()) {
    system.extinct = true;
    system.log_c_hat = -std::numeric_limits<double>::infinity();
    rec.log_c_hat = system.log_c_hat;
    return rec;
  }

  const kernels::KernelTable& k = kernels::active();
  const std::size_t chunks = chunk_count(n);
  // Workers must not touch the thread_local buffers directly.
  double* wp = w.data();
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t lo = c * kChunk;
    const std::size_t len = std::min(kChunk, n - lo);
    k.exp_shifted(lw + lo, wp + lo, len, m);
    for (std::size_t i = lo; i < lo + len; ++i) lw[i] -= m;
  }
  const double s = stable_sum(w);
  system.log_c_hat += (m + std::log(s)) - system.log_weight_sum;
  system.log_weight_sum = std::log(s);
  rec.ess = ess(w);
  rec.log_c_hat = system.log_c_hat;

  bool resample = false;
  switch (config.mode) {
    case ResampleMode::adaptive:
      resample = rec.ess < config.ess_fraction * static_cast<double>(n);
      break;
    case ResampleMode::always:
      resample = true;
      break;
    case ResampleMode::at_steps:
      resample = std::find(config.resample_steps.begin(), config.resample_steps.end(),
                           step) != config.resample_steps.end();
      break;
    case ResampleMode::never:
      break;
  }
  if (resample) {
    const auto idx = multinomial_indices(w, n, key, static_cast<std::uint32_t>(step));
    if (observer != nullptr) observer->on_resample(step, system, idx);
    system.gather(idx);
    system.resample_log.push_back(step);
    rec.resampled = true;
  }
  return rec;
}

double estimate(const ParticleSystem& system, std::span<const double> payoff) {
  if (system.extinct) return 0.0;
  const std::size_t n = system.size();
  const double m = *std::max_element(system.log_weights.begin(), system.log_weights.end());
  std::vector<double> w(n);
  kernels::active().exp_shifted(system.log_weights.data(), w.data(), n, m);
  std::vector<double> terms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] > 0.0) terms[i] = w[i] * payoff[i];
  }
  // Ratio of unnormalized sums: equal weights reproduce a plain average.
  return std::exp(system.log_c_hat) * (stable_sum(terms) / stable_sum(w));
}

SmcOutput run_smc(const ParticleModel& model, const SmcConfig& config,
                  StepObserver* observer, ParticleSystem* final_state) {
  config.validate();
  ParticleSystem system(config.n_particles, model.dim(), model.aux_count());
  model.initialize(system);
  const kernels::PhiloxKey key = key_from_seed(config.seed);
  SmcOutput out;
  for (int n = 1; n <= model.horizon(); ++n) {
    const StepRecord rec = smc_step(system, model, config, key, observer);
    if (config.record_diagnostics) out.diagnostics.push_back(rec);
    if (system.extinct) {
      out.extinct = true;
      out.extinction_step = n;
      break;
    }
  }
  out.resample_steps = system.resample_log;
  out.log_c_hat = system.log_c_hat;
  if (!out.extinct) {
    std::vector<double> h(system.size());
    model.payoff(system, h.data());
    out.estimate = estimate(system, h);
  }
  if (final_state != nullptr) *final_state = std::move(system);
  return out;
}

}  // namespace wfsmc
