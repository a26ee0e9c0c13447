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

/// \file pricing.hpp
/// The three estimators: plain Monte Carlo, SMC that resamples at every
/// monitoring date, and SMC guided by a weighting function.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "wfsmc/diffusion.hpp"
#include "wfsmc/products.hpp"
#include "wfsmc/smc.hpp"
#include "wfsmc/weighting.hpp"

namespace wfsmc {

enum class Method { plain_mc, smc_monitor, smc_weighted };

enum class WeightingKind {
  none,           // h = 1
  bridge,         // Brownian bridge to the corridor midpoint
  pilot,          // survivor moments from a pilot run
  tarn_naive,     // (s - s0)^2
  tarn_density,   // (s - s0)^2 / p_n
  tarn_mixture,   // two-sided escaper mixture / p_n
};

std::string_view method_name(Method m) noexcept;
Method parse_method(std::string_view name);
std::string_view weighting_name(WeightingKind k) noexcept;
WeightingKind parse_weighting(std::string_view name);

struct WeightingSpec {
  WeightingKind kind = WeightingKind::none;
  double bridge_inflation = 0.2;
  std::optional<PilotTarget> pilot;
  /// Volatility of the crude Gaussian marginal used by the TARN density
  /// weights under local volatility.
  double crude_vol = 0.04;
  double floor = kWeightFloor;
};

using Product = std::variant<BarrierOption, TarnSpec>;

struct PricingRequest {
  Product product = BarrierOption::from_prices(95.0, 105.0, 100.0, PayoffKind::call);
  VolatilityModel model = VolatilityModel::constant(0.08);
  AssetBasket basket = AssetBasket::independent(1, 100.0);
  TimeGrid grid = TimeGrid::periodic(1, 540);
  Method method = Method::smc_weighted;
  WeightingSpec weighting;
  SmcConfig smc;

  /// Throws std::invalid_argument on an inconsistent request.
  void validate() const;
};

struct PricingResult {
  double estimate = 0.0;
  std::size_t n_particles = 0;
  bool extinct = false;
  double log_c_hat = 0.0;
  double log_prefactor = 0.0;
  std::vector<StepRecord> diagnostics;
  std::vector<int> resample_steps;
  double wall_time_s = 0.0;
};

/// Barrier grid: `periods` monitoring dates every `period_steps` daily steps.
TimeGrid barrier_grid(int periods, int period_steps);
/// TARN grid: one step per fixing under constant volatility (exact
/// Gaussian transitions), daily steps under local volatility.
TimeGrid tarn_grid(const TarnSpec& spec, const VolatilityModel& model);
/// Step of fixing `weighted_fixings`, where the TARN weighting ends.
int tarn_last_weighted_step(const TarnSpec& spec, const TimeGrid& grid);

/// Knock-out basket option. Aux column 0 holds log h of the previous step.
class BarrierModel final : public ParticleModel {
 public:
  BarrierModel(BarrierOption option, AssetBasket basket, VolatilityModel model,
               TimeGrid grid, PotentialSequence potentials);

  std::size_t dim() const override { return basket_.dim(); }
  std::size_t aux_count() const override { return 1; }
  int horizon() const override { return grid_.steps; }
  void initialize(ParticleSystem& system) const override;
  void propagate(ParticleSystem& system, int step, kernels::PhiloxKey key) const override;
  void log_potential(ParticleSystem& system, int step, double* out) const override;
  void payoff(const ParticleSystem& system, double* out) const override;
  double log_prefactor() const override;

  const PotentialSequence& potentials() const noexcept { return potentials_; }

 private:
  BarrierOption option_;
  AssetBasket basket_;
  TimeGrid grid_;
  BasketPropagator propagator_;
  PotentialSequence potentials_;
};

/// Single-asset TARN. Aux columns: cashflow sum, gains, losses, stopping
/// fixing (0 while running), log h of the previous step.
class TarnModel final : public ParticleModel {
 public:
  enum Aux : std::size_t { kSum = 0, kGains, kLosses, kTau, kPrev, kCount };

  TarnModel(TarnSpec spec, VolatilityModel model, TimeGrid grid,
            PotentialSequence potentials);

  std::size_t dim() const override { return 1; }
  std::size_t aux_count() const override { return kCount; }
  int horizon() const override { return grid_.steps; }
  void initialize(ParticleSystem& system) const override;
  void propagate(ParticleSystem& system, int step, kernels::PhiloxKey key) const override;
  void log_potential(ParticleSystem& system, int step, double* out) const override;
  void payoff(const ParticleSystem& system, double* out) const override;
  double log_prefactor() const override;

  const PotentialSequence& potentials() const noexcept { return potentials_; }

 private:
  TarnSpec spec_;
  double s0_;
  TimeGrid grid_;
  BasketPropagator propagator_;
  PotentialSequence potentials_;
};

/// The weighting function a request asks for (UnitWeighting for none).
std::shared_ptr<const WeightingFunction> build_weighting(const PricingRequest& request);

std::unique_ptr<ParticleModel> build_model(const PricingRequest& request);

/// The engine configuration a method implies: plain MC never resamples,
/// monitoring SMC resamples at every monitoring step.
SmcConfig effective_config(const PricingRequest& request, std::uint64_t seed);

/// Prices a barrier option. Deterministic given (request, seed).
PricingResult price(const PricingRequest& request, std::uint64_t seed);
/// Prices a TARN; same contract as `price`.
PricingResult price_tarn(const PricingRequest& request, std::uint64_t seed);
/// Dispatches on the product type.
PricingResult price_any(const PricingRequest& request, std::uint64_t seed);

}  // namespace wfsmc
