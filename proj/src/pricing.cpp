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

#include "wfsmc/pricing.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "wfsmc/rng.hpp"

namespace wfsmc {
namespace {

constexpr std::size_t kChunk = 2048;

template <typename F>
void for_chunks(std::size_t n, F&& body) {
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<std::exception_ptr> errors(chunks);
#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < chunks; ++c) {
    try {
      const std::size_t lo = c * kChunk;
      body(lo, std::min(kChunk, n - lo));
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool is_tarn_weighting(WeightingKind k) {
  return k == WeightingKind::tarn_naive || k == WeightingKind::tarn_density ||
         k == WeightingKind::tarn_mixture;
}

std::shared_ptr<const MarginalModel> tarn_marginal(const PricingRequest& r) {
  const double s0 = r.basket.s0()[0];
  if (r.model.kind() == VolatilityModel::Kind::constant) {
    return std::make_shared<ConstantVolMarginal>(std::vector<double>{s0},
                                                 std::vector<double>{r.model.sigma(0)},
                                                 r.grid.dt);
  }
  // Crude stand-in for the unknown local-vol marginal.
  return std::make_shared<ConstantVolMarginal>(std::vector<double>{s0},
                                               std::vector<double>{r.weighting.crude_vol},
                                               r.grid.dt);
}

}  // namespace

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::plain_mc: return "plain_mc";
    case Method::smc_monitor: return "smc_monitor";
    case Method::smc_weighted: return "smc_weighted";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::plain_mc, Method::smc_monitor, Method::smc_weighted}) {
    if (method_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown method '" + std::string(name) + "'");
}

std::string_view weighting_name(WeightingKind k) noexcept {
  switch (k) {
    case WeightingKind::none: return "none";
    case WeightingKind::bridge: return "bridge";
    case WeightingKind::pilot: return "pilot";
    case WeightingKind::tarn_naive: return "tarn_naive";
    case WeightingKind::tarn_density: return "tarn_density";
    case WeightingKind::tarn_mixture: return "tarn_mixture";
  }
  return "?";
}

WeightingKind parse_weighting(std::string_view name) {
  for (WeightingKind k : {WeightingKind::none, WeightingKind::bridge, WeightingKind::pilot,
                          WeightingKind::tarn_naive, WeightingKind::tarn_density,
                          WeightingKind::tarn_mixture}) {
    if (weighting_name(k) == name) return k;
  }
  throw std::invalid_argument("unknown weighting '" + std::string(name) + "'");
}

void PricingRequest::validate() const {
  smc.validate();
  const bool tarn = std::holds_alternative<TarnSpec>(product);
  if (weighting.kind != WeightingKind::none && method != Method::smc_weighted) {
    throw std::invalid_argument("a weighting function needs method smc_weighted");
  }
  if (tarn) {
    const TarnSpec& t = std::get<TarnSpec>(product);
    t.validate();
    if (basket.dim() != 1) throw std::invalid_argument("TARN is a single-asset product");
    if (method == Method::smc_monitor) {
      throw std::invalid_argument("smc_monitor needs a barrier product");
    }
    if (weighting.kind == WeightingKind::bridge || weighting.kind == WeightingKind::pilot) {
      throw std::invalid_argument("barrier weighting on a TARN");
    }
    grid.validate(false);
    if (static_cast<int>(grid.monitoring.size()) != t.fixings) {
      throw std::invalid_argument("TARN grid must have one monitoring step per fixing");
    }
    if (std::abs(basket.s0()[0] - std::log(t.s0_price)) > 1e-12) {
      throw std::invalid_argument("basket start does not match the TARN initial price");
    }
    if (weighting.kind == WeightingKind::tarn_mixture &&
        (!weighting.pilot || weighting.pilot->mode != PilotTarget::Mode::escapers)) {
      throw std::invalid_argument("mixture weighting needs an escaper pilot");
    }
  } else {
    const BarrierOption& b = std::get<BarrierOption>(product);
    b.validate(basket.dim());
    grid.validate(true);
    if (is_tarn_weighting(weighting.kind)) throw std::invalid_argument("TARN weighting on a barrier");
    if (weighting.kind == WeightingKind::bridge || weighting.kind == WeightingKind::pilot) {
      if (grid.monitoring.size() != 1) {
        throw std::invalid_argument("bridge and pilot targets need a single monitoring date");
      }
    }
    if (weighting.kind == WeightingKind::pilot &&
        (!weighting.pilot || weighting.pilot->mode != PilotTarget::Mode::survivors)) {
      throw std::invalid_argument("pilot weighting needs a survivor pilot");
    }
  }
  if (model.kind() == VolatilityModel::Kind::constant && model.sigmas().size() != 1 &&
      model.sigmas().size() != basket.dim()) {
    throw std::invalid_argument("per-asset volatility list has the wrong length");
  }
  if (weighting.kind == WeightingKind::bridge && model.is_zero()) {
    throw std::invalid_argument("bridge target needs a positive volatility");
  }
}

TimeGrid barrier_grid(int periods, int period_steps) {
  return TimeGrid::periodic(periods, period_steps, 1);
}

TimeGrid tarn_grid(const TarnSpec& spec, const VolatilityModel& model) {
  spec.validate();
  if (model.kind() == VolatilityModel::Kind::constant) {
    return TimeGrid::periodic(spec.fixings, 1, spec.fixing_days);
  }
  return TimeGrid::periodic(spec.fixings, spec.fixing_days, 1);
}

int tarn_last_weighted_step(const TarnSpec& spec, const TimeGrid& grid) {
  if (static_cast<int>(grid.monitoring.size()) < spec.weighted_fixings) {
    throw std::invalid_argument("grid has fewer fixings than the weighted ones");
  }
  return grid.monitoring[static_cast<std::size_t>(spec.weighted_fixings - 1)];
}

BarrierModel::BarrierModel(BarrierOption option, AssetBasket basket,
                           VolatilityModel model, TimeGrid grid,
                           PotentialSequence potentials)
    : option_(std::move(option)),
      basket_(std::move(basket)),
      grid_(std::move(grid)),
      propagator_(basket_, model, grid_),
      potentials_(std::move(potentials)) {
  option_.validate(basket_.dim());
}

void BarrierModel::initialize(ParticleSystem& system) const {
  const std::size_t n = system.size();
  for (std::size_t j = 0; j < basket_.dim(); ++j) {
    std::fill(system.asset(j), system.asset(j) + n, basket_.s0()[j]);
  }
  std::fill(system.aux(0), system.aux(0) + n, potentials_.log_h0(basket_.s0()));
}

void BarrierModel::propagate(ParticleSystem& system, int step, kernels::PhiloxKey key) const {
  const std::size_t n = system.size();
  double* s = system.states();
  for_chunks(n, [&](std::size_t lo, std::size_t len) {
    propagator_.advance(s + lo, n, len, static_cast<std::uint32_t>(lo), step, key);
  });
}

void BarrierModel::log_potential(ParticleSystem& system, int step, double* out) const {
  const std::size_t n = system.size();
  const double* s = system.states();
  double* prev = system.aux(0);
  for_chunks(n, [&](std::size_t lo, std::size_t len) {
    potentials_.log_potential(step, s + lo, n, len, prev + lo, out + lo);
  });
}

void BarrierModel::payoff(const ParticleSystem& system, double* out) const {
  const std::size_t n = system.size();
  const std::size_t d = basket_.dim();
  const double* prev = system.aux(0);
  std::vector<double> s(d);
  for (std::size_t i = 0; i < n; ++i) {
    if (prev[i] == -std::numeric_limits<double>::infinity()) {
      out[i] = 0.0;
      continue;
    }
    for (std::size_t j = 0; j < d; ++j) s[j] = system.asset(j)[i];
    // The last weighting value still sits in the weights; divide it out.
    out[i] = barrier_payoff(option_, s.data(), d, 1) * std::exp(-prev[i]);
  }
}

double BarrierModel::log_prefactor() const { return potentials_.log_h0(basket_.s0()); }

TarnModel::TarnModel(TarnSpec spec, VolatilityModel model, TimeGrid grid,
                     PotentialSequence potentials)
    : spec_(std::move(spec)),
      s0_(std::log(spec_.s0_price)),
      grid_(std::move(grid)),
      propagator_(AssetBasket::independent(1, spec_.s0_price), model, grid_),
      potentials_(std::move(potentials)) {
  spec_.validate();
}

void TarnModel::initialize(ParticleSystem& system) const {
  const std::size_t n = system.size();
  std::fill(system.asset(0), system.asset(0) + n, s0_);
  for (std::size_t c = 0; c < kCount; ++c) std::fill(system.aux(c), system.aux(c) + n, 0.0);
  std::fill(system.aux(kPrev), system.aux(kPrev) + n, potentials_.log_h0({s0_}));
}

void TarnModel::propagate(ParticleSystem& system, int step, kernels::PhiloxKey key) const {
  const std::size_t n = system.size();
  double* s = system.states();
  const int rank = grid_.monitoring_rank(step);
  double* sum = system.aux(kSum);
  double* gains = system.aux(kGains);
  double* losses = system.aux(kLosses);
  double* tau = system.aux(kTau);
  for_chunks(n, [&](std::size_t lo, std::size_t len) {
    propagator_.advance(s + lo, n, len, static_cast<std::uint32_t>(lo), step, key);
    if (rank == 0) return;
    for (std::size_t i = lo; i < lo + len; ++i) {
      if (tau[i] != 0.0) continue;
      CashflowState st{gains[i], losses[i], sum[i], rank - 1, 0};
      st = tarn_update(st, spec_, std::exp(s[i]));
      sum[i] = st.sum;
      gains[i] = st.gains;
      losses[i] = st.losses;
      tau[i] = st.tau;
    }
  });
}

void TarnModel::log_potential(ParticleSystem& system, int step, double* out) const {
  const std::size_t n = system.size();
  const double* s = system.states();
  double* prev = system.aux(kPrev);
  for_chunks(n, [&](std::size_t lo, std::size_t len) {
    potentials_.log_potential(step, s + lo, n, len, prev + lo, out + lo);
  });
}

void TarnModel::payoff(const ParticleSystem& system, double* out) const {
  const std::size_t n = system.size();
  const double* sum = system.aux(kSum);
  const double* prev = system.aux(kPrev);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = (spec_.payoff_shift + sum[i]) * std::exp(-prev[i]);
  }
}

double TarnModel::log_prefactor() const { return potentials_.log_h0({s0_}); }

std::shared_ptr<const WeightingFunction> build_weighting(const PricingRequest& r) {
  const WeightingSpec& w = r.weighting;
  switch (w.kind) {
    case WeightingKind::none:
      return std::make_shared<UnitWeighting>();
    case WeightingKind::bridge: {
      const auto marginal = make_marginal(r.model, r.basket, r.grid);
      return brownian_bridge_target(r.basket, *marginal, std::get<BarrierOption>(r.product),
                                    r.grid, r.grid.steps, w.bridge_inflation);
    }
    case WeightingKind::pilot: {
      const auto marginal = make_marginal(r.model, r.basket, r.grid);
      return pilot_survivor_target(*w.pilot, r.basket, *marginal);
    }
    case WeightingKind::tarn_naive:
    case WeightingKind::tarn_density:
    case WeightingKind::tarn_mixture: {
      const TarnSpec& t = std::get<TarnSpec>(r.product);
      const int last = tarn_last_weighted_step(t, r.grid);
      const auto form = w.kind == WeightingKind::tarn_naive     ? TarnWeighting::Form::naive
                        : w.kind == WeightingKind::tarn_density ? TarnWeighting::Form::density
                                                                : TarnWeighting::Form::mixture;
      return std::make_shared<TarnWeighting>(form, r.basket.s0()[0], last, tarn_marginal(r),
                                             w.pilot, w.floor);
    }
  }
  throw std::logic_error("unhandled weighting kind");
}

std::unique_ptr<ParticleModel> build_model(const PricingRequest& r) {
  r.validate();
  auto weighting = build_weighting(r);
  if (const auto* t = std::get_if<TarnSpec>(&r.product)) {
    const int last = tarn_last_weighted_step(*t, r.grid);
    PotentialSequence pot(std::move(weighting), r.grid, std::nullopt, last, 1);
    return std::make_unique<TarnModel>(*t, r.model, r.grid, std::move(pot));
  }
  const BarrierOption& b = std::get<BarrierOption>(r.product);
  PotentialSequence pot(std::move(weighting), r.grid, b, r.grid.steps, r.basket.dim());
  return std::make_unique<BarrierModel>(b, r.basket, r.model, r.grid, std::move(pot));
}

SmcConfig effective_config(const PricingRequest& r, std::uint64_t seed) {
  SmcConfig c = r.smc;
  c.seed = seed;
  switch (r.method) {
    case Method::plain_mc:
      c.mode = ResampleMode::never;
      c.resample_steps.clear();
      break;
    case Method::smc_monitor:
      c.mode = ResampleMode::at_steps;
      c.resample_steps = r.grid.monitoring;
      break;
    case Method::smc_weighted:
      break;
  }
  return c;
}

namespace {

PricingResult run_request(const PricingRequest& r, std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto model = build_model(r);
  const SmcConfig config = effective_config(r, seed);
  const SmcOutput out = run_smc(*model, config);
  PricingResult res;
  res.n_particles = config.n_particles;
  res.extinct = out.extinct;
  res.log_c_hat = out.log_c_hat;
  res.log_prefactor = model->log_prefactor();
  res.estimate = out.extinct ? 0.0 : std::exp(res.log_prefactor) * out.estimate;
  res.diagnostics = out.diagnostics;
  res.resample_steps = out.resample_steps;
  res.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!std::isfinite(res.estimate)) throw std::runtime_error("non-finite price estimate");
  return res;
}

}  // namespace

PricingResult price(const PricingRequest& request, std::uint64_t seed) {
  if (!std::holds_alternative<BarrierOption>(request.product)) {
    throw std::invalid_argument("price() needs a barrier option; use price_tarn()");
  }
  return run_request(request, seed);
}

PricingResult price_tarn(const PricingRequest& request, std::uint64_t seed) {
  if (!std::holds_alternative<TarnSpec>(request.product)) {
    throw std::invalid_argument("price_tarn() needs a TARN");
  }
  return run_request(request, seed);
}

PricingResult price_any(const PricingRequest& request, std::uint64_t seed) {
  return run_request(request, seed);
}

}  // namespace wfsmc
