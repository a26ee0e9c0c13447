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

#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "wfsmc/pricing.hpp"
#include "wfsmc/unbiasedness.hpp"

using namespace wfsmc;

namespace {

struct Summary {
  double mean = 0.0;
  double se = 0.0;
};

Summary summarize(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double v = 0.0;
  for (double e : x) v += (e - m) * (e - m);
  return {m, std::sqrt(v / (n - 1.0) / n)};
}

Summary replicate(const PricingRequest& r, int reps, std::uint64_t first_seed) {
  std::vector<double> est;
  for (int i = 0; i < reps; ++i) est.push_back(price_any(r, first_seed + static_cast<std::uint64_t>(i)).estimate);
  return summarize(est);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

PricingRequest barrier_request(std::size_t d, int periods, int period_steps, double lower,
                               double upper, PayoffKind kind, double strike, double sigma) {
  PricingRequest r;
  r.product = BarrierOption::from_prices(lower, upper, strike, kind);
  r.model = VolatilityModel::constant(sigma);
  r.basket = AssetBasket::independent(d, 100.0);
  r.grid = barrier_grid(periods, period_steps);
  r.smc.n_particles = 2000;
  return r;
}

PricingRequest tarn_request(double sigma, Method m, WeightingKind w) {
  PricingRequest r;
  const TarnSpec t;
  r.product = t;
  r.model = VolatilityModel::constant(sigma);
  r.basket = AssetBasket::independent(1, t.s0_price);
  r.grid = tarn_grid(t, r.model);
  r.method = m;
  r.weighting.kind = w;
  r.smc.n_particles = 10000;
  return r;
}

}  // namespace

TEST_CASE("method and weighting names round trip") {
  for (Method m : {Method::plain_mc, Method::smc_monitor, Method::smc_weighted}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  for (WeightingKind k : {WeightingKind::none, WeightingKind::bridge, WeightingKind::pilot,
                          WeightingKind::tarn_naive, WeightingKind::tarn_density,
                          WeightingKind::tarn_mixture}) {
    CHECK(parse_weighting(weighting_name(k)) == k);
  }
  CHECK_THROWS_AS(parse_method("mcmc"), std::invalid_argument);
  CHECK_THROWS_AS(parse_weighting("gaussian"), std::invalid_argument);
}

TEST_CASE("zero volatility gives the deterministic payoff exactly") {
  struct Case {
    PayoffKind kind;
    double strike;
    double value;
  };
  for (const Case c : {Case{PayoffKind::call, 95.0, 5.0}, Case{PayoffKind::put, 104.0, 4.0},
                       Case{PayoffKind::unit, 100.0, 1.0}}) {
    for (Method m : {Method::plain_mc, Method::smc_monitor, Method::smc_weighted}) {
      PricingRequest r = barrier_request(3, 4, 30, 90.0, 110.0, c.kind, c.strike, 0.0);
      r.method = m;
      const PricingResult res = price(r, 1);
      const std::vector<double> s0(3, std::log(100.0));
      const double want = barrier_payoff(std::get<BarrierOption>(r.product), s0.data(), 3, 1);
      CHECK(want == doctest::Approx(c.value).epsilon(1e-12));
      CHECK(res.estimate == want);
      CHECK_FALSE(res.extinct);
    }
  }
}

TEST_CASE("wide corridor prices the plain call") {
  const double sigma = 0.08;
  const double t = 540.0 / 360.0;
  PricingRequest r = barrier_request(1, 1, 540, 1e-3, 1e6, PayoffKind::call, 100.0, sigma);
  r.smc.n_particles = 10000;
  // Driftless log-normal call.
  const double v = sigma * std::sqrt(t);
  const double exact = 100.0 * (normal_cdf(0.5 * v) - normal_cdf(-0.5 * v));
  CHECK(barrier_quadrature(std::log(100.0), sigma, t, std::get<BarrierOption>(r.product)) ==
        doctest::Approx(exact).epsilon(1e-9));
  for (Method m : {Method::plain_mc, Method::smc_monitor, Method::smc_weighted}) {
    r.method = m;
    const Summary s = replicate(r, 20, 100);
    CHECK(std::abs(s.mean - exact) < 3.0 * s.se);
  }
}

TEST_CASE("unit weighting reproduces the monitoring estimator") {
  PricingRequest r = barrier_request(2, 3, 20, 97.0, 103.0, PayoffKind::put, 101.0, 0.08);
  r.method = Method::smc_monitor;
  const PricingResult a = price(r, 7);
  r.method = Method::smc_weighted;
  r.smc.mode = ResampleMode::at_steps;
  r.smc.resample_steps = r.grid.monitoring;
  const PricingResult b = price(r, 7);
  CHECK(a.resample_steps == r.grid.monitoring);
  CHECK(std::memcmp(&a.estimate, &b.estimate, sizeof(double)) == 0);
  CHECK(a.log_c_hat == b.log_c_hat);

  // With resampling switched off the weighted engine is plain Monte Carlo.
  r.smc.mode = ResampleMode::never;
  const PricingResult c = price(r, 8);
  r.method = Method::plain_mc;
  const PricingResult d = price(r, 8);
  CHECK(d.resample_steps.empty());
  CHECK(std::memcmp(&c.estimate, &d.estimate, sizeof(double)) == 0);
}

TEST_CASE("estimators agree across methods") {
  SUBCASE("single monitoring date") {
    PricingRequest r = barrier_request(3, 1, 60, 97.0, 103.0, PayoffKind::call, 99.0, 0.08);
    PilotSpec ps;
    ps.mode = PilotTarget::Mode::survivors;
    ps.model = r.model;
    ps.grid = r.grid;
    ps.barrier = std::get<BarrierOption>(r.product);
    ps.first_step = weighting_start(60);
    ps.last_step = 59;
    ps.paths = 10000;
    ps.seed = 3;
    const PilotTarget pilot = fit_pilot_target(ps);

    std::vector<Summary> s;
    r.method = Method::plain_mc;
    s.push_back(replicate(r, 200, 1000));
    r.method = Method::smc_monitor;
    s.push_back(replicate(r, 200, 2000));
    r.method = Method::smc_weighted;
    r.weighting.kind = WeightingKind::bridge;
    s.push_back(replicate(r, 200, 3000));
    r.weighting.kind = WeightingKind::pilot;
    r.weighting.pilot = pilot;
    s.push_back(replicate(r, 200, 4000));
    for (std::size_t i = 1; i < s.size(); ++i) {
      CHECK(std::abs(s[i].mean - s[0].mean) < 4.0 * std::hypot(s[i].se, s[0].se));
    }
  }
  SUBCASE("several monitoring dates") {
    PricingRequest r = barrier_request(2, 3, 20, 97.0, 103.0, PayoffKind::unit, 100.0, 0.08);
    r.method = Method::plain_mc;
    const Summary a = replicate(r, 200, 5000);
    r.method = Method::smc_monitor;
    const Summary b = replicate(r, 200, 6000);
    r.method = Method::smc_weighted;
    const Summary c = replicate(r, 200, 7000);
    CHECK(std::abs(a.mean - b.mean) < 4.0 * std::hypot(a.se, b.se));
    CHECK(std::abs(a.mean - c.mean) < 4.0 * std::hypot(a.se, c.se));
  }
}

TEST_CASE("TARN pricing") {
  SUBCASE("a flat path pays nothing") {
    for (WeightingKind w : {WeightingKind::none, WeightingKind::tarn_naive}) {
      PricingRequest r = tarn_request(0.0, w == WeightingKind::none ? Method::plain_mc : Method::smc_weighted, w);
      CHECK(price_tarn(r, 1).estimate == 0.0);
    }
  }
  SUBCASE("unit weighting without resampling is plain Monte Carlo") {
    PricingRequest r = tarn_request(0.05, Method::smc_weighted, WeightingKind::none);
    r.smc.mode = ResampleMode::never;
    const double a = price_tarn(r, 4).estimate;
    r.method = Method::plain_mc;
    const double b = price_tarn(r, 4).estimate;
    CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
  }
  SUBCASE("weighted estimates match a large plain Monte Carlo oracle") {
    const MonteCarloOracle oracle =
        plain_mc_oracle(tarn_request(0.05, Method::plain_mc, WeightingKind::none), 100, 10000, 77);
    MESSAGE("oracle " << oracle.mean << " +- " << oracle.se);
    PilotSpec ps;
    ps.mode = PilotTarget::Mode::escapers;
    ps.model = VolatilityModel::constant(0.05);
    ps.tarn = TarnSpec{};
    ps.grid = tarn_grid(*ps.tarn, ps.model);
    ps.first_step = 1;
    ps.last_step = 5;
    ps.paths = 200000;
    ps.seed = 5;
    const PilotTarget pilot = fit_pilot_target(ps);
    for (WeightingKind w : {WeightingKind::tarn_naive, WeightingKind::tarn_density, WeightingKind::tarn_mixture}) {
      PricingRequest r = tarn_request(0.05, Method::smc_weighted, w);
      if (w == WeightingKind::tarn_mixture) r.weighting.pilot = pilot;
      const Summary s = replicate(r, 20, 9000);
      MESSAGE(weighting_name(w) << " " << s.mean << " +- " << s.se);
      CHECK(std::abs(s.mean - oracle.mean) < 4.0 * std::hypot(s.se, oracle.se));
    }
  }
}

TEST_CASE("inconsistent requests are rejected before simulation") {
  PricingRequest r = barrier_request(2, 3, 20, 97.0, 103.0, PayoffKind::call, 100.0, 0.08);
  r.method = Method::plain_mc;
  r.weighting.kind = WeightingKind::bridge;
  CHECK_THROWS_AS(price(r, 1), std::invalid_argument);
  r.method = Method::smc_weighted;
  CHECK_THROWS_AS(price(r, 1), std::invalid_argument);  // several monitoring dates
  r.weighting.kind = WeightingKind::tarn_naive;
  CHECK_THROWS_AS(price(r, 1), std::invalid_argument);
  PricingRequest one = barrier_request(1, 1, 60, 97.0, 103.0, PayoffKind::call, 100.0, 0.0);
  one.weighting.kind = WeightingKind::bridge;
  CHECK_THROWS_AS(price(one, 1), std::invalid_argument);
  one.model = VolatilityModel::constant(0.08);
  one.weighting.kind = WeightingKind::pilot;
  CHECK_THROWS_AS(price(one, 1), std::invalid_argument);

  PricingRequest t = tarn_request(0.05, Method::smc_monitor, WeightingKind::none);
  CHECK_THROWS_AS(price_tarn(t, 1), std::invalid_argument);
  t.method = Method::smc_weighted;
  t.weighting.kind = WeightingKind::bridge;
  CHECK_THROWS_AS(price_tarn(t, 1), std::invalid_argument);
  t.weighting.kind = WeightingKind::tarn_mixture;
  CHECK_THROWS_AS(price_tarn(t, 1), std::invalid_argument);
  t.weighting.kind = WeightingKind::none;
  t.basket = AssetBasket::independent(2, 100.0);
  CHECK_THROWS_AS(price_tarn(t, 1), std::invalid_argument);
  t.basket = AssetBasket::independent(1, 101.0);
  CHECK_THROWS_AS(price_tarn(t, 1), std::invalid_argument);
  CHECK_THROWS_AS(price(tarn_request(0.05, Method::plain_mc, WeightingKind::none), 1), std::invalid_argument);
  CHECK_THROWS_AS(price_tarn(r, 1), std::invalid_argument);
}

TEST_CASE("extinction is a flagged zero") {
  PricingRequest r = barrier_request(1, 10, 54, 99.99, 100.01, PayoffKind::unit, 100.0, 0.08);
  r.method = Method::smc_monitor;
  r.smc.n_particles = 50;
  const PricingResult res = price(r, 3);
  CHECK(res.extinct);
  CHECK(res.estimate == 0.0);
}

TEST_CASE("pricing is deterministic") {
  PricingRequest r = barrier_request(2, 1, 60, 97.0, 103.0, PayoffKind::call, 99.0, 0.08);
  r.weighting.kind = WeightingKind::bridge;
  r.smc.record_diagnostics = true;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const PricingResult a = price(r, 11);
  omp_set_num_threads(4);
  const PricingResult b = price(r, 11);
  omp_set_num_threads(saved);
  CHECK(std::memcmp(&a.estimate, &b.estimate, sizeof(double)) == 0);
  CHECK(a.resample_steps == b.resample_steps);
  REQUIRE(a.diagnostics.size() == b.diagnostics.size());
  for (std::size_t i = 0; i < a.diagnostics.size(); ++i) {
    CHECK(a.diagnostics[i].ess == b.diagnostics[i].ess);
    CHECK(a.diagnostics[i].resampled == b.diagnostics[i].resampled);
    CHECK(a.diagnostics[i].log_c_hat == b.diagnostics[i].log_c_hat);
  }
  CHECK(price(r, 12).estimate != a.estimate);
}
