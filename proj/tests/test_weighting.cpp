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
#include <functional>
#include <limits>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wfsmc/diffusion.hpp"
#include "wfsmc/pricing.hpp"
#include "wfsmc/rng.hpp"
#include "wfsmc/weighting.hpp"

using namespace wfsmc;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPi = 3.14159265358979323846;

double gauss_pdf(double x, double m, double s) {
  return std::exp(-0.5 * (x - m) * (x - m) / (s * s)) / (s * std::sqrt(2.0 * kPi));
}

// Adds a constant to log h on the inner weighting's active steps.
class ScaledWeighting final : public WeightingFunction {
 public:
  ScaledWeighting(std::shared_ptr<const WeightingFunction> inner, double log_c)
      : inner_(std::move(inner)), log_c_(log_c) {}
  std::string name() const override { return "scaled"; }
  bool active(int step) const override { return inner_->active(step); }
  void log_h(int step, const double* s, std::size_t stride, std::size_t count,
             double* out) const override {
    inner_->log_h(step, s, stride, count, out);
    if (active(step)) {
      for (std::size_t i = 0; i < count; ++i) out[i] += log_c_;
    }
  }

 private:
  std::shared_ptr<const WeightingFunction> inner_;
  double log_c_;
};

// Sum over monitoring dates of log corridor indicators along a path.
double log_indicator_product(const std::vector<PathState>& path, const TimeGrid& grid,
                             const BarrierOption& b) {
  for (int t : grid.monitoring) {
    const auto& s = path[static_cast<std::size_t>(t)].logprices;
    if (barrier_indicator(b, s.data(), s.size()) == 0) return kNegInf;
  }
  return 0.0;
}

struct BarrierCase {
  AssetBasket basket;
  TimeGrid grid;
  BarrierOption option;
  VolatilityModel model;
};

BarrierCase small_barrier(std::size_t d) {
  return {AssetBasket::independent(d, 100.0), TimeGrid::periodic(3, 20, 1),
          BarrierOption::from_prices(97.0, 103.0, 100.0, PayoffKind::call),
          VolatilityModel::constant(0.08)};
}

PilotSpec survivor_pilot(const BarrierCase& c, std::size_t paths, std::uint64_t seed) {
  PilotSpec p;
  p.mode = PilotTarget::Mode::survivors;
  p.model = c.model;
  p.grid = c.grid;
  p.barrier = c.option;
  p.first_step = weighting_start(c.grid.steps);
  p.last_step = c.grid.steps - 1;
  p.paths = paths;
  p.seed = seed;
  return p;
}

PilotSpec escaper_pilot(const TarnSpec& t, const VolatilityModel& m, std::size_t paths,
                        std::uint64_t seed) {
  PilotSpec p;
  p.mode = PilotTarget::Mode::escapers;
  p.model = m;
  p.grid = tarn_grid(t, m);
  p.tarn = t;
  p.first_step = 1;
  p.last_step = tarn_last_weighted_step(t, p.grid);
  p.paths = paths;
  p.seed = seed;
  return p;
}

// Checks log h_0 + sum log G - log h_last against `expected` on `paths` paths.
void check_telescoping(const PotentialSequence& pot, const AssetBasket& basket,
                       const VolatilityModel& model, const TimeGrid& grid, int paths,
                       std::uint64_t seed,
                       const std::function<double(const std::vector<PathState>&)>& expected) {
  const auto key = key_from_seed(seed);
  int finite = 0;
  for (int i = 0; i < paths; ++i) {
    const auto path = simulate_path(basket, model, grid, key, static_cast<std::uint32_t>(i));
    const double got = pot.log_path_product(path);
    const double want = expected(path);
    if (want == kNegInf) {
      CHECK(got == kNegInf);
    } else {
      ++finite;
      CHECK(std::abs(got - want) <= 1e-10);
    }
  }
  MESSAGE(pot.weighting().name() << ": " << finite << " of " << paths << " paths with a finite weight");
}

}  // namespace

TEST_CASE("bridge moments") {
  const double s0 = std::log(100.0);
  const double k = std::log(110.0);
  const double sigma = 0.08;
  const double tk = 540.0 / 360.0;
  SUBCASE("tied down at the horizon") {
    const auto g = bridge_moments(s0, k, sigma, tk, tk, 0.0);
    CHECK(g.mean == k);
    CHECK(g.sd == 0.0);
    const auto h = bridge_moments(s0, k, sigma, tk, tk, 0.2);
    CHECK(h.sd == doctest::Approx(0.2 * sigma * std::sqrt(tk)).epsilon(1e-15));
    CHECK(h.sd > 0.0);
  }
  SUBCASE("midpoint with the start at the target") {
    const auto g = bridge_moments(s0, s0, sigma, tk / 2.0, tk, 0.2);
    CHECK(g.mean == doctest::Approx(s0).epsilon(1e-15));
    CHECK(g.sd == doctest::Approx(sigma * std::sqrt(tk) / 2.0 + 0.2 * sigma * std::sqrt(tk)).epsilon(1e-14));
  }
  SUBCASE("mean is linear in time") {
    for (int n = 0; n <= 540; n += 27) {
      const double t = n / 360.0;
      const auto g = bridge_moments(s0, k, sigma, t, tk, 0.2);
      CHECK(g.mean == doctest::Approx(s0 + (n / 540.0) * (k - s0)).epsilon(1e-14));
    }
  }
  SUBCASE("start step") {
    CHECK(weighting_start(540) == 360);
    CHECK(weighting_start(60) == 40);
    CHECK(weighting_start(10) == 7);
    CHECK(weighting_start(3) == 2);
  }
}

TEST_CASE("bridge target construction") {
  const BarrierCase c = small_barrier(2);
  const ConstantVolMarginal marg(c.basket.s0(), {0.08}, c.grid.dt);
  const auto w = brownian_bridge_target(c.basket, marg, c.option, c.grid, 60);
  CHECK(w->first_step() == 40);
  CHECK(w->last_step() == 59);
  CHECK_FALSE(w->active(39));
  CHECK_FALSE(w->active(60));
  const auto& st = w->at(50);
  const double mid = 0.5 * (std::log(97.0) + std::log(103.0));
  const auto expect = bridge_moments(std::log(100.0), mid, 0.08, c.grid.time(50), c.grid.time(60), 0.2);
  CHECK(st.target[1].mean == expect.mean);
  CHECK(st.target[1].sd == expect.sd);
  // log h is the sum over assets of log target / reference densities.
  const double s[2] = {std::log(99.0), std::log(101.5)};
  double out = 0.0;
  w->log_h(50, s, 1, 1, &out);
  double want = 0.0;
  for (int j = 0; j < 2; ++j) {
    const auto ref = marg.moments(static_cast<std::size_t>(j), 50);
    want += std::log(gauss_pdf(s[j], expect.mean, expect.sd) / gauss_pdf(s[j], ref.mean, ref.sd));
  }
  CHECK(out == doctest::Approx(want).epsilon(1e-12));

  SUBCASE("invalid configurations") {
    CHECK_THROWS_AS(brownian_bridge_target(c.basket, marg, c.option, c.grid, 1), std::invalid_argument);
    CHECK_THROWS_AS(brownian_bridge_target(c.basket, marg, c.option, c.grid, 61), std::invalid_argument);
    CHECK_THROWS_AS(brownian_bridge_target(c.basket, marg, c.option, c.grid, 60, -0.1), std::invalid_argument);
    BarrierOption bad = c.option;
    std::swap(bad.lower_log, bad.upper_log);
    CHECK_THROWS_AS(brownian_bridge_target(c.basket, marg, bad, c.grid, 60), std::invalid_argument);
    const ConstantVolMarginal flat(c.basket.s0(), {0.0}, c.grid.dt);
    CHECK_THROWS_AS(brownian_bridge_target(c.basket, flat, c.option, c.grid, 60), std::invalid_argument);
  }
}

TEST_CASE("TARN weight examples") {
  const double s0 = std::log(100.0);
  CHECK(tarn_weight_naive(1, s0, s0) == kWeightFloor);
  CHECK(tarn_weight_naive(1, s0 + 0.1, s0) == doctest::Approx(0.01).epsilon(1e-13));
  for (double a : {0.01, 0.07, 0.3}) {
    CHECK(tarn_weight_naive(2, s0 + a, s0) == doctest::Approx(tarn_weight_naive(2, s0 - a, s0)).epsilon(1e-12));
  }

  const double sigma = 0.05;
  const ConstantVolMarginal marg({s0}, {sigma}, 1.0 / 360.0);
  const int n = 30;
  const double t = n / 360.0;
  const double s = s0 + 0.05;
  const double p = gauss_pdf(s, s0 - 0.5 * sigma * sigma * t, sigma * std::sqrt(t));
  const double h = tarn_weight_density_corrected(n, s, s0, marg);
  CHECK(h == doctest::Approx(0.0025 / p).epsilon(1e-12));
  CHECK(h * p == doctest::Approx(0.0025).epsilon(1e-12));
  // Far in the tail the density underflows but the log-space value is finite.
  const double far = tarn_weight_density_corrected(n, s0 + 3.0, s0, marg);
  CHECK(far > 0.0);

  SUBCASE("vectorised weighting agrees with the scalar forms") {
    auto mp = std::make_shared<ConstantVolMarginal>(std::vector<double>{s0}, std::vector<double>{sigma}, 1.0 / 360.0);
    const TarnWeighting naive(TarnWeighting::Form::naive, s0, 5, nullptr, std::nullopt);
    const TarnWeighting dens(TarnWeighting::Form::density, s0, 5 * 30, mp, std::nullopt);
    std::vector<double> xs = {s0, s0 + 0.02, s0 - 0.11, s0 + 0.3};
    std::vector<double> a(xs.size());
    std::vector<double> b(xs.size());
    naive.log_h(3, xs.data(), xs.size(), xs.size(), a.data());
    dens.log_h(30, xs.data(), xs.size(), xs.size(), b.data());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      CHECK(a[i] == doctest::Approx(std::log(tarn_weight_naive(3, xs[i], s0))).epsilon(1e-13));
      CHECK(b[i] == doctest::Approx(std::log(tarn_weight_density_corrected(30, xs[i], s0, *mp))).epsilon(1e-12));
    }
    naive.log_h(6, xs.data(), xs.size(), xs.size(), a.data());
    for (double v : a) CHECK(v == 0.0);
    CHECK_THROWS_AS(TarnWeighting(TarnWeighting::Form::density, s0, 5, nullptr, std::nullopt), std::invalid_argument);
    CHECK_THROWS_AS(TarnWeighting(TarnWeighting::Form::mixture, s0, 5, mp, std::nullopt), std::invalid_argument);
    CHECK_THROWS_AS(TarnWeighting(TarnWeighting::Form::naive, s0, 5, nullptr, std::nullopt, 0.0), std::invalid_argument);
  }
}

TEST_CASE("mixture target") {
  const double s0 = std::log(100.0);
  auto marg = std::make_shared<ConstantVolMarginal>(std::vector<double>{s0}, std::vector<double>{0.05}, 30.0 / 360.0);
  PilotTarget pilot;
  pilot.mode = PilotTarget::Mode::escapers;
  pilot.left = {1, {-0.05, -0.08}, {0.02, 0.03}};
  pilot.right = {1, {0.06, 0.09}, {0.025, 0.02}};
  std::vector<double> xs = {s0 - 0.1, s0, s0 + 0.04, s0 + 0.12};
  std::vector<double> out(xs.size());

  SUBCASE("two components") {
    pilot.weight_left = 0.2;
    pilot.weight_right = 0.8;
    const auto w = mixture_target(pilot, s0, 2, marg);
    w->log_h(2, xs.data(), xs.size(), xs.size(), out.data());
    const auto ref = marg->moments(0, 2);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double x = xs[i] - s0;
      const double num = 0.2 * gauss_pdf(x, -0.08, 0.03) + 0.8 * gauss_pdf(x, 0.09, 0.02);
      CHECK(out[i] == doctest::Approx(std::log(num / gauss_pdf(xs[i], ref.mean, ref.sd))).epsilon(1e-12));
    }
  }
  SUBCASE("a zero weight leaves a single Gaussian") {
    pilot.weight_left = 0.0;
    pilot.weight_right = 1.0;
    const auto w = mixture_target(pilot, s0, 2, marg);
    w->log_h(1, xs.data(), xs.size(), xs.size(), out.data());
    const auto ref = marg->moments(0, 1);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double want = log_normal_pdf(xs[i] - s0, 0.06, 0.025) - log_normal_pdf(xs[i], ref.mean, ref.sd);
      CHECK(out[i] == doctest::Approx(want).epsilon(1e-13));
    }
  }
  SUBCASE("degenerate components are rejected") {
    pilot.weight_left = 0.2;
    pilot.weight_right = 0.8;
    pilot.right.sd[1] = 0.0;
    CHECK_THROWS_AS(mixture_target(pilot, s0, 2, marg), std::invalid_argument);
    pilot.right.sd[1] = 0.02;
    pilot.weight_right = 0.7;
    CHECK_THROWS_AS(mixture_target(pilot, s0, 2, marg), std::invalid_argument);
    pilot.weight_right = 0.8;
    CHECK_THROWS_AS(mixture_target(pilot, s0, 3, marg), std::invalid_argument);
  }
}

TEST_CASE("potentials of the unit weighting are the corridor indicators") {
  const BarrierCase c = small_barrier(3);
  const auto pot = build_potentials(std::make_shared<UnitWeighting>(), c.grid, c.option, 3);
  const auto key = key_from_seed(21);
  for (std::uint32_t i = 0; i < 100; ++i) {
    const auto path = simulate_path(c.basket, c.model, c.grid, key, i);
    double prev = 0.0;
    for (int n = 1; n <= c.grid.steps; ++n) {
      double g = 0.0;
      pot.log_potential(n, path[static_cast<std::size_t>(n)].logprices.data(), 1, 1, &prev, &g);
      if (c.grid.is_monitoring(n)) {
        const int ind = barrier_indicator(c.option, path[static_cast<std::size_t>(n)].logprices.data(), 3);
        CHECK(g == (ind == 1 ? 0.0 : kNegInf));
      } else {
        CHECK(g == 0.0);
      }
    }
  }
}

TEST_CASE("telescoping holds pathwise for every construction") {
  SUBCASE("barrier weightings") {
    const BarrierCase c = small_barrier(3);
    const ConstantVolMarginal marg(c.basket.s0(), {0.08}, c.grid.dt);
    const auto ind = [&](const std::vector<PathState>& p) { return log_indicator_product(p, c.grid, c.option); };
    check_telescoping(build_potentials(std::make_shared<UnitWeighting>(), c.grid, c.option, 3),
                      c.basket, c.model, c.grid, 1000, 31, ind);
    check_telescoping(build_potentials(brownian_bridge_target(c.basket, marg, c.option, c.grid, 60),
                                       c.grid, c.option, 3),
                      c.basket, c.model, c.grid, 1000, 32, ind);
    const PilotTarget pilot = fit_pilot_target(survivor_pilot(c, 4000, 33));
    check_telescoping(build_potentials(pilot_survivor_target(pilot, c.basket, marg), c.grid, c.option, 3),
                      c.basket, c.model, c.grid, 1000, 34, ind);
  }
  SUBCASE("barrier under local volatility") {
    const AssetBasket basket = AssetBasket::independent(2, 100.0);
    const TimeGrid grid = TimeGrid::periodic(2, 30, 1);
    const auto option = BarrierOption::from_prices(96.0, 104.0, 100.0, PayoffKind::put);
    const VolatilityModel lv = barrier_local_vol_curve();
    const auto marg = make_marginal(lv, basket, grid);
    check_telescoping(build_potentials(brownian_bridge_target(basket, *marg, option, grid, 60), grid, option, 2),
                      basket, lv, grid, 1000, 35,
                      [&](const std::vector<PathState>& p) { return log_indicator_product(p, grid, option); });
  }
  SUBCASE("TARN weightings under constant volatility") {
    const TarnSpec t;
    const VolatilityModel m = VolatilityModel::constant(0.05);
    const TimeGrid grid = tarn_grid(t, m);
    const int last = tarn_last_weighted_step(t, grid);
    CHECK(last == 5);
    const AssetBasket basket = AssetBasket::independent(1, 100.0);
    auto marg = std::shared_ptr<const MarginalModel>(make_marginal(m, basket, grid));
    const double s0 = basket.s0()[0];
    const PilotTarget pilot = fit_pilot_target(escaper_pilot(t, m, 200000, 36));
    const auto zero = [](const std::vector<PathState>&) { return 0.0; };
    for (auto form : {TarnWeighting::Form::naive, TarnWeighting::Form::density, TarnWeighting::Form::mixture}) {
      auto w = std::make_shared<TarnWeighting>(form, s0, last, marg,
                                               form == TarnWeighting::Form::mixture ? std::optional(pilot) : std::nullopt);
      check_telescoping(build_potentials(w, grid, std::nullopt, 1, last), basket, m, grid, 1000, 37, zero);
    }
  }
  SUBCASE("TARN weightings under local volatility") {
    const TarnSpec t;
    const VolatilityModel m = tarn_local_vol_curve();
    const TimeGrid grid = tarn_grid(t, m);
    const int last = tarn_last_weighted_step(t, grid);
    CHECK(last == 150);
    const AssetBasket basket = AssetBasket::independent(1, 100.0);
    auto crude = std::make_shared<ConstantVolMarginal>(basket.s0(), std::vector<double>{0.04}, grid.dt);
    auto w = std::make_shared<TarnWeighting>(TarnWeighting::Form::density, basket.s0()[0], last, crude, std::nullopt);
    check_telescoping(build_potentials(w, grid, std::nullopt, 1, last), basket, m, grid, 1000, 38,
                      [](const std::vector<PathState>&) { return 0.0; });
  }
}

TEST_CASE("potential sequence validation") {
  const BarrierCase c = small_barrier(2);
  CHECK_THROWS_AS(build_potentials(nullptr, c.grid, c.option, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_potentials(std::make_shared<UnitWeighting>(), c.grid, c.option, 2, 30), std::invalid_argument);
  CHECK_THROWS_AS(build_potentials(std::make_shared<UnitWeighting>(), c.grid, std::nullopt, 1, 61), std::invalid_argument);
  CHECK_THROWS_AS(build_potentials(std::make_shared<UnitWeighting>(), c.grid, c.option, 0), std::invalid_argument);
}

TEST_CASE("scaling a weighting leaves the SMC estimate unchanged") {
  const BarrierCase c = small_barrier(2);
  const ConstantVolMarginal marg(c.basket.s0(), {0.08}, c.grid.dt);
  const auto bridge = brownian_bridge_target(c.basket, marg, c.option, c.grid, 60);
  SmcConfig cfg;
  cfg.n_particles = 4000;
  cfg.seed = 41;
  cfg.record_diagnostics = true;
  const BarrierModel base(c.option, c.basket, c.model, c.grid, build_potentials(bridge, c.grid, c.option, 2));
  const BarrierModel scaled(c.option, c.basket, c.model, c.grid,
                            build_potentials(std::make_shared<ScaledWeighting>(bridge, std::log(37.5)),
                                             c.grid, c.option, 2));
  const SmcOutput a = run_smc(base, cfg);
  const SmcOutput b = run_smc(scaled, cfg);
  CHECK(a.resample_steps == b.resample_steps);
  REQUIRE(a.diagnostics.size() == b.diagnostics.size());
  for (std::size_t i = 0; i < a.diagnostics.size(); ++i) {
    CHECK(a.diagnostics[i].ess == doctest::Approx(b.diagnostics[i].ess).epsilon(1e-10));
  }
  CHECK(a.estimate > 0.0);
  CHECK(b.estimate == doctest::Approx(a.estimate).epsilon(1e-10));
}

TEST_CASE("pilot runs") {
  const BarrierCase c = small_barrier(1);
  const PilotSpec spec = survivor_pilot(c, 5000, 51);
  const PilotTarget a = fit_pilot_target(spec);
  SUBCASE("deterministic and independent of the worker count") {
    const int saved = omp_get_max_threads();
    omp_set_num_threads(3);
    const PilotTarget b = fit_pilot_target(spec);
    omp_set_num_threads(saved);
    CHECK(pilot_to_json(a) == pilot_to_json(b));
  }
  SUBCASE("survivor moments match a direct computation") {
    const auto key = key_from_seed(51);
    std::vector<double> sum(20, 0.0);
    std::vector<double> sumsq(20, 0.0);
    std::size_t alive = 0;
    for (std::uint32_t i = 0; i < 5000; ++i) {
      const auto p = simulate_path(c.basket, c.model, c.grid, key, i);
      if (log_indicator_product(p, c.grid, c.option) == kNegInf) continue;
      ++alive;
      for (int n = 40; n <= 59; ++n) {
        const double x = p[static_cast<std::size_t>(n)].logprices[0] - c.basket.s0()[0];
        sum[static_cast<std::size_t>(n - 40)] += x;
        sumsq[static_cast<std::size_t>(n - 40)] += x * x;
      }
    }
    CHECK(a.qualifying == alive);
    CHECK(survival_census(spec).survivors == alive);
    for (std::size_t u = 0; u < 20; ++u) {
      const double m = sum[u] / alive;
      const double sd = std::sqrt((sumsq[u] - alive * m * m) / (alive - 1.0));
      CHECK(a.survivors.mean[u] == doctest::Approx(m).epsilon(1e-9));
      CHECK(a.survivors.sd[u] == doctest::Approx(sd).epsilon(1e-9));
    }
  }
  SUBCASE("JSON round trip") {
    const std::string text = pilot_to_json(a);
    const PilotTarget b = pilot_from_json(text);
    CHECK(pilot_to_json(b) == text);
    CHECK(b.survivors.mean == a.survivors.mean);
    CHECK(b.survivors.sd == a.survivors.sd);
    CHECK(b.qualifying == a.qualifying);
  }
  SUBCASE("too few qualifying paths is an error") {
    PilotSpec tight = spec;
    tight.barrier = BarrierOption::from_prices(99.9, 100.1, 100.0, PayoffKind::call);
    CHECK_THROWS_AS(fit_pilot_target(tight), std::runtime_error);
  }
  SUBCASE("escaper pilot") {
    const TarnSpec t;
    const VolatilityModel m = VolatilityModel::constant(0.05);
    const PilotTarget e = fit_pilot_target(escaper_pilot(t, m, 200000, 52));
    const EscapeCensus census = escape_census(escaper_pilot(t, m, 200000, 52));
    CHECK(e.left_count == census.left);
    CHECK(e.right_count == census.right);
    CHECK(e.weight_left + e.weight_right == doctest::Approx(1.0).epsilon(1e-15));
    const PilotTarget back = pilot_from_json(pilot_to_json(e));
    CHECK(back.left.mean == e.left.mean);
    CHECK(back.right.sd == e.right.sd);
    CHECK(back.weight_left == e.weight_left);
    // Left escapers sit below the start, right ones above.
    CHECK(e.left.mean.back() < 0.0);
    CHECK(e.right.mean.back() > 0.0);
  }
}
