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

#include <cmath>
#include <numbers>
#include <vector>

#include "wfsmc/diffusion.hpp"
#include "wfsmc/rng.hpp"

using namespace wfsmc;

namespace {

const double kLog100 = std::log(100.0);

// Simulates `paths` single-asset paths through the propagator and returns
// the terminal log-prices.
std::vector<double> terminal(const VolatilityModel& m, const TimeGrid& g, std::size_t paths,
                             std::uint64_t seed, std::size_t dim = 1) {
  const AssetBasket b = AssetBasket::independent(dim, 100.0);
  const BasketPropagator prop(b, m, g);
  std::vector<double> s(paths * dim, kLog100);
  for (int n = 1; n <= g.steps; ++n) prop.advance(s.data(), paths, paths, 0, n, key_from_seed(seed));
  return s;
}

}  // namespace

TEST_CASE("time grid") {
  const TimeGrid g = TimeGrid::periodic(3, 10);
  CHECK(g.steps == 30);
  CHECK(g.dt == doctest::Approx(1.0 / 360.0));
  CHECK(g.monitoring == std::vector<int>{10, 20, 30});
  CHECK(g.is_monitoring(20));
  CHECK_FALSE(g.is_monitoring(21));
  CHECK(g.monitoring_rank(30) == 3);
  CHECK(g.monitoring_rank(5) == 0);
  TimeGrid bad = g;
  bad.monitoring = {10, 10};
  CHECK_THROWS_AS(bad.validate(false), std::invalid_argument);
  bad.monitoring = {10, 20};
  CHECK_NOTHROW(bad.validate(false));
  CHECK_THROWS_AS(bad.validate(true), std::invalid_argument);
  bad.monitoring = {0};
  CHECK_THROWS_AS(bad.validate(false), std::invalid_argument);
}

TEST_CASE("euler step examples") {
  const AssetBasket b = AssetBasket::independent(1, 100.0);
  const TimeGrid g = TimeGrid::periodic(1, 10);
  const PathState s0{0, {kLog100}};

  SUBCASE("zero volatility leaves the state unchanged") {
    const PathState next = euler_step(s0, VolatilityModel::constant(0.0), b, g, {2.7});
    CHECK(next.logprices[0] == s0.logprices[0]);
    CHECK(next.step == 1);
  }
  SUBCASE("drift only") {
    const PathState next = euler_step(s0, VolatilityModel::constant(0.08), b, g, {0.0});
    CHECK(next.logprices[0] == doctest::Approx(4.6051613).epsilon(1e-7));
    CHECK(next.logprices[0] == doctest::Approx(kLog100 - 0.0064 / 720.0).epsilon(1e-15));
  }
  SUBCASE("unit shock") {
    const PathState next = euler_step(s0, VolatilityModel::constant(0.08), b, g, {1.0});
    CHECK(std::abs(next.logprices[0] - 4.6093777) < 1e-6);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(euler_step({10, {kLog100}}, VolatilityModel::constant(0.1), b, g, {0.0}),
                    std::logic_error);
    CHECK_THROWS_AS(euler_step({0, {std::nan("")}}, VolatilityModel::constant(0.1), b, g, {0.0}),
                    std::invalid_argument);
  }
  SUBCASE("local volatility uses the price at the start of the step") {
    const VolatilityModel lv = barrier_local_vol_curve();
    const PathState next = euler_step(s0, lv, b, g, {0.5});
    const double sig = 0.093;
    const double want = kLog100 - 0.5 * sig * sig / 360.0 + sig * std::sqrt(1.0 / 360.0) * 0.5;
    CHECK(next.logprices[0] == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("local volatility curves") {
  const VolatilityModel b = barrier_local_vol_curve();
  CHECK(local_vol(b, 100.0) == doctest::Approx(0.093).epsilon(1e-15));
  CHECK(local_vol(b, 95.0) == doctest::Approx(0.095).epsilon(1e-14));
  const VolatilityModel t = tarn_local_vol_curve();
  CHECK(local_vol(t, 100.0) == doctest::Approx(0.035).epsilon(1e-15));
  // Every knot is reproduced and segment midpoints are linear.
  for (const VolatilityModel* m : {&b, &t}) {
    const auto& k = m->knots();
    for (std::size_t i = 0; i < k.size(); ++i) {
      CHECK(local_vol(*m, k[i].price) == doctest::Approx(k[i].vol).epsilon(1e-12));
      if (i + 1 < k.size()) {
        const double mid = 0.5 * (k[i].price + k[i + 1].price);
        CHECK(local_vol(*m, mid) == doctest::Approx(0.5 * (k[i].vol + k[i + 1].vol)).epsilon(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(local_vol(b, 2e6), std::out_of_range);
  CHECK_THROWS_AS(local_vol(VolatilityModel::constant(0.1), 100.0), std::invalid_argument);
  CHECK_THROWS_AS(VolatilityModel::local({{100.0, 0.1}, {90.0, 0.2}}), std::invalid_argument);
  CHECK_THROWS_AS(VolatilityModel::constant(-0.1), std::invalid_argument);
}

TEST_CASE("asset basket validation and factor") {
  Eigen::MatrixXd c(2, 2);
  c << 1.0, 0.6, 0.6, 1.0;
  const AssetBasket b({kLog100, kLog100}, c);
  CHECK_FALSE(b.is_identity());
  CHECK((b.factor() * b.factor().transpose() - c).norm() < 1e-14);
  Eigen::MatrixXd asym = c;
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(AssetBasket({kLog100, kLog100}, asym), std::invalid_argument);
  Eigen::MatrixXd diag = c;
  diag(1, 1) = 2.0;
  CHECK_THROWS_AS(AssetBasket({kLog100, kLog100}, diag), std::invalid_argument);
  Eigen::MatrixXd npsd(2, 2);
  npsd << 1.0, 1.5, 1.5, 1.0;
  CHECK_THROWS_AS(AssetBasket({kLog100, kLog100}, npsd), std::invalid_argument);
  CHECK(AssetBasket::independent(3, 100.0).is_identity());
}

TEST_CASE("simulated paths") {
  const AssetBasket b1 = AssetBasket::independent(1, 100.0);
  SUBCASE("zero volatility gives the constant path") {
    const auto path = simulate_path(b1, VolatilityModel::constant(0.0), TimeGrid::periodic(1, 50),
                                    key_from_seed(3), 17);
    CHECK(path.size() == 51);
    for (const auto& p : path) CHECK(p.logprices[0] == kLog100);
  }
  SUBCASE("terminal law under constant volatility") {
    const TimeGrid g = TimeGrid::periodic(1, 540);
    const std::size_t m = 100000;
    const auto s = terminal(VolatilityModel::constant(0.08), g, m, 99);
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= m;
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    var /= (m - 1);
    const double want_sd = 0.08 * std::sqrt(540.0 / 360.0);
    CHECK(std::abs(std::sqrt(var) - 0.09798) < 0.001);
    CHECK(std::abs(std::sqrt(var) - want_sd) < 0.001);
    CHECK(std::abs(mean - (kLog100 - 0.5 * want_sd * want_sd)) < 4.0 * want_sd / std::sqrt(m));
  }
  SUBCASE("independent assets are uncorrelated") {
    const std::size_t m = 10000;
    const auto s = terminal(VolatilityModel::constant(0.2), TimeGrid::periodic(1, 20), m, 5, 2);
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < m; ++i) { ma += s[i]; mb += s[m + i]; }
    ma /= m; mb /= m;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < m; ++i) {
      sab += (s[i] - ma) * (s[m + i] - mb);
      saa += (s[i] - ma) * (s[i] - ma);
      sbb += (s[m + i] - mb) * (s[m + i] - mb);
    }
    CHECK(std::abs(sab / std::sqrt(saa * sbb)) < 0.02);
  }
  SUBCASE("correlated assets follow the correlation matrix") {
    Eigen::MatrixXd c(3, 3);
    c << 1.0, 0.5, 0.2, 0.5, 1.0, -0.3, 0.2, -0.3, 1.0;
    const AssetBasket b({kLog100, kLog100, kLog100}, c);
    const TimeGrid g = TimeGrid::periodic(1, 1);
    const std::size_t m = 100000;
    const BasketPropagator prop(b, VolatilityModel::constant(0.2), g);
    std::vector<double> s(3 * m, kLog100);
    prop.advance(s.data(), m, m, 0, 1, key_from_seed(8));
    const auto corr = [&](std::size_t x, std::size_t y) {
      double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
      for (std::size_t i = 0; i < m; ++i) {
        const double a = s[x * m + i], bb = s[y * m + i];
        sx += a; sy += bb; sxy += a * bb; sxx += a * a; syy += bb * bb;
      }
      const double cov = sxy / m - (sx / m) * (sy / m);
      return cov / std::sqrt((sxx / m - (sx / m) * (sx / m)) * (syy / m - (sy / m) * (sy / m)));
    };
    CHECK(std::abs(corr(0, 1) - 0.5) < 0.01);
    CHECK(std::abs(corr(0, 2) - 0.2) < 0.01);
    CHECK(std::abs(corr(1, 2) + 0.3) < 0.01);
  }
  SUBCASE("paths agree with the blocked propagator for the same slot") {
    const TimeGrid g = TimeGrid::periodic(2, 15);
    const VolatilityModel lv = barrier_local_vol_curve();
    const AssetBasket b3 = AssetBasket::independent(3, 100.0);
    const auto key = key_from_seed(21);
    const std::size_t m = 700;
    std::vector<double> s(3 * m, kLog100);
    const BasketPropagator prop(b3, lv, g);
    for (int n = 1; n <= g.steps; ++n) prop.advance(s.data(), m, m, 0, n, key);
    for (std::uint32_t i : {0u, 1u, 511u, 512u, 699u}) {
      const auto path = simulate_path(b3, lv, g, key, i);
      for (std::size_t j = 0; j < 3; ++j) CHECK(path.back().logprices[j] == s[j * m + i]);
    }
  }
  SUBCASE("local volatility leaving the knots is reported") {
    const VolatilityModel narrow = VolatilityModel::local({{99.0, 0.5}, {101.0, 0.5}});
    const BasketPropagator prop(b1, narrow, TimeGrid::periodic(1, 100));
    std::vector<double> s(64, kLog100);
    CHECK_THROWS_AS(
        for (int n = 1; n <= 100; ++n) prop.advance(s.data(), 64, 64, 0, n, key_from_seed(1)),
        std::out_of_range);
  }
}

TEST_CASE("constant-volatility marginal density") {
  const AssetBasket b = AssetBasket::independent(1, 100.0);
  const TimeGrid g = TimeGrid::periodic(1, 360);
  const VolatilityModel m = VolatilityModel::constant(0.1);
  CHECK(marginal_density_constant_vol(b, m, g, 360, {kLog100 - 0.005}) ==
        doctest::Approx(3.98942).epsilon(1e-5));
  CHECK(marginal_density_constant_vol(b, m, g, 360, {kLog100 - 0.005}) ==
        doctest::Approx(1.0 / (0.1 * std::sqrt(2.0 * std::numbers::pi))).epsilon(1e-12));
  CHECK_THROWS_AS(marginal_density_constant_vol(b, m, g, 0, {kLog100}), std::invalid_argument);

  const AssetBasket b2 = AssetBasket::independent(2, 100.0);
  const double one = marginal_density_constant_vol(b, m, g, 100, {4.58});
  CHECK(marginal_density_constant_vol(b2, m, g, 100, {4.58, 4.58}) ==
        doctest::Approx(one * one).epsilon(1e-12));

  // Midpoint rule over +-12 sd.
  const double sd = 0.1 * std::sqrt(100.0 / 360.0);
  const double mu = kLog100 - 0.5 * sd * sd;
  const int cells = 20000;
  const double h = 24.0 * sd / cells;
  double integral = 0.0;
  for (int i = 0; i < cells; ++i) {
    integral += marginal_density_constant_vol(b, m, g, 100, {mu - 12.0 * sd + (i + 0.5) * h}) * h;
  }
  CHECK(std::abs(integral - 1.0) < 1e-6);
}

TEST_CASE("local-volatility marginal approximation") {
  const TimeGrid g = TimeGrid::periodic(1, 540);
  SUBCASE("first step of the barrier curve") {
    const auto m = approx_marginal_local_vol(barrier_local_vol_curve(), g, {kLog100});
    const auto& lv = dynamic_cast<const LocalVolMarginal&>(*m);
    CHECK(std::abs(lv.mean(0, 1) - 4.6051582) < 5e-8);
    CHECK(lv.mean(0, 1) == doctest::Approx(kLog100 - 0.5 * 0.093 * 0.093 / 360.0).epsilon(1e-15));
    for (int n = 1; n <= 540; ++n) CHECK(lv.mean(0, n) < lv.mean(0, n - 1));
    CHECK(lv.bridge_vol(0, 0) == doctest::Approx(0.093).epsilon(1e-14));
  }
  SUBCASE("flat curve reduces to the constant marginal") {
    const VolatilityModel flat = VolatilityModel::local({{1e-6, 0.12}, {100.0, 0.12}, {1e6, 0.12}});
    const auto m = approx_marginal_local_vol(flat, g, {kLog100});
    const ConstantVolMarginal c({kLog100}, {0.12}, g.dt);
    for (int n : {1, 2, 100, 540}) {
      CHECK(std::abs(m->moments(0, n).mean - c.moments(0, n).mean) < 1e-12);
      CHECK(std::abs(m->moments(0, n).sd - c.moments(0, n).sd) < 1e-12);
      const double s = kLog100 - 0.03;
      CHECK(std::abs(m->log_density(n, &s, 1) - c.log_density(n, &s, 1)) < 1e-10);
    }
  }
  SUBCASE("rejects a constant model") {
    CHECK_THROWS_AS(approx_marginal_local_vol(VolatilityModel::constant(0.1), g, {kLog100}),
                    std::invalid_argument);
  }
}
