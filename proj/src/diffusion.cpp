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

#include "wfsmc/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "wfsmc/rng.hpp"

namespace wfsmc {

TimeGrid TimeGrid::periodic(int periods, int period_steps, int days_per_step) {
  TimeGrid g;
  g.steps = periods * period_steps;
  g.days_per_step = days_per_step;
  g.dt = days_per_step / kDaysPerYear;
  for (int i = 1; i <= periods; ++i) g.monitoring.push_back(i * period_steps);
  g.validate(true);
  return g;
}

bool TimeGrid::is_monitoring(int n) const noexcept {
  return std::binary_search(monitoring.begin(), monitoring.end(), n);
}

int TimeGrid::monitoring_rank(int n) const noexcept {
  const auto it = std::lower_bound(monitoring.begin(), monitoring.end(), n);
  if (it == monitoring.end() || *it != n) return 0;
  return static_cast<int>(it - monitoring.begin()) + 1;
}

void TimeGrid::validate(bool last_must_be_horizon) const {
  if (steps < 1) throw std::invalid_argument("time grid needs at least one step");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("time step must be positive");
  for (std::size_t i = 0; i < monitoring.size(); ++i) {
    if (monitoring[i] < 1 || monitoring[i] > steps) {
      throw std::invalid_argument("monitoring step outside the grid");
    }
    if (i > 0 && monitoring[i] <= monitoring[i - 1]) {
      throw std::invalid_argument("monitoring steps must be strictly increasing");
    }
  }
  if (last_must_be_horizon && (monitoring.empty() || monitoring.back() != steps)) {
    throw std::invalid_argument("last monitoring step must equal the horizon");
  }
}

VolatilityModel VolatilityModel::constant(double sigma) {
  return constant(std::vector<double>{sigma});
}

VolatilityModel VolatilityModel::constant(std::vector<double> per_asset) {
  if (per_asset.empty()) throw std::invalid_argument("constant volatility needs a value");
  for (double s : per_asset) {
    if (!(s >= 0.0) || !std::isfinite(s)) {
      throw std::invalid_argument("volatility must be finite and nonnegative");
    }
  }
  VolatilityModel m;
  m.kind_ = Kind::constant;
  m.sigmas_ = std::move(per_asset);
  return m;
}

VolatilityModel VolatilityModel::local(std::vector<VolKnot> knots) {
  if (knots.size() < 2) throw std::invalid_argument("local volatility needs two knots");
  for (std::size_t i = 0; i < knots.size(); ++i) {
    if (!(knots[i].vol > 0.0) || !(knots[i].price > 0.0)) {
      throw std::invalid_argument("knot prices and vols must be positive");
    }
    if (i > 0 && !(knots[i].price > knots[i - 1].price)) {
      throw std::invalid_argument("knot prices must be strictly increasing");
    }
  }
  VolatilityModel m;
  m.kind_ = Kind::local;
  m.knots_ = std::move(knots);
  const std::size_t n = m.knots_.size();
  m.knot_prices_.resize(n);
  m.knot_vols_.resize(n);
  m.slopes_.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    m.knot_prices_[i] = m.knots_[i].price;
    m.knot_vols_[i] = m.knots_[i].vol;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    m.slopes_[i] = (m.knot_vols_[i + 1] - m.knot_vols_[i]) /
                   (m.knot_prices_[i + 1] - m.knot_prices_[i]);
  }
  return m;
}

double VolatilityModel::sigma(std::size_t asset) const {
  if (kind_ != Kind::constant) throw std::invalid_argument("sigma() on a local model");
  return sigmas_.size() == 1 ? sigmas_[0] : sigmas_.at(asset);
}

kernels::LocalVolTable VolatilityModel::table() const noexcept {
  return {knot_prices_.data(), knot_vols_.data(), slopes_.data(), knot_prices_.size()};
}

bool VolatilityModel::is_zero() const noexcept {
  if (kind_ != Kind::constant) return false;
  return std::all_of(sigmas_.begin(), sigmas_.end(), [](double s) { return s == 0.0; });
}

VolatilityModel barrier_local_vol_curve() {
  return VolatilityModel::local({{1e-6, 0.12}, {60, 0.11}, {70, 0.105},
                                 {80, 0.101}, {90, 0.097}, {100, 0.093},
                                 {110, 0.098}, {120, 0.10}, {130, 0.105},
                                 {140, 0.11}, {1e6, 0.17}});
}

VolatilityModel tarn_local_vol_curve() {
  return VolatilityModel::local({{1e-6, 0.055}, {60, 0.051}, {90, 0.045},
                                 {93, 0.041}, {98, 0.037}, {100, 0.035},
                                 {103, 0.038}, {107, 0.04}, {110, 0.045},
                                 {140, 0.05}, {1e6, 0.055}});
}

double local_vol(const VolatilityModel& model, double price) {
  if (model.kind() != VolatilityModel::Kind::local) {
    throw std::invalid_argument("local_vol() on a constant model");
  }
  const kernels::LocalVolTable t = model.table();
  const std::size_t last = t.size - 1;
  if (!(price >= t.knots[0] && price <= t.knots[last])) {
    throw std::out_of_range("price " + std::to_string(price) + " outside the volatility knots");
  }
  // Same segment search and rounding as the Euler kernels.
  std::size_t idx = 0;
  for (std::size_t k = 1; k < last; ++k) idx += (t.knots[k] <= price) ? 1 : 0;
  return std::fma(t.slopes[idx], price - t.knots[idx], t.vols[idx]);
}

AssetBasket AssetBasket::independent(std::size_t d, double s0_price) {
  if (d < 1) throw std::invalid_argument("basket needs at least one asset");
  if (!(s0_price > 0.0)) throw std::invalid_argument("initial price must be positive");
  return AssetBasket(std::vector<double>(d, std::log(s0_price)),
                     Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d),
                                               static_cast<Eigen::Index>(d)));
}

AssetBasket::AssetBasket(std::vector<double> s0_log, Eigen::MatrixXd correlation)
    : s0_(std::move(s0_log)), corr_(std::move(correlation)) {
  const auto d = static_cast<Eigen::Index>(s0_.size());
  if (d < 1) throw std::invalid_argument("basket needs at least one asset");
  if (corr_.rows() != d || corr_.cols() != d) {
    throw std::invalid_argument("correlation matrix has the wrong shape");
  }
  for (double s : s0_) {
    if (!std::isfinite(s)) throw std::invalid_argument("initial log-price must be finite");
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    if (corr_(i, i) != 1.0) throw std::invalid_argument("correlation diagonal must be 1");
    for (Eigen::Index j = 0; j < i; ++j) {
      if (std::abs(corr_(i, j) - corr_(j, i)) > 1e-12) {
        throw std::invalid_argument("correlation matrix must be symmetric");
      }
    }
  }
  identity_ = corr_.isIdentity(0.0);
  if (identity_) {
    factor_ = corr_;
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(corr_);
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -1e-10) {
    throw std::invalid_argument("correlation matrix is not positive semi-definite");
  }
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  factor_ = eig.eigenvectors() * root.asDiagonal();
}

namespace {

void check_finite(const std::vector<double>& s) {
  for (double v : s) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite log-price state");
  }
}

}  // namespace

PathState euler_step(const PathState& state, const VolatilityModel& model,
                     const AssetBasket& basket, const TimeGrid& grid,
                     const std::vector<double>& z) {
  if (state.step >= grid.steps) throw std::logic_error("euler_step past the horizon");
  if (state.logprices.size() != basket.dim() || z.size() != basket.dim()) {
    throw std::invalid_argument("state and draw must match the basket dimension");
  }
  check_finite(state.logprices);
  const kernels::KernelTable& k = kernels::active();
  PathState next{state.step + 1, state.logprices};
  for (std::size_t j = 0; j < basket.dim(); ++j) {
    if (model.kind() == VolatilityModel::Kind::constant) {
      const double sig = model.sigma(j);
      k.euler_constant(&next.logprices[j], &z[j], 1, -0.5 * sig * sig * grid.dt,
                       sig * std::sqrt(grid.dt));
    } else if (k.euler_local(&next.logprices[j], &z[j], 1, model.table(),
                             -0.5 * grid.dt, std::sqrt(grid.dt)) != 0) {
      throw std::out_of_range("price outside the volatility knots");
    }
  }
  return next;
}

BasketPropagator::BasketPropagator(const AssetBasket& basket,
                                   const VolatilityModel& model,
                                   const TimeGrid& grid)
    : basket_(basket), model_(model), grid_(grid) {
  if (model.kind() == VolatilityModel::Kind::constant) {
    if (model.sigmas().size() != 1 && model.sigmas().size() != basket.dim()) {
      throw std::invalid_argument("per-asset volatility list has the wrong length");
    }
    for (std::size_t j = 0; j < basket.dim(); ++j) {
      const double sig = model.sigma(j);
      drift_.push_back(-0.5 * sig * sig * grid.dt);
      diffusion_.push_back(sig * std::sqrt(grid.dt));
    }
  }
}

void BasketPropagator::advance(double* states, std::size_t stride,
                               std::size_t count, std::uint32_t first_counter,
                               int step, kernels::PhiloxKey key) const {
  constexpr std::size_t kBlock = 512;
  const std::size_t d = basket_.dim();
  const kernels::KernelTable& k = kernels::active();
  thread_local std::vector<double> z;
  thread_local std::vector<double> zc;
  z.resize(d * kBlock);
  if (!basket_.is_identity()) zc.resize(d * kBlock);
  const bool local = model_.kind() == VolatilityModel::Kind::local;
  const kernels::LocalVolTable table = model_.table();
  const double neg_half_dt = -0.5 * grid_.dt;
  const double sqrt_dt = std::sqrt(grid_.dt);
  std::size_t bad = 0;

  for (std::size_t off = 0; off < count; off += kBlock) {
    const std::size_t b = std::min(kBlock, count - off);
    for (std::size_t p = 0; 2 * p < d; ++p) {
      kernels::NormalStream st;
      st.key = key;
      st.first_particle = first_counter + static_cast<std::uint32_t>(off);
      st.step = static_cast<std::uint32_t>(step);
      st.lane = static_cast<std::uint32_t>(p);
      st.tag = static_cast<std::uint32_t>(StreamTag::diffusion);
      double* second = (2 * p + 1 < d) ? &z[(2 * p + 1) * kBlock] : nullptr;
      k.normals(st, b, &z[2 * p * kBlock], second);
    }
    const double* draws = z.data();
    if (!basket_.is_identity()) {
      const Eigen::MatrixXd& a = basket_.factor();
      for (std::size_t j = 0; j < d; ++j) {
        double* out = &zc[j * kBlock];
        std::fill(out, out + b, 0.0);
        for (std::size_t m = 0; m < d; ++m) {
          const double c = a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m));
          if (c == 0.0) continue;
          const double* in = &z[m * kBlock];
          for (std::size_t i = 0; i < b; ++i) out[i] = out[i] + c * in[i];
        }
      }
      draws = zc.data();
    }
    for (std::size_t j = 0; j < d; ++j) {
      double* s = states + j * stride + off;
      const double* zj = draws + j * kBlock;
      if (local) {
        bad += k.euler_local(s, zj, b, table, neg_half_dt, sqrt_dt);
      } else {
        k.euler_constant(s, zj, b, drift_[j], diffusion_[j]);
      }
    }
  }
  if (bad != 0) throw std::out_of_range("price outside the volatility knots");
}

std::vector<PathState> simulate_path(const AssetBasket& basket,
                                     const VolatilityModel& model,
                                     const TimeGrid& grid,
                                     kernels::PhiloxKey key,
                                     std::uint32_t particle) {
  const BasketPropagator prop(basket, model, grid);
  std::vector<PathState> path;
  path.reserve(static_cast<std::size_t>(grid.steps) + 1);
  path.push_back({0, basket.s0()});
  std::vector<double> s = basket.s0();
  for (int n = 1; n <= grid.steps; ++n) {
    prop.advance(s.data(), 1, 1, particle, n, key);
    path.push_back({n, s});
  }
  return path;
}

double log_normal_pdf(double x, double mean, double sd) noexcept {
  const double u = (x - mean) / sd;
  return -0.5 * u * u - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double MarginalModel::log_density(int n, const double* s, std::size_t dim) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    const GaussianMoments m = moments(j, n);
    acc += log_normal_pdf(s[j], m.mean, m.sd);
  }
  return acc;
}

ConstantVolMarginal::ConstantVolMarginal(std::vector<double> s0,
                                         std::vector<double> sigmas, double dt)
    : s0_(std::move(s0)), sigmas_(std::move(sigmas)), dt_(dt) {
  if (sigmas_.empty()) throw std::invalid_argument("marginal needs a volatility");
}

GaussianMoments ConstantVolMarginal::moments(std::size_t asset, int n) const {
  if (n < 1) throw std::invalid_argument("marginal at step 0 is a point mass");
  const double sig = sigmas_.size() == 1 ? sigmas_[0] : sigmas_.at(asset);
  const double t = n * dt_;
  return {s0_.at(asset) - 0.5 * sig * sig * t, sig * std::sqrt(t)};
}

double ConstantVolMarginal::bridge_vol(std::size_t asset, int) const {
  return sigmas_.size() == 1 ? sigmas_[0] : sigmas_.at(asset);
}

LocalVolMarginal::LocalVolMarginal(const VolatilityModel& model,
                                   std::vector<double> s0, double dt, int steps)
    : dt_(dt), steps_(steps) {
  mean_.resize(s0.size());
  vol_.resize(s0.size());
  for (std::size_t j = 0; j < s0.size(); ++j) {
    auto& m = mean_[j];
    auto& v = vol_[j];
    m.resize(static_cast<std::size_t>(steps) + 1);
    v.resize(static_cast<std::size_t>(steps) + 1);
    m[0] = s0[j];
    for (int n = 0; n <= steps; ++n) {
      const auto u = static_cast<std::size_t>(n);
      v[u] = local_vol(model, std::exp(m[u]));
      if (n < steps) m[u + 1] = m[u] - 0.5 * dt * v[u] * v[u];
    }
  }
}

GaussianMoments LocalVolMarginal::moments(std::size_t asset, int n) const {
  if (n < 1 || n > steps_) throw std::invalid_argument("marginal step out of range");
  const auto u = static_cast<std::size_t>(n);
  const double prev_vol = vol_.at(asset)[u - 1];
  return {mean_[asset][u], prev_vol * std::sqrt(n * dt_)};
}

double LocalVolMarginal::bridge_vol(std::size_t asset, int n) const {
  return vol_.at(asset).at(static_cast<std::size_t>(n));
}

double LocalVolMarginal::mean(std::size_t asset, int n) const {
  return mean_.at(asset).at(static_cast<std::size_t>(n));
}

double marginal_density_constant_vol(const AssetBasket& basket,
                                     const VolatilityModel& model,
                                     const TimeGrid& grid, int n,
                                     const std::vector<double>& s) {
  if (model.kind() != VolatilityModel::Kind::constant) {
    throw std::invalid_argument("constant-vol marginal on a local model");
  }
  if (s.size() != basket.dim()) throw std::invalid_argument("state has the wrong dimension");
  const ConstantVolMarginal m(basket.s0(), model.sigmas(), grid.dt);
  return std::exp(m.log_density(n, s.data(), s.size()));
}

std::unique_ptr<MarginalModel> approx_marginal_local_vol(
    const VolatilityModel& model, const TimeGrid& grid,
    const std::vector<double>& s0) {
  if (model.kind() != VolatilityModel::Kind::local) {
    throw std::invalid_argument("local-vol marginal on a constant model");
  }
  return std::make_unique<LocalVolMarginal>(model, s0, grid.dt, grid.steps);
}

std::unique_ptr<MarginalModel> make_marginal(const VolatilityModel& model,
                                             const AssetBasket& basket,
                                             const TimeGrid& grid) {
  if (model.kind() == VolatilityModel::Kind::local) {
    return approx_marginal_local_vol(model, grid, basket.s0());
  }
  return std::make_unique<ConstantVolMarginal>(basket.s0(), model.sigmas(), grid.dt);
}

}  // namespace wfsmc
