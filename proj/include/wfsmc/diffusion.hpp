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

/// \file diffusion.hpp
/// Zero-drift log-price dynamics for a basket of assets, explicit Euler
/// discretisation, and the Gaussian marginal approximations used to build
/// weighting functions.

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <vector>

#include "wfsmc/kernels.hpp"

namespace wfsmc {

inline constexpr double kDaysPerYear = 360.0;

/// Uniform time grid. Step n ends at t_n = n * dt.
struct TimeGrid {
  int steps = 0;
  int days_per_step = 1;
  double dt = 1.0 / kDaysPerYear;
  /// Monitoring or fixing step indices, strictly increasing, within [1, steps].
  std::vector<int> monitoring;

  /// `periods` monitoring dates every `period_steps` steps of `days_per_step` days.
  static TimeGrid periodic(int periods, int period_steps, int days_per_step = 1);

  double time(int n) const noexcept { return n * dt; }
  bool is_monitoring(int n) const noexcept;
  /// 0 if n is not a monitoring step, otherwise its 1-based rank.
  int monitoring_rank(int n) const noexcept;
  /// Throws std::invalid_argument on a malformed grid.
  void validate(bool last_must_be_horizon) const;
};

struct VolKnot {
  double price;
  double vol;
};

class VolatilityModel {
 public:
  enum class Kind { constant, local };

  /// Same volatility for every asset. sigma >= 0 (zero is the degenerate case).
  static VolatilityModel constant(double sigma);
  static VolatilityModel constant(std::vector<double> per_asset);
  /// Piecewise-linear in (price, vol); knots strictly increasing in price.
  static VolatilityModel local(std::vector<VolKnot> knots);

  Kind kind() const noexcept { return kind_; }
  /// Constant kind only; a single value is broadcast to every asset.
  double sigma(std::size_t asset) const;
  const std::vector<double>& sigmas() const noexcept { return sigmas_; }
  const std::vector<VolKnot>& knots() const noexcept { return knots_; }
  kernels::LocalVolTable table() const noexcept;
  bool is_zero() const noexcept;

 private:
  Kind kind_ = Kind::constant;
  std::vector<double> sigmas_;
  std::vector<VolKnot> knots_;
  std::vector<double> knot_prices_;
  std::vector<double> knot_vols_;
  std::vector<double> slopes_;
};

/// Barrier-option curve: smile with its minimum 0.093 at 100.
VolatilityModel barrier_local_vol_curve();
/// TARN curve: minimum 0.035 at 100, below 0.04 inside (90, 110).
VolatilityModel tarn_local_vol_curve();

/// Linear interpolation of a local curve. Throws std::out_of_range outside
/// the knot range and std::invalid_argument for a constant model.
double local_vol(const VolatilityModel& model, double price);

class AssetBasket {
 public:
  /// d independent assets all starting at `s0_price`.
  static AssetBasket independent(std::size_t d, double s0_price);
  /// Correlation must be symmetric PSD with unit diagonal.
  AssetBasket(std::vector<double> s0_log, Eigen::MatrixXd correlation);

  std::size_t dim() const noexcept { return s0_.size(); }
  const std::vector<double>& s0() const noexcept { return s0_; }
  const Eigen::MatrixXd& correlation() const noexcept { return corr_; }
  /// Square-root factor A with A A^T = correlation.
  const Eigen::MatrixXd& factor() const noexcept { return factor_; }
  bool is_identity() const noexcept { return identity_; }

 private:
  std::vector<double> s0_;
  Eigen::MatrixXd corr_;
  Eigen::MatrixXd factor_;
  bool identity_ = true;
};

struct PathState {
  int step = 0;
  std::vector<double> logprices;
};

/// Explicit Euler step; `z` is an already-correlated N(0, correlation) draw.
PathState euler_step(const PathState& state, const VolatilityModel& model,
                     const AssetBasket& basket, const TimeGrid& grid,
                     const std::vector<double>& z);

/// Advances a block of particles in place. States are asset-major:
/// `states[j * stride + i]` is asset j of the i-th particle in the block,
/// which draws from counter (first_counter + i, step, asset pair, diffusion).
class BasketPropagator {
 public:
  BasketPropagator(const AssetBasket& basket, const VolatilityModel& model,
                   const TimeGrid& grid);

  /// Moves `count` particles from step-1 to `step`. Throws std::out_of_range
  /// if a local-vol price leaves the knot range.
  void advance(double* states, std::size_t stride, std::size_t count,
               std::uint32_t first_counter, int step,
               kernels::PhiloxKey key) const;

  const AssetBasket& basket() const noexcept { return basket_; }
  const VolatilityModel& model() const noexcept { return model_; }
  const TimeGrid& grid() const noexcept { return grid_; }

 private:
  AssetBasket basket_;
  VolatilityModel model_;
  TimeGrid grid_;
  std::vector<double> drift_;
  std::vector<double> diffusion_;
};

/// Path of particle `particle` under `key`, steps 0..N. Bitwise identical to
/// the engine's trajectory for the same particle slot when no resampling
/// occurs.
std::vector<PathState> simulate_path(const AssetBasket& basket,
                                     const VolatilityModel& model,
                                     const TimeGrid& grid,
                                     kernels::PhiloxKey key,
                                     std::uint32_t particle);

struct GaussianMoments {
  double mean = 0.0;
  double sd = 0.0;
};

/// Per-asset Gaussian approximation of the marginal law of s_n.
class MarginalModel {
 public:
  virtual ~MarginalModel() = default;
  virtual GaussianMoments moments(std::size_t asset, int n) const = 0;
  /// Volatility to use for a bridge target at step n.
  virtual double bridge_vol(std::size_t asset, int n) const = 0;
  double log_density(int n, const double* s, std::size_t dim) const;
};

/// Exact marginal under constant volatility: N(s0 - sigma^2 t_n / 2, sigma^2 t_n).
class ConstantVolMarginal final : public MarginalModel {
 public:
  ConstantVolMarginal(std::vector<double> s0, std::vector<double> sigmas,
                      double dt);
  GaussianMoments moments(std::size_t asset, int n) const override;
  double bridge_vol(std::size_t asset, int n) const override;

 private:
  std::vector<double> s0_;
  std::vector<double> sigmas_;
  double dt_;
};

/// Iterated mean approximation under local volatility:
/// m_n = m_{n-1} - dt sigma^2(m_{n-1}) / 2 and variance sigma^2(m_{n-1}) n dt.
class LocalVolMarginal final : public MarginalModel {
 public:
  LocalVolMarginal(const VolatilityModel& model, std::vector<double> s0,
                   double dt, int steps);
  GaussianMoments moments(std::size_t asset, int n) const override;
  double bridge_vol(std::size_t asset, int n) const override;
  /// Approximate E s_n for asset j.
  double mean(std::size_t asset, int n) const;

 private:
  double dt_;
  int steps_;
  std::vector<std::vector<double>> mean_;   // [asset][n], n = 0..steps
  std::vector<std::vector<double>> vol_;    // sigma(exp(m_n))
};

/// Product of per-asset Gaussian marginal densities at step n (n >= 1).
double marginal_density_constant_vol(const AssetBasket& basket,
                                     const VolatilityModel& model,
                                     const TimeGrid& grid, int n,
                                     const std::vector<double>& s);

std::unique_ptr<MarginalModel> approx_marginal_local_vol(
    const VolatilityModel& model, const TimeGrid& grid,
    const std::vector<double>& s0);

/// Marginal model matching `model`: exact for constant vol, iterated
/// approximation for local vol.
std::unique_ptr<MarginalModel> make_marginal(const VolatilityModel& model,
                                             const AssetBasket& basket,
                                             const TimeGrid& grid);

double log_normal_pdf(double x, double mean, double sd) noexcept;

}  // namespace wfsmc
