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

/// \file weighting.hpp
/// Weighting functions h_n and the potentials G_n = h_n / h_{n-1} they
/// induce. Monitoring-date corridor indicators are folded into h at the
/// monitoring steps, and the product of potentials telescopes, so the
/// weighting changes the variance of the estimator but not its mean.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wfsmc/diffusion.hpp"
#include "wfsmc/kernels.hpp"
#include "wfsmc/products.hpp"

namespace wfsmc {

inline constexpr double kWeightFloor = 1e-12;

/// Log of a positive weighting function, evaluated over a block of
/// particles. States are asset-major: asset j of particle i is
/// states[j * stride + i].
class WeightingFunction {
 public:
  virtual ~WeightingFunction() = default;
  virtual std::string name() const = 0;
  virtual bool active(int step) const = 0;
  virtual void log_h(int step, const double* states, std::size_t stride,
                     std::size_t count, double* out) const = 0;
  virtual double log_h0(const std::vector<double>& s0) const;
};

/// h = 1 everywhere.
class UnitWeighting final : public WeightingFunction {
 public:
  std::string name() const override { return "unit"; }
  bool active(int) const override { return false; }
  void log_h(int, const double*, std::size_t, std::size_t count,
             double* out) const override;
};

/// Product over assets of target density / reference density, both
/// Gaussian, on the steps [first, last].
class GaussianTargetWeighting final : public WeightingFunction {
 public:
  struct StepTargets {
    std::vector<GaussianMoments> target;     // per asset
    std::vector<GaussianMoments> reference;  // per asset
  };
  GaussianTargetWeighting(std::string name, int first_step,
                          std::vector<StepTargets> steps);

  std::string name() const override { return name_; }
  bool active(int step) const override;
  void log_h(int step, const double* states, std::size_t stride,
             std::size_t count, double* out) const override;
  const StepTargets& at(int step) const;
  int first_step() const noexcept { return first_; }
  int last_step() const noexcept { return first_ + static_cast<int>(steps_.size()) - 1; }

 private:
  std::string name_;
  int first_;
  std::vector<StepTargets> steps_;
  std::vector<std::vector<kernels::GaussianRatio>> ratios_;
};

/// Bridge law at time t of a Brownian bridge from s0 (t = 0) to `target`
/// (t = t_end) with volatility sigma, its std widened by
/// inflation * sigma * sqrt(t_end).
GaussianMoments bridge_moments(double s0, double target, double sigma, double t,
                               double t_end, double inflation) noexcept;

/// First step of a bridge or pilot weighting for a horizon of k steps: ceil(2k/3).
int weighting_start(int k) noexcept;

/// Brownian bridge from s0 to the log-corridor midpoint at step k, with
/// standard deviation sigma sqrt(t_n (t_k - t_n) / t_k) + inflation sigma
/// sqrt(t_k), active on [start, k - 1]. sigma comes from
/// `marginal.bridge_vol` (constant vol, or sigma(E s_n) under local vol).
std::shared_ptr<const GaussianTargetWeighting> brownian_bridge_target(
    const AssetBasket& basket, const MarginalModel& marginal,
    const BarrierOption& barrier, const TimeGrid& grid, int k,
    double inflation = 0.2, std::optional<int> start = std::nullopt);

/// Per-step Gaussian moments fitted from a pilot run.
struct GaussianTrack {
  int first_step = 0;
  std::vector<double> mean;
  std::vector<double> sd;

  bool covers(int step) const noexcept;
  GaussianMoments at(int step) const;
  int last_step() const noexcept { return first_step + static_cast<int>(mean.size()) - 1; }
};

struct PilotTarget {
  enum class Mode { survivors, escapers };
  Mode mode = Mode::survivors;
  GaussianTrack survivors;
  GaussianTrack left;
  GaussianTrack right;
  double weight_left = 0.0;
  double weight_right = 0.0;
  std::size_t paths = 0;
  std::size_t qualifying = 0;
  std::size_t left_count = 0;
  std::size_t right_count = 0;
  std::uint64_t seed = 0;

  /// std > 0 everywhere, mixture weights in [0, 1] summing to 1.
  void validate() const;
};

std::string pilot_to_json(const PilotTarget& pilot);
PilotTarget pilot_from_json(const std::string& text);

/// Survivor-moment target: each asset targets the pilot's survivor law.
std::shared_ptr<const GaussianTargetWeighting> pilot_survivor_target(
    const PilotTarget& pilot, const AssetBasket& basket,
    const MarginalModel& marginal);

/// max((s - s0)^2, floor).
double tarn_weight_naive(int step, double s, double s0,
                         double floor = kWeightFloor) noexcept;

/// max((s - s0)^2, floor) / p_n(s), evaluated in log space.
double tarn_weight_density_corrected(int step, double s, double s0,
                                     const MarginalModel& marginal,
                                     double floor = kWeightFloor);

/// Single-asset TARN weightings active on steps 1..last_step.
class TarnWeighting final : public WeightingFunction {
 public:
  enum class Form { naive, density, mixture };
  TarnWeighting(Form form, double s0, int last_step,
                std::shared_ptr<const MarginalModel> marginal,
                std::optional<PilotTarget> pilot, double floor = kWeightFloor);

  std::string name() const override;
  bool active(int step) const override { return step >= 1 && step <= last_; }
  void log_h(int step, const double* states, std::size_t stride,
             std::size_t count, double* out) const override;

 private:
  Form form_;
  double s0_;
  int last_;
  std::shared_ptr<const MarginalModel> marginal_;
  std::optional<PilotTarget> pilot_;
  double floor_;
  double log_floor_;
};

/// [w_L phi_L + w_R phi_R] / p_n on the pilot's steps.
std::shared_ptr<const TarnWeighting> mixture_target(
    const PilotTarget& pilot, double s0, int last_step,
    std::shared_ptr<const MarginalModel> marginal);

/// The potentials induced by a weighting function on a monitoring schedule:
///   G_n = h_n(s_n) / h_{n-1}(s_{n-1}),  G_{T_i + 1} = h_{T_i + 1}(s_{T_i + 1}),
/// where with a corridor h_{T_i} is its indicator. Steps after `last_step`
/// carry G = 1 and the estimator divides the payoff by h_{last_step}.
class PotentialSequence {
 public:
  PotentialSequence(std::shared_ptr<const WeightingFunction> weighting,
                    TimeGrid grid, std::optional<BarrierOption> barrier,
                    int last_step, std::size_t dim = 1);

  void log_h(int step, const double* states, std::size_t stride,
             std::size_t count, double* out) const;
  /// Writes log G_step and replaces prev (log h_{step-1}) by log h_step.
  void log_potential(int step, const double* states, std::size_t stride,
                     std::size_t count, double* prev, double* out) const;
  double log_h0(const std::vector<double>& s0) const;
  int last_step() const noexcept { return last_; }
  const WeightingFunction& weighting() const noexcept { return *weighting_; }
  bool has_barrier() const noexcept { return barrier_.has_value(); }

  /// log h_0 + sum_n log G_n - log h_last along one path; -inf when a
  /// corridor indicator vanished.
  double log_path_product(const std::vector<PathState>& path) const;

 private:
  std::shared_ptr<const WeightingFunction> weighting_;
  TimeGrid grid_;
  std::optional<BarrierOption> barrier_;
  int last_;
  std::size_t dim_;
};

PotentialSequence build_potentials(std::shared_ptr<const WeightingFunction> weighting,
                                   const TimeGrid& grid,
                                   std::optional<BarrierOption> barrier,
                                   std::size_t dim = 1,
                                   std::optional<int> last_step = std::nullopt);

/// Inputs of a one-dimensional pilot run.
struct PilotSpec {
  PilotTarget::Mode mode = PilotTarget::Mode::survivors;
  VolatilityModel model = VolatilityModel::constant(0.08);
  double s0_price = 100.0;
  TimeGrid grid;
  std::optional<BarrierOption> barrier;  // survivors
  std::optional<TarnSpec> tarn;          // escapers
  int first_step = 1;
  int last_step = 1;
  std::size_t paths = 10000;
  std::uint64_t seed = 0;
  /// Minimum qualifying paths (per mixture component for escapers).
  std::size_t min_qualifying = 30;
};

/// Simulates `paths` one-dimensional paths, keeps survivors (all corridor
/// indicators 1) or escapers (first fixing among the weighted ones outside
/// [90, 110], split by side), and fits per-step means and sample stds.
/// Throws std::runtime_error if too few paths qualify.
PilotTarget fit_pilot_target(const PilotSpec& spec);

struct SurvivalCensus {
  std::size_t paths = 0;
  std::size_t survivors = 0;
  double fraction() const noexcept;
};

struct EscapeCensus {
  std::size_t paths = 0;
  std::size_t left = 0;
  std::size_t right = 0;
  double left_share() const noexcept;
  double escape_fraction() const noexcept;
};

/// Counting versions of the pilot run, with no qualification threshold.
SurvivalCensus survival_census(const PilotSpec& spec);
EscapeCensus escape_census(const PilotSpec& spec);

}  // namespace wfsmc
