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

/// \file products.hpp
/// Knock-out barrier options on a basket and the target accrual redemption
/// note (TARN). Prices are given in price space and stored in log space.

#include <cstddef>
#include <vector>

namespace wfsmc {

enum class PayoffKind { call, put, unit };

/// Knock-out corridor monitored at the grid's monitoring steps. The same
/// corridor applies at every monitoring date; `lower`/`upper` hold either
/// one value for all assets or one per asset. The corridor is open.
struct BarrierOption {
  std::vector<double> lower_log;
  std::vector<double> upper_log;
  double strike = 100.0;
  PayoffKind kind = PayoffKind::call;

  static BarrierOption from_prices(double lower, double upper, double strike,
                                   PayoffKind kind);
  double lower(std::size_t asset) const;
  double upper(std::size_t asset) const;
  /// Throws std::invalid_argument unless lower < upper for every asset.
  void validate(std::size_t dim) const;
};

/// 1 if every coordinate is strictly inside its corridor, else 0.
int barrier_indicator(const BarrierOption& spec, const double* s, std::size_t dim);

/// alive * payoff on the arithmetic mean of terminal prices. `unit` pays 1.
double barrier_payoff(const BarrierOption& spec, const double* s_terminal,
                      std::size_t dim, int alive);

struct TarnSpec {
  double s0_price = 100.0;
  int fixings = 24;
  int fixing_days = 30;
  double gain_cap = 200.0;   // accumulated positive cashflow cutoff
  double loss_cap = 100.0;   // accumulated negative cashflow cutoff
  double payoff_shift = 100.0;
  /// Weighting functions run through this fixing inclusive.
  int weighted_fixings = 5;

  void validate() const;
};

/// The no-payout band [90, 110] of the TARN cashflow.
inline constexpr double kTarnBandLow = 90.0;
inline constexpr double kTarnBandHigh = 110.0;

/// Cashflow at a fixing with price r: large jumps across 90 and 110.
double tarn_f(double r) noexcept;

struct CashflowState {
  double gains = 0.0;
  double losses = 0.0;
  double sum = 0.0;   // running sum of cashflows up to the stop
  int fixing = 0;     // last fixing processed
  int tau = 0;        // stopping fixing, 0 while running
};

/// Processes fixing `state.fixing + 1` at `price`. Throws std::logic_error
/// if the note has already stopped.
CashflowState tarn_update(const CashflowState& state, const TarnSpec& spec,
                          double price);

/// payoff_shift + sum of cashflows up to the stopping fixing, computed from
/// scratch from the fixing log-prices.
double tarn_payoff(const TarnSpec& spec, const std::vector<double>& fixing_logprices);

}  // namespace wfsmc
