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

#include "wfsmc/products.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wfsmc {

BarrierOption BarrierOption::from_prices(double lower, double upper,
                                         double strike, PayoffKind kind) {
  if (!(lower > 0.0) || !(upper > lower)) {
    throw std::invalid_argument("barriers need 0 < lower < upper");
  }
  BarrierOption b;
  b.lower_log = {std::log(lower)};
  b.upper_log = {std::log(upper)};
  b.strike = strike;
  b.kind = kind;
  return b;
}

double BarrierOption::lower(std::size_t asset) const {
  return lower_log.size() == 1 ? lower_log[0] : lower_log.at(asset);
}

double BarrierOption::upper(std::size_t asset) const {
  return upper_log.size() == 1 ? upper_log[0] : upper_log.at(asset);
}

void BarrierOption::validate(std::size_t dim) const {
  const auto ok_size = [dim](std::size_t n) { return n == 1 || n == dim; };
  if (!ok_size(lower_log.size()) || !ok_size(upper_log.size())) {
    throw std::invalid_argument("barrier list length must be 1 or the basket dimension");
  }
  for (std::size_t j = 0; j < dim; ++j) {
    if (!(lower(j) < upper(j))) throw std::invalid_argument("barrier needs lower < upper");
  }
}

int barrier_indicator(const BarrierOption& spec, const double* s, std::size_t dim) {
  for (std::size_t j = 0; j < dim; ++j) {
    if (!(spec.lower(j) < s[j] && s[j] < spec.upper(j))) return 0;
  }
  return 1;
}

double barrier_payoff(const BarrierOption& spec, const double* s_terminal,
                      std::size_t dim, int alive) {
  if (alive == 0) return 0.0;
  if (spec.kind == PayoffKind::unit) return 1.0;
  double basket = 0.0;
  for (std::size_t j = 0; j < dim; ++j) basket += std::exp(s_terminal[j]);
  basket /= static_cast<double>(dim);
  const double intrinsic =
      spec.kind == PayoffKind::call ? basket - spec.strike : spec.strike - basket;
  return std::max(intrinsic, 0.0);
}

void TarnSpec::validate() const {
  if (fixings < 1 || fixing_days < 1) throw std::invalid_argument("TARN needs fixings");
  if (!(gain_cap > 0.0) || !(loss_cap > 0.0)) {
    throw std::invalid_argument("TARN cutoffs must be positive");
  }
  if (!(s0_price > 0.0)) throw std::invalid_argument("TARN initial price must be positive");
  if (weighted_fixings < 1 || weighted_fixings > fixings) {
    throw std::invalid_argument("weighted fixings must lie within the schedule");
  }
}

double tarn_f(double r) noexcept {
  if (r > 110.0) return 2.0 * (r - 110.0) + 20.0;
  if (r < 90.0) return 2.0 * (80.0 - r) + 20.0;
  return -20.0;
}

CashflowState tarn_update(const CashflowState& state, const TarnSpec& spec,
                          double price) {
  if (state.tau != 0) throw std::logic_error("TARN cashflow after the stopping time");
  CashflowState next = state;
  next.fixing = state.fixing + 1;
  const double f = tarn_f(price);
  next.sum += f;
  next.gains += std::max(f, 0.0);
  next.losses += std::max(-f, 0.0);
  if (next.gains >= spec.gain_cap || next.losses >= spec.loss_cap ||
      next.fixing >= spec.fixings) {
    next.tau = next.fixing;
  }
  return next;
}

double tarn_payoff(const TarnSpec& spec, const std::vector<double>& fixing_logprices) {
  double gains = 0.0;
  double losses = 0.0;
  double total = 0.0;
  const int m = std::min<int>(spec.fixings, static_cast<int>(fixing_logprices.size()));
  for (int i = 0; i < m; ++i) {
    const double f = tarn_f(std::exp(fixing_logprices[static_cast<std::size_t>(i)]));
    total += f;
    if (f > 0.0) gains += f; else losses -= f;
    if (gains >= spec.gain_cap || losses >= spec.loss_cap) break;
  }
  return spec.payoff_shift + total;
}

}  // namespace wfsmc
