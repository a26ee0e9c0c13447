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

#include "wfsmc/experiments.hpp"

#include <omp.h>

#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "wfsmc/rng.hpp"

namespace wfsmc {

using nlohmann::json;

void ExperimentPlan::validate() const {
  if (replicates < 2) throw std::invalid_argument("a plan needs at least two replicates");
  if (particles < 2) throw std::invalid_argument("a plan needs at least two particles");
  if (methods.empty()) throw std::invalid_argument("a plan needs at least one method");
  if (axis != SweepAxis::none && values.empty()) throw std::invalid_argument("empty sweep");
  bool has_baseline = false;
  for (std::size_t i = 0; i < methods.size(); ++i) {
    if (methods[i].label.empty()) throw std::invalid_argument("method labels must be nonempty");
    for (std::size_t j = 0; j < i; ++j) {
      if (methods[j].label == methods[i].label) {
        throw std::invalid_argument("duplicate method label '" + methods[i].label + "'");
      }
    }
    has_baseline = has_baseline || methods[i].label == baseline;
  }
  if (!has_baseline) throw std::invalid_argument("baseline '" + baseline + "' is not a plan method");
  for (double v : values) {
    if (axis == SweepAxis::dimension && (v < 1.0 || v != std::floor(v))) {
      throw std::invalid_argument("dimension sweep values must be positive integers");
    }
    if (axis == SweepAxis::sigma && !(v >= 0.0 && std::isfinite(v))) {
      throw std::invalid_argument("volatility sweep values must be finite and nonnegative");
    }
  }
}

const MethodStats& ComparisonRow::at(const std::string& label) const {
  for (const auto& m : methods) {
    if (m.label == label) return m;
  }
  throw std::out_of_range("no method '" + label + "' in this row");
}

PricingRequest apply_sweep(const PricingRequest& base, SweepAxis axis, double value) {
  PricingRequest r = base;
  switch (axis) {
    case SweepAxis::none:
      break;
    case SweepAxis::dimension: {
      const auto d = static_cast<std::size_t>(value);
      if (r.model.kind() == VolatilityModel::Kind::constant && r.model.sigmas().size() != 1) {
        throw std::invalid_argument("dimension sweep needs a single volatility value");
      }
      r.basket = AssetBasket::independent(d, std::exp(base.basket.s0()[0]));
      break;
    }
    case SweepAxis::sigma:
      r.model = VolatilityModel::constant(value);
      break;
  }
  return r;
}

std::uint64_t replicate_seed(std::uint64_t master, const std::string& label,
                             std::size_t sweep_index, std::size_t replicate) {
  return derive_seed(master, {hash_label(label), sweep_index, replicate});
}

PilotSpec pilot_spec_for(const PricingRequest& r, const PilotSettings& settings) {
  PilotSpec p;
  p.model = settings.sigma ? VolatilityModel::constant(*settings.sigma) : r.model;
  p.grid = r.grid;
  p.paths = settings.paths;
  p.seed = settings.seed;
  p.min_qualifying = settings.min_qualifying;
  if (const auto* t = std::get_if<TarnSpec>(&r.product)) {
    p.mode = PilotTarget::Mode::escapers;
    p.tarn = *t;
    p.s0_price = t->s0_price;
    p.first_step = 1;
    p.last_step = tarn_last_weighted_step(*t, r.grid);
  } else {
    const BarrierOption& b = std::get<BarrierOption>(r.product);
    p.mode = PilotTarget::Mode::survivors;
    BarrierOption one = b;
    one.lower_log = {b.lower(0)};
    one.upper_log = {b.upper(0)};
    p.barrier = one;
    p.s0_price = std::exp(r.basket.s0()[0]);
    p.first_step = weighting_start(r.grid.steps);
    p.last_step = r.grid.steps - 1;
  }
  return p;
}

std::vector<ComparisonRow> run_plan(const ExperimentPlan& plan) {
  plan.validate();
  std::optional<PilotTarget> pilot;
  for (const auto& m : plan.methods) {
    if (m.weighting == WeightingKind::pilot || m.weighting == WeightingKind::tarn_mixture) {
      if (!plan.pilot && !plan.base.weighting.pilot) {
        throw std::invalid_argument("method '" + m.label + "' needs a pilot");
      }
      if (!pilot) {
        pilot = plan.base.weighting.pilot ? *plan.base.weighting.pilot
                                          : fit_pilot_target(pilot_spec_for(plan.base, *plan.pilot));
      }
    }
  }

  const std::vector<double> sweep =
      plan.axis == SweepAxis::none ? std::vector<double>{0.0} : plan.values;
  const std::size_t nm = plan.methods.size();
  const std::size_t reps = plan.replicates;
  std::vector<ComparisonRow> rows;

  for (std::size_t si = 0; si < sweep.size(); ++si) {
    const PricingRequest req = apply_sweep(plan.base, plan.axis, sweep[si]);
    std::vector<double> est(nm * reps, 0.0);
    std::vector<double> secs(nm * reps, 0.0);
    std::vector<char> dead(nm * reps, 0);
    std::vector<std::exception_ptr> errors(nm * reps);

#pragma omp parallel for schedule(dynamic)
    for (std::size_t task = 0; task < nm * reps; ++task) {
      try {
        const std::size_t mi = task / reps;
        const std::size_t r = task % reps;
        const MethodSpec& ms = plan.methods[mi];
        PricingRequest q = req;
        q.method = ms.method;
        q.weighting.kind = ms.weighting;
        q.weighting.pilot = pilot;
        q.smc.n_particles = plan.particles;
        const PricingResult res = price_any(q, replicate_seed(plan.master_seed, ms.label, si, r));
        est[task] = res.estimate;
        secs[task] = res.wall_time_s;
        dead[task] = res.extinct ? 1 : 0;
      } catch (...) {
        errors[task] = std::current_exception();
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }

    ComparisonRow row;
    row.sweep = sweep[si];
    for (std::size_t mi = 0; mi < nm; ++mi) {
      MethodStats s;
      s.label = plan.methods[mi].label;
      s.estimates.assign(est.begin() + static_cast<std::ptrdiff_t>(mi * reps),
                         est.begin() + static_cast<std::ptrdiff_t>((mi + 1) * reps));
      const auto R = static_cast<double>(reps);
      s.mean = stable_sum(s.estimates) / R;
      std::vector<double> sq(reps);
      for (std::size_t r = 0; r < reps; ++r) {
        sq[r] = (s.estimates[r] - s.mean) * (s.estimates[r] - s.mean);
      }
      s.sd = std::sqrt(stable_sum(sq) / (R - 1.0));
      if (plan.record_runtime) {
        s.runtime_s = stable_sum(std::span<const double>(secs.data() + mi * reps, reps));
      }
      for (std::size_t r = 0; r < reps; ++r) s.extinct += static_cast<std::size_t>(dead[mi * reps + r]);
      row.methods.push_back(std::move(s));
    }
    const double base_sd = row.at(plan.baseline).sd;
    for (auto& s : row.methods) {
      s.rel_sd = s.sd > 0.0 ? base_sd / s.sd : std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string plot_csv(const std::vector<ComparisonRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("nothing to write: the table is empty");
  std::string out = "sweep,method,mean,sd,rel_sd,runtime_s\n";
  for (const auto& row : rows) {
    for (const auto& m : row.methods) {
      out += format_double(row.sweep) + ',' + m.label + ',' + format_double(m.mean) + ',' +
             format_double(m.sd) + ',' + format_double(m.rel_sd) + ',' +
             format_double(m.runtime_s) + '\n';
    }
  }
  return out;
}

void emit_plot_data(const std::vector<ComparisonRow>& rows, const std::string& path) {
  const std::string text = plot_csv(rows);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

// ---- configuration ----

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw std::invalid_argument("override '" + assignment + "' is not key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json* node = &config;
  std::stringstream ks(key);
  std::string part;
  while (std::getline(ks, part, '.')) {
    if (part.empty()) throw std::invalid_argument("empty key segment in '" + key + "'");
    if (node->is_array()) {
      std::size_t idx = 0;
      const auto res = std::from_chars(part.data(), part.data() + part.size(), idx);
      if (res.ec != std::errc() || res.ptr != part.data() + part.size() || idx >= node->size()) {
        throw std::invalid_argument("bad array index '" + part + "' in '" + key + "'");
      }
      node = &(*node)[idx];
    } else {
      if (!node->is_object()) *node = json::object();
      node = &(*node)[part];
    }
  }
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  *node = std::move(value);
}

json load_config(const std::string& path, const std::vector<std::string>& overrides) {
  json config = json::object();
  if (!path.empty()) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read config '" + path + "'");
    config = json::parse(f);
  }
  for (const auto& o : overrides) apply_override(config, o);
  return config;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<double> log_list(const json& j) {
  std::vector<double> out;
  if (j.is_array()) {
    for (const auto& v : j) out.push_back(std::log(v.get<double>()));
  } else {
    out.push_back(std::log(j.get<double>()));
  }
  return out;
}

PayoffKind parse_payoff(const std::string& s) {
  if (s == "call") return PayoffKind::call;
  if (s == "put") return PayoffKind::put;
  if (s == "unit") return PayoffKind::unit;
  throw std::invalid_argument("unknown payoff '" + s + "'");
}

ResampleMode parse_mode(const std::string& s) {
  if (s == "adaptive") return ResampleMode::adaptive;
  if (s == "always") return ResampleMode::always;
  if (s == "never") return ResampleMode::never;
  if (s == "at_steps") return ResampleMode::at_steps;
  throw std::invalid_argument("unknown resampling mode '" + s + "'");
}

SweepAxis parse_axis(const std::string& s) {
  if (s == "none") return SweepAxis::none;
  if (s == "dimension") return SweepAxis::dimension;
  if (s == "sigma") return SweepAxis::sigma;
  throw std::invalid_argument("unknown sweep axis '" + s + "'");
}

}  // namespace

VolatilityModel model_from_config(const json& m) {
  const std::string type = m.value("type", "constant");
  if (type == "constant") {
    const json& s = m.at("sigma");
    if (s.is_array()) return VolatilityModel::constant(s.get<std::vector<double>>());
    return VolatilityModel::constant(s.get<double>());
  }
  if (type == "local") {
    if (m.contains("knots")) {
      std::vector<VolKnot> knots;
      for (const auto& k : m.at("knots")) knots.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
      return VolatilityModel::local(std::move(knots));
    }
    const std::string curve = m.value("curve", "barrier");
    if (curve == "barrier") return barrier_local_vol_curve();
    if (curve == "tarn") return tarn_local_vol_curve();
    throw std::invalid_argument("unknown local volatility curve '" + curve + "'");
  }
  throw std::invalid_argument("unknown model type '" + type + "'");
}

PricingRequest request_from_config(const json& c) {
  PricingRequest r;
  const json product = c.value("product", json::object());
  const json basket = c.value("basket", json::object());
  const json grid = c.value("grid", json::object());
  const json smc = c.value("smc", json::object());
  const json weighting = c.value("weighting", json::object());
  const std::string type = product.value("type", "barrier");

  r.model = model_from_config(c.value("model", json{{"type", "constant"}, {"sigma", 0.08}}));

  if (type == "barrier") {
    BarrierOption b;
    b.lower_log = log_list(product.value("lower", json(95.0)));
    b.upper_log = log_list(product.value("upper", json(105.0)));
    b.strike = product.value("strike", 100.0);
    b.kind = parse_payoff(product.value("payoff", "call"));
    r.product = b;
    r.grid = barrier_grid(grid.value("periods", 1), grid.value("period_steps", 540));
  } else if (type == "tarn") {
    TarnSpec t;
    t.s0_price = product.value("s0", t.s0_price);
    t.fixings = product.value("fixings", t.fixings);
    t.fixing_days = product.value("fixing_days", t.fixing_days);
    t.gain_cap = product.value("gain_cap", t.gain_cap);
    t.loss_cap = product.value("loss_cap", t.loss_cap);
    t.payoff_shift = product.value("payoff_shift", t.payoff_shift);
    t.weighted_fixings = product.value("weighted_fixings", t.weighted_fixings);
    r.product = t;
    r.grid = tarn_grid(t, r.model);
  } else {
    throw std::invalid_argument("unknown product type '" + type + "'");
  }

  const auto dim = basket.value("dim", std::size_t{1});
  const double s0 = std::holds_alternative<TarnSpec>(r.product)
                        ? std::get<TarnSpec>(r.product).s0_price
                        : basket.value("s0", 100.0);
  if (basket.contains("rho") && basket.at("rho").get<double>() != 0.0) {
    const double rho = basket.at("rho").get<double>();
    Eigen::MatrixXd corr = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(dim),
                                                     static_cast<Eigen::Index>(dim), rho);
    corr.diagonal().setOnes();
    r.basket = AssetBasket(std::vector<double>(dim, std::log(s0)), corr);
  } else {
    r.basket = AssetBasket::independent(dim, s0);
  }

  r.method = parse_method(c.value("method", "smc_weighted"));
  r.weighting.kind = parse_weighting(weighting.value("kind", "none"));
  r.weighting.bridge_inflation = weighting.value("bridge_inflation", 0.2);
  r.weighting.crude_vol = weighting.value("crude_vol", 0.04);
  r.weighting.floor = weighting.value("floor", kWeightFloor);
  if (weighting.contains("pilot_file")) {
    r.weighting.pilot = pilot_from_json(read_file(weighting.at("pilot_file").get<std::string>()));
  }

  r.smc.n_particles = smc.value("particles", std::size_t{10000});
  r.smc.ess_fraction = smc.value("ess_fraction", 0.5);
  r.smc.mode = parse_mode(smc.value("mode", "adaptive"));
  if (smc.contains("resample_steps")) r.smc.resample_steps = smc.at("resample_steps").get<std::vector<int>>();
  r.smc.seed = c.value("seed", std::uint64_t{12345});
  r.smc.record_diagnostics = smc.value("diagnostics", false);
  return r;
}

ExperimentPlan plan_from_config(const json& c) {
  ExperimentPlan p;
  p.base = request_from_config(c);
  const json plan = c.value("plan", json::object());
  p.axis = parse_axis(plan.value("axis", "none"));
  p.values = plan.value("values", std::vector<double>{});
  p.replicates = plan.value("replicates", std::size_t{50});
  p.particles = plan.value("particles", p.base.smc.n_particles);
  p.master_seed = c.value("seed", std::uint64_t{12345});
  p.record_runtime = plan.value("record_runtime", true);
  for (const auto& m : plan.value("methods", json::array())) {
    MethodSpec ms;
    ms.method = parse_method(m.value("method", "plain_mc"));
    ms.weighting = parse_weighting(m.value("weighting", "none"));
    ms.label = m.value("label", std::string(ms.weighting == WeightingKind::none
                                                ? method_name(ms.method)
                                                : weighting_name(ms.weighting)));
    p.methods.push_back(ms);
  }
  p.baseline = plan.value("baseline", p.methods.empty() ? std::string() : p.methods.front().label);
  if (plan.contains("pilot")) {
    const json& pj = plan.at("pilot");
    PilotSettings s;
    s.paths = pj.value("paths", s.paths);
    s.seed = pj.value("seed", s.seed);
    s.min_qualifying = pj.value("min_qualifying", s.min_qualifying);
    if (pj.contains("sigma")) s.sigma = pj.at("sigma").get<double>();
    p.pilot = s;
  }
  return p;
}

json run_manifest(const json& config, std::uint64_t seed) {
  char hex[17];
  const auto res = std::to_chars(hex, hex + 16, hash_label(config.dump()), 16);
  return json{{"config_hash", std::string(hex, res.ptr)},
              {"seed", seed},
              {"version", kVersion},
              {"simd", std::string(kernels::level_name(kernels::active_level()))},
              {"threads", omp_get_max_threads()}};
}

}  // namespace wfsmc
