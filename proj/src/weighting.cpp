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

#include "wfsmc/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "wfsmc/rng.hpp"

namespace wfsmc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_moments(const GaussianMoments& g, const char* what) {
  if (!std::isfinite(g.mean) || !(g.sd > 0.0) || !std::isfinite(g.sd)) {
    throw std::invalid_argument(std::string(what) + " needs a finite mean and positive std");
  }
}

}  // namespace

double WeightingFunction::log_h0(const std::vector<double>&) const { return 0.0; }

void UnitWeighting::log_h(int, const double*, std::size_t, std::size_t count,
                          double* out) const {
  std::fill(out, out + count, 0.0);
}

GaussianTargetWeighting::GaussianTargetWeighting(std::string name, int first_step,
                                                 std::vector<StepTargets> steps)
    : name_(std::move(name)), first_(first_step), steps_(std::move(steps)) {
  if (first_ < 1) throw std::invalid_argument("weighting cannot start before step 1");
  for (const StepTargets& st : steps_) {
    if (st.target.size() != st.reference.size() || st.target.empty()) {
      throw std::invalid_argument("target and reference must cover every asset");
    }
    std::vector<kernels::GaussianRatio> row;
    for (std::size_t j = 0; j < st.target.size(); ++j) {
      check_moments(st.target[j], "target density");
      check_moments(st.reference[j], "reference density");
      row.push_back(kernels::GaussianRatio::from_moments(
          st.target[j].mean, st.target[j].sd, st.reference[j].mean, st.reference[j].sd));
    }
    ratios_.push_back(std::move(row));
  }
}

bool GaussianTargetWeighting::active(int step) const {
  return step >= first_ && step <= last_step();
}

const GaussianTargetWeighting::StepTargets& GaussianTargetWeighting::at(int step) const {
  if (!active(step)) throw std::out_of_range("weighting step outside its active range");
  return steps_[static_cast<std::size_t>(step - first_)];
}

void GaussianTargetWeighting::log_h(int step, const double* states,
                                    std::size_t stride, std::size_t count,
                                    double* out) const {
  std::fill(out, out + count, 0.0);
  if (!active(step)) return;
  const auto& row = ratios_[static_cast<std::size_t>(step - first_)];
  const kernels::KernelTable& k = kernels::active();
  for (std::size_t j = 0; j < row.size(); ++j) {
    k.gaussian_log_ratio(states + j * stride, out, count, row[j]);
  }
}

GaussianMoments bridge_moments(double s0, double target, double sigma, double t,
                               double t_end, double inflation) noexcept {
  const double f = t / t_end;
  // Convex combination so that the endpoints are reproduced exactly.
  const double mean = (1.0 - f) * s0 + f * target;
  const double sd = sigma * std::sqrt(t * (t_end - t) / t_end) +
                    inflation * sigma * std::sqrt(t_end);
  return {mean, sd};
}

int weighting_start(int k) noexcept { return (2 * k + 2) / 3; }

std::shared_ptr<const GaussianTargetWeighting> brownian_bridge_target(
    const AssetBasket& basket, const MarginalModel& marginal,
    const BarrierOption& barrier, const TimeGrid& grid, int k, double inflation,
    std::optional<int> start) {
  if (k < 2 || k > grid.steps) throw std::invalid_argument("bridge horizon outside the grid");
  if (!(inflation >= 0.0)) throw std::invalid_argument("bridge inflation must be nonnegative");
  barrier.validate(basket.dim());
  const int first = start.value_or(weighting_start(k));
  if (first < 1 || first > k - 1) throw std::invalid_argument("bridge start outside [1, k-1]");
  const double t_end = grid.time(k);
  std::vector<GaussianTargetWeighting::StepTargets> steps;
  for (int n = first; n <= k - 1; ++n) {
    GaussianTargetWeighting::StepTargets st;
    for (std::size_t j = 0; j < basket.dim(); ++j) {
      const double mid = 0.5 * (barrier.lower(j) + barrier.upper(j));
      if (!(barrier.lower(j) < mid && mid < barrier.upper(j))) {
        throw std::invalid_argument("bridge endpoint outside the corridor");
      }
      st.target.push_back(bridge_moments(basket.s0()[j], mid, marginal.bridge_vol(j, n),
                                         grid.time(n), t_end, inflation));
      st.reference.push_back(marginal.moments(j, n));
    }
    steps.push_back(std::move(st));
  }
  return std::make_shared<GaussianTargetWeighting>("bridge", first, std::move(steps));
}

bool GaussianTrack::covers(int step) const noexcept {
  return !mean.empty() && step >= first_step && step <= last_step();
}

GaussianMoments GaussianTrack::at(int step) const {
  if (!covers(step)) throw std::out_of_range("pilot track does not cover this step");
  const auto u = static_cast<std::size_t>(step - first_step);
  return {mean[u], sd[u]};
}

void PilotTarget::validate() const {
  const auto check_track = [](const GaussianTrack& t, const char* what) {
    if (t.mean.empty() || t.mean.size() != t.sd.size()) {
      throw std::invalid_argument(std::string(what) + " track is empty or ragged");
    }
    for (std::size_t i = 0; i < t.sd.size(); ++i) {
      if (!(t.sd[i] > 0.0) || !std::isfinite(t.mean[i])) {
        throw std::invalid_argument(std::string(what) + " track has a degenerate step");
      }
    }
  };
  if (mode == Mode::survivors) {
    check_track(survivors, "survivor");
    return;
  }
  check_track(left, "left escaper");
  check_track(right, "right escaper");
  // A zero weight drops that component and leaves a single Gaussian.
  if (!(weight_left >= 0.0 && weight_left <= 1.0) || !(weight_right >= 0.0) ||
      std::abs(weight_left + weight_right - 1.0) > 1e-12) {
    throw std::invalid_argument("mixture weights must lie in [0, 1] and sum to 1");
  }
}

namespace {

nlohmann::json track_json(const GaussianTrack& t) {
  return {{"first_step", t.first_step}, {"mean", t.mean}, {"sd", t.sd}};
}

GaussianTrack track_from(const nlohmann::json& j) {
  GaussianTrack t;
  t.first_step = j.at("first_step").get<int>();
  t.mean = j.at("mean").get<std::vector<double>>();
  t.sd = j.at("sd").get<std::vector<double>>();
  return t;
}

}  // namespace

std::string pilot_to_json(const PilotTarget& pilot) {
  nlohmann::json j;
  j["mode"] = pilot.mode == PilotTarget::Mode::survivors ? "survivors" : "escapers";
  j["paths"] = pilot.paths;
  j["qualifying"] = pilot.qualifying;
  j["seed"] = pilot.seed;
  if (pilot.mode == PilotTarget::Mode::survivors) {
    j["survivors"] = track_json(pilot.survivors);
  } else {
    j["left"] = track_json(pilot.left);
    j["right"] = track_json(pilot.right);
    j["weight_left"] = pilot.weight_left;
    j["weight_right"] = pilot.weight_right;
    j["left_count"] = pilot.left_count;
    j["right_count"] = pilot.right_count;
  }
  return j.dump(2);
}

PilotTarget pilot_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  PilotTarget p;
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "survivors") {
    p.mode = PilotTarget::Mode::survivors;
    p.survivors = track_from(j.at("survivors"));
  } else if (mode == "escapers") {
    p.mode = PilotTarget::Mode::escapers;
    p.left = track_from(j.at("left"));
    p.right = track_from(j.at("right"));
    p.weight_left = j.at("weight_left").get<double>();
    p.weight_right = j.at("weight_right").get<double>();
    p.left_count = j.value("left_count", std::size_t{0});
    p.right_count = j.value("right_count", std::size_t{0});
  } else {
    throw std::invalid_argument("unknown pilot mode '" + mode + "'");
  }
  p.paths = j.value("paths", std::size_t{0});
  p.qualifying = j.value("qualifying", std::size_t{0});
  p.seed = j.value("seed", std::uint64_t{0});
  p.validate();
  return p;
}

std::shared_ptr<const GaussianTargetWeighting> pilot_survivor_target(
    const PilotTarget& pilot, const AssetBasket& basket,
    const MarginalModel& marginal) {
  if (pilot.mode != PilotTarget::Mode::survivors) {
    throw std::invalid_argument("survivor target needs a survivor pilot");
  }
  pilot.validate();
  const GaussianTrack& t = pilot.survivors;
  std::vector<GaussianTargetWeighting::StepTargets> steps;
  for (int n = t.first_step; n <= t.last_step(); ++n) {
    GaussianTargetWeighting::StepTargets st;
    const GaussianMoments target = t.at(n);
    for (std::size_t j = 0; j < basket.dim(); ++j) {
      // The pilot is fitted on x = s - s0 of a single asset.
      st.target.push_back({basket.s0()[j] + target.mean, target.sd});
      st.reference.push_back(marginal.moments(j, n));
    }
    steps.push_back(std::move(st));
  }
  return std::make_shared<GaussianTargetWeighting>("pilot", t.first_step, std::move(steps));
}

double tarn_weight_naive(int, double s, double s0, double floor) noexcept {
  const double x = s - s0;
  return std::max(x * x, floor);
}

double tarn_weight_density_corrected(int step, double s, double s0,
                                     const MarginalModel& marginal, double floor) {
  const GaussianMoments ref = marginal.moments(0, step);
  const double x = s - s0;
  return std::exp(std::log(std::max(x * x, floor)) - log_normal_pdf(s, ref.mean, ref.sd));
}

TarnWeighting::TarnWeighting(Form form, double s0, int last_step,
                             std::shared_ptr<const MarginalModel> marginal,
                             std::optional<PilotTarget> pilot, double floor)
    : form_(form),
      s0_(s0),
      last_(last_step),
      marginal_(std::move(marginal)),
      pilot_(std::move(pilot)),
      floor_(floor),
      log_floor_(std::log(floor)) {
  if (last_ < 1) throw std::invalid_argument("TARN weighting needs at least one step");
  if (!(floor_ > 0.0)) throw std::invalid_argument("weight floor must be positive");
  if (form_ != Form::naive && marginal_ == nullptr) {
    throw std::invalid_argument("density-corrected weights need a marginal");
  }
  if (form_ != Form::naive) {
    for (int n = 1; n <= last_; ++n) check_moments(marginal_->moments(0, n), "marginal");
  }
  if (form_ == Form::mixture) {
    if (!pilot_ || pilot_->mode != PilotTarget::Mode::escapers) {
      throw std::invalid_argument("mixture target needs an escaper pilot");
    }
    pilot_->validate();
    for (int n = 1; n <= last_; ++n) {
      if (!pilot_->left.covers(n) || !pilot_->right.covers(n)) {
        throw std::invalid_argument("pilot does not cover every weighted step");
      }
    }
  }
}

std::string TarnWeighting::name() const {
  switch (form_) {
    case Form::naive: return "tarn_naive";
    case Form::density: return "tarn_density";
    case Form::mixture: return "tarn_mixture";
  }
  return "tarn";
}

void TarnWeighting::log_h(int step, const double* states, std::size_t,
                          std::size_t count, double* out) const {
  if (!active(step)) {
    std::fill(out, out + count, 0.0);
    return;
  }
  if (form_ == Form::naive) {
    for (std::size_t i = 0; i < count; ++i) {
      const double x = states[i] - s0_;
      out[i] = std::max(std::log(x * x), log_floor_);
    }
    return;
  }
  const GaussianMoments ref = marginal_->moments(0, step);
  if (form_ == Form::density) {
    for (std::size_t i = 0; i < count; ++i) {
      const double x = states[i] - s0_;
      out[i] = std::max(std::log(x * x), log_floor_) - log_normal_pdf(states[i], ref.mean, ref.sd);
    }
    return;
  }
  const GaussianMoments l = pilot_->left.at(step);
  const GaussianMoments r = pilot_->right.at(step);
  const double log_wl = std::log(pilot_->weight_left);
  const double log_wr = std::log(pilot_->weight_right);
  for (std::size_t i = 0; i < count; ++i) {
    const double a = log_wl + log_normal_pdf(states[i] - s0_, l.mean, l.sd);
    const double b = log_wr + log_normal_pdf(states[i] - s0_, r.mean, r.sd);
    const double hi = std::max(a, b);
    const double lse = hi + std::log1p(std::exp(std::min(a, b) - hi));
    out[i] = lse - log_normal_pdf(states[i], ref.mean, ref.sd);
  }
}

std::shared_ptr<const TarnWeighting> mixture_target(
    const PilotTarget& pilot, double s0, int last_step,
    std::shared_ptr<const MarginalModel> marginal) {
  return std::make_shared<TarnWeighting>(TarnWeighting::Form::mixture, s0, last_step,
                                         std::move(marginal), pilot);
}

PotentialSequence::PotentialSequence(std::shared_ptr<const WeightingFunction> weighting,
                                     TimeGrid grid, std::optional<BarrierOption> barrier,
                                     int last_step, std::size_t dim)
    : weighting_(std::move(weighting)),
      grid_(std::move(grid)),
      barrier_(std::move(barrier)),
      last_(last_step),
      dim_(dim) {
  if (dim_ == 0) throw std::invalid_argument("potential sequence needs at least one asset");
  if (barrier_) barrier_->validate(dim_);
  if (weighting_ == nullptr) throw std::invalid_argument("potential sequence needs a weighting");
  if (last_ < 1 || last_ > grid_.steps) throw std::invalid_argument("last weighted step outside the grid");
  if (barrier_ && last_ != grid_.steps) {
    throw std::invalid_argument("corridor potentials must run to the horizon");
  }
}

void PotentialSequence::log_h(int step, const double* states, std::size_t stride,
                              std::size_t count, double* out) const {
  if (barrier_ && grid_.is_monitoring(step)) {
    std::fill(out, out + count, 0.0);
    const kernels::KernelTable& k = kernels::active();
    for (std::size_t j = 0; j < dim_; ++j) {
      k.band_log_indicator(states + j * stride, out, count, barrier_->lower(j),
                           barrier_->upper(j));
    }
    return;
  }
  if (weighting_->active(step)) {
    weighting_->log_h(step, states, stride, count, out);
  } else {
    std::fill(out, out + count, 0.0);
  }
}

void PotentialSequence::log_potential(int step, const double* states,
                                      std::size_t stride, std::size_t count,
                                      double* prev, double* out) const {
  if (step > last_) {
    std::fill(out, out + count, 0.0);
    return;
  }
  log_h(step, states, stride, count, out);
  const bool reset = barrier_ && step > 1 && grid_.is_monitoring(step - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const double cur = out[i];
    out[i] = reset ? cur : cur - prev[i];
    prev[i] = cur;
  }
}

double PotentialSequence::log_h0(const std::vector<double>& s0) const {
  return weighting_->log_h0(s0);
}

double PotentialSequence::log_path_product(const std::vector<PathState>& path) const {
  if (path.empty()) throw std::invalid_argument("empty path");
  double prev = log_h0(path.front().logprices);
  double total = prev;
  for (int n = 1; n <= grid_.steps && n < static_cast<int>(path.size()); ++n) {
    double g = 0.0;
    log_potential(n, path[static_cast<std::size_t>(n)].logprices.data(), 1, 1, &prev, &g);
    total += g;
    if (total == kNegInf) return kNegInf;
  }
  return total - prev;
}

PotentialSequence build_potentials(std::shared_ptr<const WeightingFunction> weighting,
                                   const TimeGrid& grid,
                                   std::optional<BarrierOption> barrier,
                                   std::size_t dim, std::optional<int> last_step) {
  const int last = last_step.value_or(grid.steps);
  return PotentialSequence(std::move(weighting), grid, std::move(barrier), last, dim);
}

}  // namespace wfsmc

namespace wfsmc {
namespace {

constexpr std::size_t kPilotChunk = 2048;

enum PilotClass : int { kNone = -1, kSurvivor = 0, kLeft = 1, kRight = 2 };

// Per-class, per-step sums of x = s - s0 over the qualifying paths of one chunk.
struct PilotAccumulator {
  std::size_t steps = 0;
  std::size_t count[3] = {0, 0, 0};
  std::vector<double> sum[3];
  std::vector<double> sumsq[3];

  explicit PilotAccumulator(std::size_t n = 0) : steps(n) {
    for (int c = 0; c < 3; ++c) {
      sum[c].assign(n, 0.0);
      sumsq[c].assign(n, 0.0);
    }
  }
  void merge(const PilotAccumulator& o) {
    for (int c = 0; c < 3; ++c) {
      count[c] += o.count[c];
      for (std::size_t u = 0; u < steps; ++u) {
        sum[c][u] += o.sum[c][u];
        sumsq[c][u] += o.sumsq[c][u];
      }
    }
  }
};

struct PilotPlan {
  int horizon = 0;      // last simulated step
  int first = 1;        // first recorded step
  int last = 0;         // last recorded step (0 when nothing is recorded)
  std::vector<int> fixing_steps;
};

PilotPlan plan_pilot(const PilotSpec& spec, bool record) {
  spec.grid.validate(false);
  if (!(spec.s0_price > 0.0)) throw std::invalid_argument("pilot needs a positive initial price");
  if (spec.paths == 0 || spec.paths > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("pilot path count out of range");
  }
  PilotPlan plan;
  if (spec.mode == PilotTarget::Mode::survivors) {
    if (!spec.barrier) throw std::invalid_argument("survivor pilot needs a corridor");
    spec.barrier->validate(1);
    if (spec.grid.monitoring.empty()) throw std::invalid_argument("survivor pilot needs monitoring dates");
    plan.horizon = spec.grid.steps;
  } else {
    if (!spec.tarn) throw std::invalid_argument("escaper pilot needs a TARN");
    spec.tarn->validate();
    const int wf = spec.tarn->weighted_fixings;
    if (static_cast<int>(spec.grid.monitoring.size()) < wf) {
      throw std::invalid_argument("grid has fewer fixings than the weighted ones");
    }
    plan.fixing_steps.assign(spec.grid.monitoring.begin(), spec.grid.monitoring.begin() + wf);
    plan.horizon = plan.fixing_steps.back();
  }
  if (record) {
    if (spec.first_step < 1 || spec.last_step < spec.first_step || spec.last_step > plan.horizon) {
      throw std::invalid_argument("pilot recording window outside the simulated steps");
    }
    plan.first = spec.first_step;
    plan.last = spec.last_step;
  }
  return plan;
}

PilotAccumulator run_pilot(const PilotSpec& spec, const PilotPlan& plan) {
  const AssetBasket basket = AssetBasket::independent(1, spec.s0_price);
  const BasketPropagator prop(basket, spec.model, spec.grid);
  const kernels::PhiloxKey key = key_from_seed(spec.seed);
  const double s0 = basket.s0()[0];
  const std::size_t width = plan.last >= plan.first && plan.last > 0
                                ? static_cast<std::size_t>(plan.last - plan.first + 1) : 0;
  const std::size_t chunks = (spec.paths + kPilotChunk - 1) / kPilotChunk;
  std::vector<PilotAccumulator> parts(chunks, PilotAccumulator(width));
  std::vector<std::exception_ptr> errors(chunks);
  const double log_low = std::log(kTarnBandLow);
  const double log_high = std::log(kTarnBandHigh);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < chunks; ++c) {
    try {
      const std::size_t lo = c * kPilotChunk;
      const std::size_t len = std::min(kPilotChunk, spec.paths - lo);
      std::vector<double> s(len, s0);
      std::vector<double> rec(width * len, 0.0);
      std::vector<int> cls(len, spec.mode == PilotTarget::Mode::survivors ? kSurvivor : kNone);
      std::size_t fix = 0;
      for (int n = 1; n <= plan.horizon; ++n) {
        prop.advance(s.data(), len, len, static_cast<std::uint32_t>(lo), n, key);
        if (n >= plan.first && n <= plan.last) {
          double* row = rec.data() + static_cast<std::size_t>(n - plan.first) * len;
          for (std::size_t i = 0; i < len; ++i) row[i] = s[i] - s0;
        }
        if (spec.mode == PilotTarget::Mode::survivors) {
          if (spec.grid.is_monitoring(n)) {
            const double l = spec.barrier->lower(0);
            const double u = spec.barrier->upper(0);
            for (std::size_t i = 0; i < len; ++i) {
              if (!(s[i] > l && s[i] < u)) cls[i] = kNone;
            }
          }
        } else if (fix < plan.fixing_steps.size() && plan.fixing_steps[fix] == n) {
          for (std::size_t i = 0; i < len; ++i) {
            if (cls[i] != kNone) continue;
            if (s[i] < log_low) cls[i] = kLeft;
            else if (s[i] > log_high) cls[i] = kRight;
          }
          ++fix;
        }
      }
      PilotAccumulator& acc = parts[c];
      for (std::size_t i = 0; i < len; ++i) {
        if (cls[i] == kNone) continue;
        ++acc.count[cls[i]];
        for (std::size_t u = 0; u < width; ++u) {
          const double x = rec[u * len + i];
          acc.sum[cls[i]][u] += x;
          acc.sumsq[cls[i]][u] += x * x;
        }
      }
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  PilotAccumulator total(width);
  for (const auto& p : parts) total.merge(p);
  return total;
}

GaussianTrack fit_track(const PilotAccumulator& acc, int cls, int first) {
  GaussianTrack t;
  t.first_step = first;
  const auto n = static_cast<double>(acc.count[cls]);
  for (std::size_t u = 0; u < acc.steps; ++u) {
    const double mean = acc.sum[cls][u] / n;
    const double var = std::max(0.0, (acc.sumsq[cls][u] - n * mean * mean) / (n - 1.0));
    t.mean.push_back(mean);
    t.sd.push_back(std::sqrt(var));
  }
  return t;
}

}  // namespace

PilotTarget fit_pilot_target(const PilotSpec& spec) {
  if (spec.min_qualifying < 2) throw std::invalid_argument("pilot needs at least two qualifying paths");
  const PilotPlan plan = plan_pilot(spec, true);
  const PilotAccumulator acc = run_pilot(spec, plan);
  PilotTarget out;
  out.mode = spec.mode;
  out.paths = spec.paths;
  out.seed = spec.seed;
  if (spec.mode == PilotTarget::Mode::survivors) {
    out.qualifying = acc.count[kSurvivor];
    if (out.qualifying < spec.min_qualifying) {
      throw std::runtime_error("pilot found " + std::to_string(out.qualifying) +
                               " surviving paths, need " + std::to_string(spec.min_qualifying));
    }
    out.survivors = fit_track(acc, kSurvivor, plan.first);
  } else {
    out.left_count = acc.count[kLeft];
    out.right_count = acc.count[kRight];
    out.qualifying = out.left_count + out.right_count;
    if (out.left_count < spec.min_qualifying || out.right_count < spec.min_qualifying) {
      throw std::runtime_error("pilot found " + std::to_string(out.left_count) + " left and " +
                               std::to_string(out.right_count) + " right escapers, need " +
                               std::to_string(spec.min_qualifying) + " of each");
    }
    out.left = fit_track(acc, kLeft, plan.first);
    out.right = fit_track(acc, kRight, plan.first);
    const auto q = static_cast<double>(out.qualifying);
    out.weight_left = static_cast<double>(out.left_count) / q;
    out.weight_right = static_cast<double>(out.right_count) / q;
  }
  out.validate();
  return out;
}

double SurvivalCensus::fraction() const noexcept {
  return paths == 0 ? 0.0 : static_cast<double>(survivors) / static_cast<double>(paths);
}

double EscapeCensus::left_share() const noexcept {
  const std::size_t e = left + right;
  return e == 0 ? 0.0 : static_cast<double>(left) / static_cast<double>(e);
}

double EscapeCensus::escape_fraction() const noexcept {
  return paths == 0 ? 0.0 : static_cast<double>(left + right) / static_cast<double>(paths);
}

SurvivalCensus survival_census(const PilotSpec& spec) {
  if (spec.mode != PilotTarget::Mode::survivors) throw std::invalid_argument("survival census needs survivor mode");
  const PilotAccumulator acc = run_pilot(spec, plan_pilot(spec, false));
  return {spec.paths, acc.count[kSurvivor]};
}

EscapeCensus escape_census(const PilotSpec& spec) {
  if (spec.mode != PilotTarget::Mode::escapers) throw std::invalid_argument("escape census needs escaper mode");
  const PilotAccumulator acc = run_pilot(spec, plan_pilot(spec, false));
  return {spec.paths, acc.count[kLeft], acc.count[kRight]};
}

}  // namespace wfsmc
