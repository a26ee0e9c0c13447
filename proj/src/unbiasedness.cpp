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

#include "wfsmc/unbiasedness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "wfsmc/rng.hpp"

namespace wfsmc {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

class TraceObserver final : public StepObserver {
 public:
  TraceObserver(const ParticleModel& model, std::size_t n)
      : model_(model), n_(n), log_n_(std::log(static_cast<double>(n))),
        logv_(n, 0.0), log_anc_(n, 0.0), log_anc_last_(n, 0.0) {}

  void on_potential(int, std::span<const double> log_g) override {
    for (std::size_t i = 0; i < n_; ++i) {
      logv_[i] += log_g[i];
      log_anc_[i] += log_g[i];
    }
  }

  void on_resample(int step, const ParticleSystem& before,
                   std::span<const std::uint32_t> ancestors) override {
    std::vector<double> v;
    const double log_vbar = normalize(v);
    trace.max_weight_sum_error = std::max(trace.max_weight_sum_error, std::abs(stable_sum(v) - 1.0));

    const std::vector<double> w = before.normalized_weights();
    for (std::size_t i = 0; i < n_; ++i) {
      trace.max_weight_mismatch = std::max(trace.max_weight_mismatch, std::abs(v[i] - w[i]));
    }
    // Htilde V on the left, H of the previous segment over N on the right.
    for (std::size_t i = 0; i < n_; ++i) {
      if (logv_[i] == kNegInf) continue;
      const double lhs = (log_p_ + log_vbar) - log_anc_[i] + std::log(v[i]);
      const double rhs = log_p_ - log_anc_last_[i] - log_n_;
      trace.max_identity_error = std::max(trace.max_identity_error, std::abs(lhs - rhs));
      ++trace.identity_checks;
    }

    trace.times.push_back(step);
    trace.log_segment_means.push_back(log_vbar);
    if (step == model_.horizon()) {
      psi_hat = weighted_payoff(before, v);
      log_z = log_p_ + log_vbar;
      finished = true;
      trace.log_segment_means.push_back(0.0);  // empty trailing segment
    }
    log_p_ += log_vbar;

    std::vector<double> gathered(n_);
    for (std::size_t i = 0; i < n_; ++i) gathered[i] = log_anc_[ancestors[i]];
    log_anc_ = gathered;
    log_anc_last_ = gathered;
    std::fill(logv_.begin(), logv_.end(), 0.0);
  }

  void finish(const ParticleSystem& final_state, bool extinct) {
    if (finished) return;
    if (extinct) {
      trace.log_segment_means.push_back(kNegInf);
      log_z = kNegInf;
      psi_hat = 0.0;
      return;
    }
    std::vector<double> v;
    const double log_vbar = normalize(v);
    trace.log_segment_means.push_back(log_vbar);
    psi_hat = weighted_payoff(final_state, v);
    log_z = log_p_ + log_vbar;
  }

  ResamplingTrace trace;
  double psi_hat = 0.0;
  double log_z = 0.0;
  bool finished = false;

 private:
  // V = v / (N vbar); returns log vbar.
  double normalize(std::vector<double>& v) const {
    const double m = *std::max_element(logv_.begin(), logv_.end());
    v.assign(n_, 0.0);
    if (m == kNegInf) return kNegInf;
    for (std::size_t i = 0; i < n_; ++i) v[i] = std::exp(logv_[i] - m);
    const double total = stable_sum(v);
    for (double& x : v) x /= total;
    return m + std::log(total) - log_n_;
  }

  double weighted_payoff(const ParticleSystem& system, const std::vector<double>& v) const {
    std::vector<double> psi(n_);
    model_.payoff(system, psi.data());
    std::vector<double> terms(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      if (v[i] > 0.0) terms[i] = v[i] * psi[i];
    }
    return stable_sum(terms);
  }

  const ParticleModel& model_;
  std::size_t n_;
  double log_n_;
  std::vector<double> logv_;          // log v since the last resampling
  std::vector<double> log_anc_;       // cumulative along the ancestral line
  std::vector<double> log_anc_last_;  // the same at the last resampling
  double log_p_ = 0.0;                // sum of log vbar over closed segments
};

}  // namespace

double TracedRun::value() const {
  if (extinct) return 0.0;
  return std::exp(log_prefactor + log_z) * psi_hat;
}

TracedRun traced_run(const ParticleModel& model, const SmcConfig& config) {
  config.validate();
  TraceObserver obs(model, config.n_particles);
  ParticleSystem final_state(1, 1, 0);
  const SmcOutput out = run_smc(model, config, &obs, &final_state);
  obs.finish(final_state, out.extinct);
  TracedRun run;
  run.trace = std::move(obs.trace);
  run.psi_hat = obs.psi_hat;
  run.log_z = obs.log_z;
  run.log_c_hat = out.log_c_hat;
  run.log_prefactor = model.log_prefactor();
  run.extinct = out.extinct;
  const bool both_dead = run.log_z == kNegInf && run.log_c_hat == kNegInf;
  if (!both_dead && !(std::abs(run.log_z - run.log_c_hat) <= 1e-10)) {
    throw std::runtime_error("trace estimate log Z = " + std::to_string(run.log_z) +
                             " disagrees with the engine's log C = " +
                             std::to_string(run.log_c_hat));
  }
  return run;
}

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

UnbiasednessReport unbiasedness_test(const PricingRequest& request, double oracle,
                                     const UnbiasednessOptions& options,
                                     double oracle_se) {
  if (options.replicates < 2) throw std::invalid_argument("need at least two replicates");
  if (request.method != Method::smc_weighted || request.smc.mode != ResampleMode::adaptive) {
    throw std::invalid_argument("the unbiasedness test runs the adaptive weighted engine");
  }
  const auto model = build_model(request);
  const std::size_t reps = options.replicates;
  std::vector<double> values(reps, 0.0);
  std::vector<std::size_t> resamples(reps, 0);
  std::vector<char> dead(reps, 0);
  std::vector<double> id_err(reps, 0.0);
  std::vector<double> sum_err(reps, 0.0);
  std::vector<std::exception_ptr> errors(reps);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t r = 0; r < reps; ++r) {
    try {
      SmcConfig c = request.smc;
      c.seed = derive_seed(options.master_seed, {hash_label("unbiasedness"), r});
      const TracedRun run = traced_run(*model, c);
      values[r] = run.value();
      resamples[r] = run.trace.times.size();
      dead[r] = run.extinct ? 1 : 0;
      id_err[r] = run.trace.max_identity_error;
      sum_err[r] = run.trace.max_weight_sum_error;
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  UnbiasednessReport rep;
  rep.replicates = reps;
  rep.oracle = oracle;
  rep.oracle_se = oracle_se;
  const auto R = static_cast<double>(reps);
  rep.mean = stable_sum(values) / R;
  std::vector<double> sq(reps);
  for (std::size_t r = 0; r < reps; ++r) sq[r] = (values[r] - rep.mean) * (values[r] - rep.mean);
  rep.se = std::sqrt(stable_sum(sq) / (R - 1.0) / R);
  std::size_t fired = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    if (resamples[r] > 0) ++fired;
    total += static_cast<double>(resamples[r]);
    rep.extinct += static_cast<std::size_t>(dead[r]);
    rep.max_identity_error = std::max(rep.max_identity_error, id_err[r]);
    rep.max_weight_sum_error = std::max(rep.max_weight_sum_error, sum_err[r]);
  }
  rep.resample_rate = static_cast<double>(fired) / R;
  rep.mean_resamples = total / R;

  const double band = options.z_tolerance * std::hypot(rep.se, oracle_se);
  if (rep.resample_rate < options.min_resample_rate) {
    rep.verdict = Verdict::inconclusive;
  } else if (std::abs(rep.mean - oracle) <= band &&
             rep.max_identity_error <= options.identity_tolerance &&
             rep.max_weight_sum_error <= options.weight_sum_tolerance) {
    rep.verdict = Verdict::pass;
  } else {
    rep.verdict = Verdict::fail;
  }
  return rep;
}

std::string report_to_json(const UnbiasednessReport& r) {
  nlohmann::json j;
  j["replicates"] = r.replicates;
  j["mean"] = r.mean;
  j["se"] = r.se;
  j["oracle"] = r.oracle;
  j["oracle_se"] = r.oracle_se;
  j["verdict"] = verdict_name(r.verdict);
  j["resample_rate"] = r.resample_rate;
  j["mean_resamples"] = r.mean_resamples;
  j["extinct"] = r.extinct;
  j["max_identity_error"] = r.max_identity_error;
  j["max_weight_sum_error"] = r.max_weight_sum_error;
  return j.dump(2);
}

void gauss_legendre(int order, std::vector<double>& nodes, std::vector<double>& weights) {
  if (order < 1) throw std::invalid_argument("quadrature order must be positive");
  nodes.assign(static_cast<std::size_t>(order), 0.0);
  weights.assign(static_cast<std::size_t>(order), 0.0);
  const int half = (order + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi's initial guess, then Newton on P_order.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    nodes[static_cast<std::size_t>(i)] = -x;
    nodes[static_cast<std::size_t>(order - 1 - i)] = x;
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(order - 1 - i)] = w;
  }
}

double barrier_quadrature(double s0, double sigma, double t_end, const BarrierOption& option) {
  option.validate(1);
  const double lo_b = option.lower(0);
  const double hi_b = option.upper(0);
  const auto h = [&](double x) {
    const double s = x;
    return barrier_payoff(option, &s, 1, 1);
  };
  if (sigma == 0.0 || t_end == 0.0) {
    return (lo_b < s0 && s0 < hi_b) ? h(s0) : 0.0;
  }
  const double mean = s0 - 0.5 * sigma * sigma * t_end;
  const double sd = sigma * std::sqrt(t_end);
  double lo = std::max(lo_b, mean - 14.0 * sd);
  double hi = std::min(hi_b, mean + 14.0 * sd);
  const double log_k = std::log(option.strike);
  if (option.kind == PayoffKind::call) lo = std::max(lo, log_k);
  if (option.kind == PayoffKind::put) hi = std::min(hi, log_k);
  if (!(lo < hi)) return 0.0;

  std::vector<double> x;
  std::vector<double> w;
  gauss_legendre(20, x, w);
  constexpr int kPanels = 400;
  const double width = (hi - lo) / kPanels;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(kPanels) * x.size());
  for (int p = 0; p < kPanels; ++p) {
    const double a = lo + p * width;
    const double mid = a + 0.5 * width;
    for (std::size_t q = 0; q < x.size(); ++q) {
      const double u = mid + 0.5 * width * x[q];
      terms.push_back(0.5 * width * w[q] * h(u) * std::exp(log_normal_pdf(u, mean, sd)));
    }
  }
  return stable_sum(terms);
}

MonteCarloOracle plain_mc_oracle(PricingRequest request, std::size_t batches,
                                 std::size_t per_batch, std::uint64_t seed) {
  if (batches < 2) throw std::invalid_argument("oracle needs at least two batches");
  request.method = Method::plain_mc;
  request.weighting = WeightingSpec{};
  request.smc.n_particles = per_batch;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    means[b] = price_any(request, derive_seed(seed, {hash_label("oracle"), b})).estimate;
  }
  MonteCarloOracle o;
  const auto B = static_cast<double>(batches);
  o.mean = stable_sum(means) / B;
  std::vector<double> sq(batches);
  for (std::size_t b = 0; b < batches; ++b) sq[b] = (means[b] - o.mean) * (means[b] - o.mean);
  o.se = std::sqrt(stable_sum(sq) / (B - 1.0) / B);
  return o;
}

}  // namespace wfsmc
