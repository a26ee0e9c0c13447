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

// Command-line driver: pricing, pilot fitting, method comparisons and the
// unbiasedness check, all configured from one JSON file plus overrides.

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wfsmc/experiments.hpp"
#include "wfsmc/kernels.hpp"
#include "wfsmc/pricing.hpp"
#include "wfsmc/rng.hpp"
#include "wfsmc/unbiasedness.hpp"
#include "wfsmc/weighting.hpp"

using namespace wfsmc;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string simd;
};

json resolve(const Common& c) {
  json cfg = load_config(c.config, c.overrides);
  if (c.seed) cfg["seed"] = *c.seed;
  return cfg;
}

void apply_runtime(const Common& c) {
  if (c.threads > 0) omp_set_num_threads(c.threads);
  if (c.simd == "scalar") kernels::select(kernels::SimdLevel::scalar);
  else if (c.simd == "avx2") kernels::select(kernels::SimdLevel::avx2);
  else if (!c.simd.empty()) throw std::invalid_argument("unknown SIMD level '" + c.simd + "'");
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "JSON configuration file");
  app->add_option("-s,--set", c.overrides, "override a config key, e.g. smc.particles=20000")
      ->take_all();
  app->add_option("--seed", c.seed, "master seed (overrides the config)");
  app->add_option("-j,--threads", c.threads, "worker threads (default: OpenMP default)");
  app->add_option("--simd", c.simd, "kernel level: scalar or avx2 (default: best available)");
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << text;
}

std::string diagnostics_csv(const PricingResult& r) {
  std::string out = "step,ess,resampled,log_c_hat\n";
  for (const auto& d : r.diagnostics) {
    out += std::to_string(d.step) + ',' + format_double(d.ess) + ',' + (d.resampled ? "1" : "0") +
           ',' + format_double(d.log_c_hat) + '\n';
  }
  return out;
}

int cmd_price(const Common& c, bool tarn, std::size_t replicates, const std::string& diag_path) {
  apply_runtime(c);
  json cfg = resolve(c);
  if (!cfg.contains("product")) cfg["product"] = json::object();
  const std::string type = cfg["product"].value("type", "barrier");
  if (tarn && type != "tarn") cfg["product"]["type"] = "tarn";
  if (!tarn && type != "barrier") throw std::invalid_argument("price-barrier needs product.type barrier");
  if (!diag_path.empty()) cfg["smc"]["diagnostics"] = true;
  const PricingRequest req = request_from_config(cfg);
  const std::uint64_t master = req.smc.seed;
  if (replicates == 0) throw std::invalid_argument("need at least one replicate");

  std::vector<double> est;
  std::size_t extinct = 0;
  double wall = 0.0;
  PricingResult first;
  for (std::size_t i = 0; i < replicates; ++i) {
    const std::uint64_t seed = replicates == 1 ? master : replicate_seed(master, "price", 0, i);
    PricingResult r = tarn ? price_tarn(req, seed) : price(req, seed);
    est.push_back(r.estimate);
    extinct += r.extinct ? 1 : 0;
    wall += r.wall_time_s;
    if (i == 0) first = std::move(r);
  }
  const double n = static_cast<double>(est.size());
  double mean = 0.0;
  for (double e : est) mean += e;
  mean /= n;
  json out;
  out["estimate"] = mean;
  if (est.size() > 1) {
    double v = 0.0;
    for (double e : est) v += (e - mean) * (e - mean);
    out["se_hint"] = std::sqrt(v / (n - 1.0) / n);
  } else {
    out["se_hint"] = nullptr;
  }
  out["replicates"] = est.size();
  out["particles"] = req.smc.n_particles;
  out["method"] = method_name(req.method);
  out["weighting"] = weighting_name(req.weighting.kind);
  out["extinct"] = extinct;
  out["resample_count"] = first.resample_steps.size();
  out["log_c_hat"] = first.log_c_hat;
  out["wall_time_s"] = wall;
  if (!diag_path.empty()) {
    write_text(diag_path, diagnostics_csv(first));
    out["diagnostics_path"] = diag_path;
  } else {
    out["diagnostics_path"] = nullptr;
  }
  out["manifest"] = run_manifest(cfg, master);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_pilot(const Common& c, const std::string& out_path, std::optional<std::size_t> paths) {
  apply_runtime(c);
  const json cfg = resolve(c);
  const PricingRequest req = request_from_config(cfg);
  PilotSettings s;
  const json pj = cfg.value("plan", json::object()).value("pilot", json::object());
  s.paths = pj.value("paths", s.paths);
  s.seed = pj.value("seed", cfg.value("seed", s.seed));
  s.min_qualifying = pj.value("min_qualifying", s.min_qualifying);
  if (pj.contains("sigma")) s.sigma = pj.at("sigma").get<double>();
  if (paths) s.paths = *paths;
  const PilotTarget pilot = fit_pilot_target(pilot_spec_for(req, s));
  write_text(out_path, pilot_to_json(pilot) + "\n");
  std::cerr << "pilot: " << pilot.qualifying << " qualifying of " << pilot.paths << " paths";
  if (pilot.mode == PilotTarget::Mode::escapers) {
    std::cerr << " (left " << pilot.left_count << ", right " << pilot.right_count << ")";
  }
  std::cerr << "\n";
  return 0;
}

int cmd_compare(const Common& c, const std::string& out_path, const std::string& manifest_path) {
  apply_runtime(c);
  const json cfg = resolve(c);
  const ExperimentPlan plan = plan_from_config(cfg);
  const auto rows = run_plan(plan);
  if (out_path.empty() || out_path == "-") {
    std::cout << plot_csv(rows);
  } else {
    emit_plot_data(rows, out_path);
  }
  if (!manifest_path.empty()) {
    json m = run_manifest(cfg, plan.master_seed);
    json ext = json::array();
    for (const auto& row : rows) {
      for (const auto& s : row.methods) {
        ext.push_back({{"sweep", row.sweep}, {"method", s.label}, {"extinct", s.extinct}});
      }
    }
    m["extinct_replicates"] = ext;
    write_text(manifest_path, m.dump(2) + "\n");
  }
  return 0;
}

int cmd_unbias(const Common& c, std::optional<double> oracle, std::size_t oracle_batches,
               std::size_t oracle_per_batch) {
  apply_runtime(c);
  const json cfg = resolve(c);
  const PricingRequest req = request_from_config(cfg);
  const json uj = cfg.value("unbiasedness", json::object());
  UnbiasednessOptions opt;
  opt.replicates = uj.value("replicates", opt.replicates);
  opt.master_seed = cfg.value("seed", opt.master_seed);
  opt.z_tolerance = uj.value("z", opt.z_tolerance);
  opt.min_resample_rate = uj.value("min_resample_rate", opt.min_resample_rate);

  double value = 0.0;
  double se = 0.0;
  std::string source;
  const auto* b = std::get_if<BarrierOption>(&req.product);
  if (oracle) {
    value = *oracle;
    source = "given";
  } else if (b != nullptr && req.basket.dim() == 1 && req.grid.monitoring.size() == 1 &&
             req.model.kind() == VolatilityModel::Kind::constant) {
    value = barrier_quadrature(req.basket.s0()[0], req.model.sigma(0), req.grid.time(req.grid.steps), *b);
    source = "quadrature";
  } else {
    PricingRequest plain = req;
    plain.method = Method::plain_mc;
    plain.weighting = WeightingSpec{};
    plain.smc.mode = ResampleMode::never;
    const MonteCarloOracle mc = plain_mc_oracle(plain, oracle_batches, oracle_per_batch,
                                                derive_seed(opt.master_seed, {hash_label("oracle")}));
    value = mc.mean;
    se = mc.se;
    source = "plain_mc";
  }
  const UnbiasednessReport rep = unbiasedness_test(req, value, opt, se);
  json out = json::parse(report_to_json(rep));
  out["oracle_source"] = source;
  std::cout << out.dump(2) << "\n";
  return rep.verdict == Verdict::fail ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted sequential Monte Carlo option pricing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  Common common;
  std::size_t replicates = 1;
  std::string diagnostics;
  std::string out_path;
  std::string manifest;
  std::optional<std::size_t> pilot_paths;
  std::optional<double> oracle;
  std::size_t oracle_batches = 100;
  std::size_t oracle_per_batch = 100000;

  auto* pb = app.add_subcommand("price-barrier", "price a knock-out basket option");
  add_common(pb, common);
  pb->add_option("-r,--replicates", replicates, "independent runs; reports their mean and SE");
  pb->add_option("--diagnostics", diagnostics, "write per-step ESS/resampling CSV of the first run");

  auto* pt = app.add_subcommand("price-tarn", "price a target accrual redemption note");
  add_common(pt, common);
  pt->add_option("-r,--replicates", replicates, "independent runs; reports their mean and SE");
  pt->add_option("--diagnostics", diagnostics, "write per-step ESS/resampling CSV of the first run");

  auto* pp = app.add_subcommand("pilot", "fit and save a pilot target");
  add_common(pp, common);
  pp->add_option("-o,--out", out_path, "output JSON (default stdout)");
  pp->add_option("--paths", pilot_paths, "pilot paths (overrides plan.pilot.paths)");

  auto* pc = app.add_subcommand("compare", "run a replicated method comparison");
  add_common(pc, common);
  pc->add_option("-o,--out", out_path, "output CSV (default stdout)");
  pc->add_option("--manifest", manifest, "write the JSON run manifest here");

  auto* pu = app.add_subcommand("unbias-test", "check E[estimate] against an oracle");
  add_common(pu, common);
  pu->add_option("--oracle", oracle, "oracle value (default: quadrature or plain MC)");
  pu->add_option("--oracle-batches", oracle_batches, "plain MC oracle batches");
  pu->add_option("--oracle-per-batch", oracle_per_batch, "plain MC oracle paths per batch");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*pb) return cmd_price(common, false, replicates, diagnostics);
    if (*pt) return cmd_price(common, true, replicates, diagnostics);
    if (*pp) return cmd_pilot(common, out_path, pilot_paths);
    if (*pc) return cmd_compare(common, out_path, manifest);
    if (*pu) return cmd_unbias(common, oracle, oracle_batches, oracle_per_batch);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
