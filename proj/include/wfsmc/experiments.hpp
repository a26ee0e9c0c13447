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

/// \file experiments.hpp
/// Replicated method comparisons over a dimension or volatility sweep,
/// CSV output, and the JSON run configuration shared by the CLI.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "wfsmc/pricing.hpp"
#include "wfsmc/weighting.hpp"

namespace wfsmc {

enum class SweepAxis { none, dimension, sigma };

struct MethodSpec {
  std::string label;
  Method method = Method::plain_mc;
  WeightingKind weighting = WeightingKind::none;
};

/// How to fit the pilot target once per plan.
struct PilotSettings {
  std::size_t paths = 10000;
  std::uint64_t seed = 1;
  /// Pilot volatility; the request's own model when unset.
  std::optional<double> sigma;
  std::size_t min_qualifying = 30;
};

struct ExperimentPlan {
  PricingRequest base;
  SweepAxis axis = SweepAxis::none;
  std::vector<double> values;      // one row per value; ignored for `none`
  std::size_t replicates = 50;
  std::size_t particles = 10000;
  std::vector<MethodSpec> methods;
  /// Label of the method in the numerator of the relative std dev.
  std::string baseline;
  std::uint64_t master_seed = 12345;
  /// When false every runtime is written as 0 so outputs are reproducible.
  bool record_runtime = true;
  std::optional<PilotSettings> pilot;

  void validate() const;
};

struct MethodStats {
  std::string label;
  double mean = 0.0;
  double sd = 0.0;
  /// baseline sd / this sd; NaN when this sd is 0.
  double rel_sd = 0.0;
  double runtime_s = 0.0;
  std::size_t extinct = 0;
  std::vector<double> estimates;
};

struct ComparisonRow {
  double sweep = 0.0;
  std::vector<MethodStats> methods;
  const MethodStats& at(const std::string& label) const;
};

/// The request for one sweep value.
PricingRequest apply_sweep(const PricingRequest& base, SweepAxis axis, double value);

/// Seed of one replicate; independent of the order of methods.
std::uint64_t replicate_seed(std::uint64_t master, const std::string& label,
                             std::size_t sweep_index, std::size_t replicate);

/// Pilot inputs for a request: survivors over [ceil(2k/3), k-1] for a
/// barrier, escapers over the weighted fixings for a TARN.
PilotSpec pilot_spec_for(const PricingRequest& request, const PilotSettings& settings);

std::vector<ComparisonRow> run_plan(const ExperimentPlan& plan);

/// CSV with header sweep,method,mean,sd,rel_sd,runtime_s. Throws on an
/// empty table.
std::string plot_csv(const std::vector<ComparisonRow>& rows);
void emit_plot_data(const std::vector<ComparisonRow>& rows, const std::string& path);

/// Shortest round-trip decimal form; "nan", "inf" and "-inf" otherwise.
std::string format_double(double x);

// ---- configuration ----

/// Reads a JSON file and applies `key.path=value` overrides in order. The
/// value is parsed as JSON when possible and kept as a string otherwise.
nlohmann::json load_config(const std::string& path, const std::vector<std::string>& overrides);
void apply_override(nlohmann::json& config, const std::string& assignment);

PricingRequest request_from_config(const nlohmann::json& config);
ExperimentPlan plan_from_config(const nlohmann::json& config);
VolatilityModel model_from_config(const nlohmann::json& model);

/// Config hash, seed, version, SIMD level and worker count.
nlohmann::json run_manifest(const nlohmann::json& config, std::uint64_t seed);

inline constexpr const char* kVersion = "1.0.0";

}  // namespace wfsmc
