// Translation of flat config files into library settings for the CLI.
#pragma once

#include "coke/io.hpp"
#include "coke/pipeline.hpp"
#include "coke/sweep.hpp"

#include <string>
#include <vector>

namespace coke::io {

inline const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "kernel.family",    "kernel.rho",         "kernel.amplitude", "kernel.table",   "kernel.bound",
      "grid.mode",        "grid.values",        "grid.q",           "lambda.nuisance", "lambda.imputation",
      "crossfit",         "method",             "seed",             "propensity_clip", "benchmark.crossfit",
      "sim.n",            "sim.n_target",       "sim.p",            "sim.q",          "sim.s_b",
      "sim.s_r",          "sim.c",              "sim.noise_sd",     "sim.n_eval",     "sim.reps",
      "sweep.knob",       "sweep.values",       "sweep.methods",    "sweep.couple_sizes", "sweep.timing",
      "diagnose.methods",
  };
  return keys;
}

inline Config load_config(const std::string& path) { return Config::parse_file(path, known_config_keys()); }

/// kernel.table is "r:v, r:v, ..." with radii in units of kernel.rho.
inline KernelSpec kernel_from(const Config& cfg) {
  const KernelFamily family = parse_kernel_family(cfg.get_string("kernel.family", "matern_exp"));
  const double rho = cfg.get_double("kernel.rho", 5.0);
  switch (family) {
    case KernelFamily::kMaternExp:
      return cfg.has("kernel.amplitude") ? KernelSpec::matern_exp(rho, cfg.get_double("kernel.amplitude", 1.0))
                                         : KernelSpec::matern_exp(rho);
    case KernelFamily::kGaussian: return KernelSpec::gaussian(rho, cfg.get_double("kernel.amplitude", 1.0));
    case KernelFamily::kCustomTable: {
      if (!cfg.has("kernel.table"))
        fail(ErrorKind::kInvalidInput, cfg.where("kernel.family") + ": custom_table needs kernel.table");
      RadialTable table;
      for (const auto& knot : cfg.get_list("kernel.table")) {
        const auto colon = knot.find(':');
        if (colon == std::string::npos)
          fail(ErrorKind::kInvalidInput, cfg.where("kernel.table") + ": knot '" + knot + "' is not r:v");
        table.radii.push_back(parse_double_or_throw(knot.substr(0, colon), cfg.where("kernel.table")));
        table.values.push_back(parse_double_or_throw(knot.substr(colon + 1), cfg.where("kernel.table")));
      }
      if (cfg.has("kernel.bound")) table.declared_bound = cfg.get_double("kernel.bound", 0.0);
      return KernelSpec::custom_table(std::move(table), rho);
    }
  }
  fail(ErrorKind::kInvalidInput, "unhandled kernel family");
}

inline LambdaSetting lambda_from(const Config& cfg, const std::string& key, LambdaRule fallback) {
  if (!cfg.has(key)) return LambdaSetting{fallback, 0.0};
  const std::string v = cfg.get_string(key, "");
  if (v == "theory") return LambdaSetting{LambdaRule::kTheory, 0.0};
  if (v == "experiment") return LambdaSetting{LambdaRule::kExperiment, 0.0};
  const double x = cfg.get_double(key, 0.0);
  if (!(x > 0) || !std::isfinite(x)) fail(ErrorKind::kInvalidInput, cfg.where(key) + ": regularizer must be positive");
  return LambdaSetting{LambdaRule::kValue, x};
}

/// `experiment_defaults` picks the simulation-study defaults (experiment grid,
/// 1/(5n) regularizers); otherwise the theory grid and xi log n / n.
inline CokeConfig coke_from(const Config& cfg, bool experiment_defaults) {
  CokeConfig out = experiment_defaults ? CokeConfig::experiment() : CokeConfig{};
  out.kernel = kernel_from(cfg);
  if (cfg.has("grid.mode")) {
    const std::string mode = cfg.get_string("grid.mode", "");
    if (mode == "theory") out.grid_mode = GridMode::kTheory;
    else if (mode == "experiment") out.grid_mode = GridMode::kExperiment;
    else if (mode == "explicit") out.grid_mode = GridMode::kExplicit;
    else fail(ErrorKind::kInvalidInput, cfg.where("grid.mode") + ": unknown grid mode '" + mode + "'");
  }
  out.explicit_grid = cfg.get_doubles("grid.values");
  if (!out.explicit_grid.empty() && !cfg.has("grid.mode")) out.grid_mode = GridMode::kExplicit;
  if (out.grid_mode == GridMode::kExplicit && out.explicit_grid.empty())
    fail(ErrorKind::kInvalidInput, cfg.where("grid.mode") + ": explicit grid needs grid.values");
  if (cfg.has("grid.q")) {
    const auto q = cfg.get_int("grid.q", 0);
    if (q < 0 || q > 60) fail(ErrorKind::kInvalidInput, cfg.where("grid.q") + ": grid.q must be in [0, 60]");
    out.grid_exponent = static_cast<int>(q);
  }
  const LambdaRule fallback = experiment_defaults ? LambdaRule::kExperiment : LambdaRule::kTheory;
  out.nuisance = lambda_from(cfg, "lambda.nuisance", fallback);
  out.imputation = lambda_from(cfg, "lambda.imputation", fallback);
  out.crossfit = cfg.get_bool("crossfit", false);
  out.split_seed = cfg.get_u64("seed", 0);
  return out;
}

inline BenchmarkOptions benchmark_from(const Config& cfg) {
  BenchmarkOptions opts;
  opts.propensity_clip = cfg.get_double("propensity_clip", opts.propensity_clip);
  if (!(opts.propensity_clip >= 0 && opts.propensity_clip < 0.5))
    fail(ErrorKind::kInvalidInput, cfg.where("propensity_clip") + ": propensity_clip must be in [0, 0.5)");
  return opts;
}

inline sim::MethodSettings method_settings_from(const Config& cfg, bool experiment_defaults) {
  sim::MethodSettings s;
  s.coke = coke_from(cfg, experiment_defaults);
  s.kernel = s.coke.kernel;
  s.benchmark = benchmark_from(cfg);
  s.benchmark_crossfit = cfg.get_bool("benchmark.crossfit", true);
  return s;
}

namespace detail {

inline Index positive_index(const Config& cfg, const std::string& key, Index fallback) {
  const auto v = cfg.get_int(key, fallback);
  if (v < 1) fail(ErrorKind::kInvalidInput, cfg.where(key) + ": " + key + " must be >= 1");
  return static_cast<Index>(v);
}

}  // namespace detail

inline sim::SimConfig sim_from(const Config& cfg) {
  sim::SimConfig s;
  s.n = detail::positive_index(cfg, "sim.n", s.n);
  s.n_target = detail::positive_index(cfg, "sim.n_target", s.n_target);
  s.p = detail::positive_index(cfg, "sim.p", s.p);
  s.q = detail::positive_index(cfg, "sim.q", s.q);
  s.s_b = cfg.get_double("sim.s_b", s.s_b);
  s.s_r = cfg.get_double("sim.s_r", s.s_r);
  s.c = cfg.get_double("sim.c", s.c);
  s.noise_sd = cfg.get_double("sim.noise_sd", s.noise_sd);
  s.n_eval = detail::positive_index(cfg, "sim.n_eval", s.n_eval);
  s.reps = static_cast<int>(detail::positive_index(cfg, "sim.reps", s.reps));
  s.seed = cfg.get_u64("seed", 0);
  try {
    s.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kInvalidInput, cfg.where("sim.n") + ": " + e.message());
  }
  return s;
}

struct SimulateSettings {
  sim::SweepSpec spec;
  bool timing = true;
};

/// Defaults: S_B knob at 10, all five methods, desk-scale sizes (no coupling).
inline SimulateSettings simulate_from(const Config& cfg) {
  SimulateSettings out;
  sim::SweepSpec& spec = out.spec;
  spec.base = sim_from(cfg);
  spec.knob = sim::parse_knob(cfg.get_string("sweep.knob", "S_B"));
  spec.values = cfg.get_doubles("sweep.values");
  if (spec.values.empty()) {
    if (cfg.has("sweep.values")) fail(ErrorKind::kInvalidInput, cfg.where("sweep.values") + ": no values");
    spec.values = {spec.knob == sim::Knob::kN ? static_cast<double>(spec.base.n_target)
                   : spec.knob == sim::Knob::kSR ? spec.base.s_r
                   : spec.knob == sim::Knob::kC  ? spec.base.c
                                                 : spec.base.s_b};
  }
  const auto names = cfg.has("sweep.methods") ? cfg.get_list("sweep.methods")
                                              : std::vector<std::string>{"coke", "coke_cf", "sr", "dr", "acw"};
  for (const auto& name : names) spec.methods.push_back(sim::parse_method(name));
  spec.couple_sizes = cfg.get_bool("sweep.couple_sizes", false);
  spec.settings = method_settings_from(cfg, true);
  out.timing = cfg.get_bool("sweep.timing", true);
  return out;
}

}  // namespace coke::io
