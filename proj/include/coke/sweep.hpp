// Simulation sweeps: vary one knob of the data-generating process, fit every
// requested method on fresh data for each (value, rep) cell, and record the
// target MSE.
#pragma once

#include "coke/benchmarks.hpp"
#include "coke/pipeline.hpp"
#include "coke/rng.hpp"
#include "coke/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <limits>
#include <thread>
#include <vector>

namespace coke::sim {

enum class Method { kCoke, kCokeCrossfit, kSr, kDr, kAcw };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::kCoke: return "coke";
    case Method::kCokeCrossfit: return "coke_cf";
    case Method::kSr: return "sr";
    case Method::kDr: return "dr";
    case Method::kAcw: return "acw";
  }
  return "unknown";
}

inline Method parse_method(std::string_view name) {
  if (name == "coke") return Method::kCoke;
  if (name == "coke_cf") return Method::kCokeCrossfit;
  if (name == "sr") return Method::kSr;
  if (name == "dr") return Method::kDr;
  if (name == "acw") return Method::kAcw;
  fail(ErrorKind::kInvalidInput, "unknown method '" + std::string(name) + "'");
}

enum class Knob { kSB, kSR, kC, kN, kSBq2 };

inline std::string_view to_string(Knob k) {
  switch (k) {
    case Knob::kSB: return "S_B";
    case Knob::kSR: return "S_R";
    case Knob::kC: return "c";
    case Knob::kN: return "n";
    case Knob::kSBq2: return "S_B_q2";
  }
  return "unknown";
}

inline Knob parse_knob(std::string_view name) {
  if (name == "S_B" || name == "s_b") return Knob::kSB;
  if (name == "S_R" || name == "s_r") return Knob::kSR;
  if (name == "c") return Knob::kC;
  if (name == "n") return Knob::kN;
  if (name == "S_B_q2" || name == "s_b_q2") return Knob::kSBq2;
  fail(ErrorKind::kInvalidInput, "unknown sweep knob '" + std::string(name) + "'");
}

/// Settings shared by every method in a sweep.
struct MethodSettings {
  KernelSpec kernel = KernelSpec::matern_exp(5.0);
  /// DR-CATE and ACW-CATE use two-fold cross-fitting.
  bool benchmark_crossfit = true;
  BenchmarkOptions benchmark;
  CokeConfig coke = CokeConfig::experiment();
};

/// Fits `method` on (source, target). All randomness comes from `key`.
inline CateModel fit_method(Method method, const LabeledDataset& source, const UnlabeledDataset& target,
                            const MethodSettings& settings, std::uint64_t key) {
  CokeConfig cfg = settings.coke;
  cfg.kernel = settings.kernel;
  cfg.split_seed = key;
  const Index n = source.size();
  switch (method) {
    case Method::kCoke: return run(source, target, cfg).model;
    case Method::kCokeCrossfit: return run_crossfit(source, target, cfg).model;
    default: break;
  }
  const std::vector<double> grid = build_grid(cfg, n);
  const double xi = cfg.imputation.rule == LambdaRule::kTheory ? cfg.kernel.sup_bound() : 0.0;
  switch (method) {
    case Method::kSr:
      return sr_pseudo_label(settings.kernel, source, target, grid, cfg.imputation.resolve(n, xi), key).model;
    case Method::kDr:
      return settings.benchmark_crossfit ? dr_cate_crossfit(settings.kernel, source, grid, key, settings.benchmark)
                                         : dr_cate(settings.kernel, source, grid, key, settings.benchmark);
    case Method::kAcw:
      return settings.benchmark_crossfit
                 ? acw_cate_crossfit(settings.kernel, source, target, grid, key, settings.benchmark)
                 : acw_cate(settings.kernel, source, target, grid, key, settings.benchmark);
    default: break;
  }
  fail(ErrorKind::kInvalidInput, "unhandled method");
}

/// Applies one knob value. With `couple_sizes`, n_T = ceil(350 sqrt(S_B) +
/// 60 S_R + 25) and n = 4 n_T; for the n knob the value is n_T.
inline SimConfig apply_knob(SimConfig cfg, Knob knob, double value, bool couple_sizes) {
  switch (knob) {
    case Knob::kSB: cfg.s_b = value; break;
    case Knob::kSR: cfg.s_r = value; break;
    case Knob::kC: cfg.c = value; break;
    case Knob::kSBq2:
      cfg.s_b = value;
      cfg.q = 2;
      break;
    case Knob::kN:
      require(value >= 1 && value == std::floor(value), "n knob values must be positive integers (target size)");
      cfg.n_target = static_cast<Index>(value);
      cfg.n = 4 * cfg.n_target;
      return cfg;
  }
  if (couple_sizes) {
    cfg.n_target = coupled_target_size(cfg.s_b, cfg.s_r);
    cfg.n = 4 * cfg.n_target;
  }
  return cfg;
}

struct SweepRow {
  Knob knob;
  double value;
  Method method;
  int rep;
  double mse;
  double runtime_ms;
  std::string status;  // "ok" or the error text
};

struct SweepSpec {
  SimConfig base;
  Knob knob = Knob::kSB;
  std::vector<double> values;
  std::vector<Method> methods;
  bool couple_sizes = true;
  MethodSettings settings;
  unsigned threads = 1;
};

/// Every (value, rep) cell draws source, target, and evaluation data from its
/// own streams and fits all methods on them, so methods are compared on
/// identical data. Rows are ordered by value, then rep, then method.
inline std::vector<SweepRow> sweep(const SweepSpec& spec) {
  require(!spec.values.empty(), "sweep needs at least one knob value");
  require(!spec.methods.empty(), "sweep needs at least one method");
  spec.base.validate();
  const std::size_t reps = static_cast<std::size_t>(spec.base.reps);
  const std::size_t cells = spec.values.size() * reps;
  std::vector<SweepRow> rows(cells * spec.methods.size());

  auto run_cell = [&](std::size_t cell) {
    const std::size_t vi = cell / reps;
    const int rep = static_cast<int>(cell % reps);
    const double value = spec.values[vi];
    const std::size_t base_row = cell * spec.methods.size();
    for (std::size_t m = 0; m < spec.methods.size(); ++m)
      rows[base_row + m] = SweepRow{spec.knob, value, spec.methods[m], rep, 0.0, 0.0, "ok"};
    try {
      const SimConfig cfg = apply_knob(spec.base, spec.knob, value, spec.couple_sizes);
      cfg.validate();
      // Streams depend on (seed, value index, rep) so cells are independent.
      const std::uint64_t cell_seed = splitmix64_mix(cfg.seed ^ (0xA24BAED4963EE407ULL * (vi + 1)));
      CounterRng src_rng(stream_key(cell_seed, static_cast<std::uint64_t>(rep), StreamRole::kSource));
      CounterRng tgt_rng(stream_key(cell_seed, static_cast<std::uint64_t>(rep), StreamRole::kTarget));
      CounterRng eval_rng(stream_key(cell_seed, static_cast<std::uint64_t>(rep), StreamRole::kEval));
      const LabeledDataset source = gen_source(cfg, src_rng);
      const UnlabeledDataset target = gen_target(cfg, tgt_rng);
      const UnlabeledDataset eval = gen_target(cfg, eval_rng, cfg.n_eval);
      const std::uint64_t method_key = stream_key(cell_seed, static_cast<std::uint64_t>(rep), StreamRole::kMethod);
      for (std::size_t m = 0; m < spec.methods.size(); ++m) {
        SweepRow& row = rows[base_row + m];
        const auto start = std::chrono::steady_clock::now();
        try {
          const CateModel model = fit_method(spec.methods[m], source, target, spec.settings, method_key);
          row.mse = evaluate_mse_on(model, cfg, eval);
        } catch (const std::exception& e) {
          row.status = e.what();
          row.mse = std::numeric_limits<double>::quiet_NaN();
        }
        row.runtime_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      }
    } catch (const std::exception& e) {
      for (std::size_t m = 0; m < spec.methods.size(); ++m) {
        rows[base_row + m].status = e.what();
        rows[base_row + m].mse = std::numeric_limits<double>::quiet_NaN();
      }
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(spec.threads, static_cast<unsigned>(cells)));
  if (threads == 1) {
    for (std::size_t c = 0; c < cells; ++c) run_cell(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < cells; c = next++) run_cell(c);
      });
    for (auto& th : pool) th.join();
  }
  return rows;
}

}  // namespace coke::sim
