// End-to-end COKE: split the source sample, generate RA-learner candidates
// over a grid of second-stage regularizers on the first half, and select
// among them with outcomes imputed from the second half onto the target.
#pragma once

#include "coke/cate.hpp"
#include "coke/core.hpp"
#include "coke/kernel.hpp"
#include "coke/rng.hpp"
#include "coke/selection.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace coke {

enum class GridMode {
  kTheory,      // {2^k xi log n / n : k = 0..ceil(2 log n)}
  kExperiment,  // {2^k / (5n) : k = 0..ceil(log2(5n))}
  kExplicit,
};

/// How a fixed regularizer (nuisance or imputation) is derived from n and xi.
enum class LambdaRule {
  kTheory,      // xi log n / n
  kExperiment,  // 1 / (5n)
  kValue,
};

struct LambdaSetting {
  LambdaRule rule = LambdaRule::kTheory;
  double value = 0.0;

  double resolve(Index n, double xi) const {
    switch (rule) {
      case LambdaRule::kTheory: return theory_lambda(xi, n);
      case LambdaRule::kExperiment: return 1.0 / (5.0 * static_cast<double>(n));
      case LambdaRule::kValue:
        require(value > 0 && std::isfinite(value), "explicit regularizer must be positive");
        return value;
    }
    return 0.0;
  }
};

struct CokeConfig {
  KernelSpec kernel = KernelSpec::matern_exp(5.0);
  GridMode grid_mode = GridMode::kTheory;
  std::vector<double> explicit_grid;
  std::optional<int> grid_exponent;  // overrides q in either grid mode
  LambdaSetting nuisance{LambdaRule::kTheory, 0.0};
  LambdaSetting imputation{LambdaRule::kTheory, 0.0};
  std::uint64_t split_seed = 0;
  bool crossfit = false;

  /// Settings used by the simulation study: experiment grid with the
  /// nuisance and imputation regularizers both at 1/(5n).
  static CokeConfig experiment(std::uint64_t seed = 0) {
    CokeConfig cfg;
    cfg.grid_mode = GridMode::kExperiment;
    cfg.nuisance = {LambdaRule::kExperiment, 0.0};
    cfg.imputation = {LambdaRule::kExperiment, 0.0};
    cfg.split_seed = seed;
    return cfg;
  }
};

inline std::vector<double> build_grid(GridMode mode, Index n, double xi, const std::vector<double>& explicit_values = {},
                                      std::optional<int> exponent = std::nullopt) {
  if (mode == GridMode::kExplicit) {
    require(!explicit_values.empty(), "explicit grid is empty");
    for (std::size_t i = 0; i < explicit_values.size(); ++i) {
      require(explicit_values[i] > 0 && std::isfinite(explicit_values[i]), "explicit grid values must be positive");
      require(i == 0 || explicit_values[i] > explicit_values[i - 1], "explicit grid must be strictly increasing");
    }
    return explicit_values;
  }
  require(n >= 2, "grid construction needs n >= 2");
  const double dn = static_cast<double>(n);
  double base = 0.0;
  int q = 0;
  if (mode == GridMode::kTheory) {
    base = theory_lambda(xi, n);
    q = static_cast<int>(std::ceil(2.0 * std::log(dn)));
  } else {
    base = 1.0 / (5.0 * dn);
    q = static_cast<int>(std::ceil(std::log2(5.0 * dn)));
  }
  if (exponent) {
    require(*exponent >= 0, "grid exponent must be nonnegative");
    q = *exponent;
  }
  std::vector<double> grid;
  for (int k = 0; k <= q; ++k) grid.push_back(std::ldexp(base, k));
  return grid;
}

inline std::vector<double> build_grid(const CokeConfig& cfg, Index n) {
  const double xi = cfg.grid_mode == GridMode::kTheory ? cfg.kernel.sup_bound() : 0.0;
  return build_grid(cfg.grid_mode, n, xi, cfg.explicit_grid, cfg.grid_exponent);
}

struct CokeResult {
  CateModel model;
  SelectionReport report;
  std::vector<double> grid;
  Index n1 = 0;
  Index n2 = 0;
  RaCandidates candidates;
};

struct CrossfitResult {
  CateModel model;
  std::array<CokeResult, 2> legs;
};

namespace detail {

inline double xi_or_zero(const KernelSpec& spec, LambdaRule a, LambdaRule b, GridMode mode) {
  const bool needs_xi = a == LambdaRule::kTheory || b == LambdaRule::kTheory || mode == GridMode::kTheory;
  return needs_xi ? spec.sup_bound() : 0.0;
}

template <typename F>
auto naming_split(const char* split, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kEmptyArm) fail(ErrorKind::kEmptyArm, std::string("split ") + split + ": " + e.message());
    throw;
  }
}

/// One COKE leg: candidates from `train`, imputation from `holdout`. `n` is
/// the full source size used in the regularizer formulas.
inline CokeResult run_leg(const LabeledDataset& train, const LabeledDataset& holdout, const UnlabeledDataset& target,
                          const CokeConfig& cfg, Index n, const char* train_name, const char* holdout_name) {
  const KernelSpec& spec = cfg.kernel;
  const double xi = xi_or_zero(spec, cfg.nuisance.rule, cfg.imputation.rule, cfg.grid_mode);
  const double lambda0 = cfg.nuisance.resolve(n, xi);
  const double lambda_tilde = cfg.imputation.resolve(n, xi);
  std::vector<double> grid = build_grid(cfg, n);

  RaCandidates cands = naming_split(train_name, [&] { return ra_learner_grid(spec, train, lambda0, lambda0, grid); });
  const CateModel imputation =
      naming_split(holdout_name, [&] { return build_imputation(spec, holdout, lambda_tilde, lambda_tilde); });
  SelectionReport report = select(cands.models, imputation, target, grid);
  report.lambda_chosen = RegularizerTriple{lambda0, lambda0, grid[report.chosen_index]};
  CateModel chosen = cands.models[report.chosen_index];
  return CokeResult{std::move(chosen), std::move(report), std::move(grid), train.size(), holdout.size(),
                    std::move(cands)};
}

}  // namespace detail

/// Seeded half split used by run() and run_crossfit(): D1 gets ceil(n/2) rows.
inline std::pair<LabeledDataset, LabeledDataset> split_source(const LabeledDataset& d, std::uint64_t seed) {
  auto [first, second] = split_halves(d.size(), seed);
  return {d.subset(first), d.subset(second)};
}

inline CokeResult run(const LabeledDataset& d, const UnlabeledDataset& target, const CokeConfig& cfg) {
  d.validate();
  target.validate();
  require(d.dim() == target.dim(), "source and target covariate dimensions differ");
  require(d.size() >= 2, "COKE needs at least two source observations");
  auto [d1, d2] = split_source(d, cfg.split_seed);
  return detail::run_leg(d1, d2, target, cfg, d.size(), "D1", "D2");
}

/// Two-fold cross-fitting: run on (D1, D2) and on (D2, D1) and average.
inline CrossfitResult run_crossfit(const LabeledDataset& d, const UnlabeledDataset& target, const CokeConfig& cfg) {
  d.validate();
  target.validate();
  require(d.dim() == target.dim(), "source and target covariate dimensions differ");
  require(d.size() >= 2, "COKE needs at least two source observations");
  auto [d1, d2] = split_source(d, cfg.split_seed);
  CokeResult a = detail::run_leg(d1, d2, target, cfg, d.size(), "D1", "D2");
  CokeResult b = detail::run_leg(d2, d1, target, cfg, d.size(), "D2", "D1");
  CateModel avg = CateModel::average({a.model, b.model});
  return CrossfitResult{std::move(avg), {std::move(a), std::move(b)}};
}

}  // namespace coke
