// Comparison estimators: separate regression with pseudo-label selection
// (SR), the DR-learner (DR-CATE), and the density-ratio augmented
// DR-learner for the target population (ACW-CATE).
//
// All regularizer selection other than SR's uses hold-out validation: the
// fitting set is split into equal random halves, every grid value is fitted on
// the first half, and the value with the smallest squared validation error on
// the second half wins. The selected model is the one fitted on the first half.
#pragma once

#include "coke/cate.hpp"
#include "coke/core.hpp"
#include "coke/krr.hpp"
#include "coke/logistic.hpp"
#include "coke/pipeline.hpp"
#include "coke/rng.hpp"
#include "coke/selection.hpp"

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

namespace coke {

struct BenchmarkOptions {
  /// Propensities are clipped to [clip, 1 - clip] inside pseudo-outcomes; 0 disables.
  double propensity_clip = 1e-3;
};

inline double clip_propensity(double p, double clip) {
  return clip > 0 ? std::clamp(p, clip, 1.0 - clip) : p;
}

/// ((a - pi) / (pi (1 - pi))) (y - f_a(z)) + f_1(z) - f_0(z), from precomputed
/// propensities and arm predictions at each row of d.
inline Vector dr_pseudo_outcomes(const LabeledDataset& d, const Vector& pi, const Vector& f0, const Vector& f1,
                                 double clip) {
  const Index n = d.size();
  require(pi.size() == n && f0.size() == n && f1.size() == n, "nuisance vectors must have one entry per row");
  Vector phi(n);
  for (Index i = 0; i < n; ++i) {
    const int a = d.a[static_cast<std::size_t>(i)];
    const double p = clip_propensity(pi(i), clip);
    const double fa = a == 1 ? f1(i) : f0(i);
    phi(i) = (a - p) / (p * (1.0 - p)) * (d.y(i) - fa) + f1(i) - f0(i);
  }
  return phi;
}

struct HoldoutChoice {
  KrrModel model;
  std::size_t index;
  std::vector<double> losses;
};

/// Hold-out selection of lambda for an indicator-weighted arm fit on d.
inline HoldoutChoice holdout_fit_arm(const KernelSpec& spec, const LabeledDataset& d, int arm,
                                     const std::vector<double>& grid, std::uint64_t key) {
  auto [train_rows, val_rows] = split_halves(d.size(), key);
  const LabeledDataset train = d.subset(train_rows);
  const LabeledDataset val = d.subset(val_rows);
  const auto val_arm = val.arm_indices(arm);
  if (val_arm.empty()) fail(ErrorKind::kEmptyArm, "hold-out validation half has no a = " + std::to_string(arm));
  const Matrix z_val = select_rows(val.z, val_arm);
  const Vector y_val = select_rows(val.y, val_arm);
  auto models = fit_arm_grid(spec, train, arm, grid);
  std::vector<double> losses;
  for (const auto& m : models) losses.push_back(mean_squared_difference(y_val, m.predict(z_val)));
  const std::size_t best = argmin_with_ties(losses, grid);
  return HoldoutChoice{models[best], best, std::move(losses)};
}

/// Hold-out selection of lambda for a full-sample fit on explicit train/validation sets.
inline HoldoutChoice holdout_fit(const KernelSpec& spec, const Matrix& z_train, const Vector& r_train,
                                 const Matrix& z_val, const Vector& r_val, const std::vector<double>& grid) {
  require(z_val.rows() >= 1, "hold-out validation set is empty");
  auto models = fit_grid(spec, z_train, r_train, grid);
  std::vector<double> losses;
  for (const auto& m : models) losses.push_back(mean_squared_difference(r_val, m.predict(z_val)));
  const std::size_t best = argmin_with_ties(losses, grid);
  return HoldoutChoice{models[best], best, std::move(losses)};
}

/// First-stage nuisances shared by DR-CATE and ACW-CATE.
struct DrNuisances {
  LogisticModel propensity;
  KrrModel f0;
  KrrModel f1;
};

inline DrNuisances fit_dr_nuisances(const KernelSpec& spec, const LabeledDataset& d1, const std::vector<double>& grid,
                                    std::uint64_t key) {
  if (d1.arm_count(0) == 0) fail(ErrorKind::kEmptyArm, "nuisance split has no a = 0");
  if (d1.arm_count(1) == 0) fail(ErrorKind::kEmptyArm, "nuisance split has no a = 1");
  LogisticModel pi = logistic_fit(d1.z, d1.a);
  HoldoutChoice f0 = holdout_fit_arm(spec, d1, 0, grid, child_key(key, 10));
  HoldoutChoice f1 = holdout_fit_arm(spec, d1, 1, grid, child_key(key, 11));
  return DrNuisances{std::move(pi), std::move(f0.model), std::move(f1.model)};
}

/// One DR-CATE fit: nuisances on `nuisance_split`, pseudo-outcomes and the
/// second-stage hold-out regression on `regression_split`.
inline CateModel dr_cate_leg(const KernelSpec& spec, const LabeledDataset& nuisance_split,
                             const LabeledDataset& regression_split, const std::vector<double>& grid,
                             std::uint64_t key, const BenchmarkOptions& opts = {}) {
  const DrNuisances nu = fit_dr_nuisances(spec, nuisance_split, grid, key);
  const Vector phi = dr_pseudo_outcomes(regression_split, nu.propensity.predict_prob(regression_split.z),
                                        nu.f0.predict(regression_split.z), nu.f1.predict(regression_split.z),
                                        opts.propensity_clip);
  auto [train_rows, val_rows] = split_halves(regression_split.size(), child_key(key, 20));
  const HoldoutChoice h = holdout_fit(spec, select_rows(regression_split.z, train_rows), select_rows(phi, train_rows),
                                      select_rows(regression_split.z, val_rows), select_rows(phi, val_rows), grid);
  return CateModel::single(h.model);
}

inline CateModel dr_cate(const KernelSpec& spec, const LabeledDataset& d, const std::vector<double>& grid,
                         std::uint64_t seed, const BenchmarkOptions& opts = {}) {
  d.validate();
  auto [d1, d1p] = split_source(d, seed);
  return dr_cate_leg(spec, d1, d1p, grid, child_key(seed, 1), opts);
}

/// Two-fold cross-fitted DR-CATE: legs on (D1, D1') and (D1', D1), averaged.
inline CateModel dr_cate_crossfit(const KernelSpec& spec, const LabeledDataset& d, const std::vector<double>& grid,
                                  std::uint64_t seed, const BenchmarkOptions& opts = {}) {
  d.validate();
  auto [d1, d1p] = split_source(d, seed);
  return CateModel::average({dr_cate_leg(spec, d1, d1p, grid, child_key(seed, 1), opts),
                             dr_cate_leg(spec, d1p, d1, grid, child_key(seed, 2), opts)});
}

/// ACW pseudo-outcomes. Source rows (S = 0):
///   ((n_s + n_t) / n_s) w(z) (a - pi) / (pi (1 - pi)) (y - f_a(z));
/// target rows (S = 1):
///   ((n_s + n_t) / n_t) (f_1(z) - f_0(z)),
/// where n_s is the number of source rows and n_t the number of target rows.
inline Vector acw_source_pseudo_outcomes(const LabeledDataset& d, const Vector& weight, const Vector& pi,
                                         const Vector& f0, const Vector& f1, Index n_target, double clip) {
  const Index n = d.size();
  require(weight.size() == n && pi.size() == n && f0.size() == n && f1.size() == n,
          "nuisance vectors must have one entry per row");
  const double scale = static_cast<double>(n + n_target) / static_cast<double>(n);
  Vector phi(n);
  for (Index i = 0; i < n; ++i) {
    const int a = d.a[static_cast<std::size_t>(i)];
    const double p = clip_propensity(pi(i), clip);
    const double fa = a == 1 ? f1(i) : f0(i);
    phi(i) = scale * weight(i) * (a - p) / (p * (1.0 - p)) * (d.y(i) - fa);
  }
  return phi;
}

inline Vector acw_target_pseudo_outcomes(const Vector& f0, const Vector& f1, Index n_source) {
  require(f0.size() == f1.size() && f0.size() >= 1, "target nuisance vectors must match");
  const double scale = static_cast<double>(n_source + f0.size()) / static_cast<double>(f0.size());
  return scale * (f1 - f0);
}

inline CateModel acw_cate_leg(const KernelSpec& spec, const LabeledDataset& nuisance_split,
                              const LabeledDataset& regression_split, const UnlabeledDataset& target,
                              const std::vector<double>& grid, std::uint64_t key, const BenchmarkOptions& opts = {}) {
  require(target.size() >= 2, "ACW-CATE needs at least two target rows");
  const DrNuisances nu = fit_dr_nuisances(spec, nuisance_split, grid, key);
  const DensityRatioModel ratio = fit_density_ratio(nuisance_split.z, target.z);

  const Matrix& zs = regression_split.z;
  const Vector phi_s = acw_source_pseudo_outcomes(regression_split, ratio.ratio(zs), nu.propensity.predict_prob(zs),
                                                  nu.f0.predict(zs), nu.f1.predict(zs), target.size(),
                                                  opts.propensity_clip);
  const Vector phi_t =
      acw_target_pseudo_outcomes(nu.f0.predict(target.z), nu.f1.predict(target.z), regression_split.size());

  // Training half: half of the source rows plus half of the target rows.
  auto [s_train, s_val] = split_halves(regression_split.size(), child_key(key, 30));
  auto [t_train, t_val] = split_halves(target.size(), child_key(key, 31));
  auto stack = [](const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() + b.rows(), a.cols());
    out.topRows(a.rows()) = a;
    out.bottomRows(b.rows()) = b;
    return out;
  };
  auto concat = [](const Vector& a, const Vector& b) {
    Vector out(a.size() + b.size());
    out.head(a.size()) = a;
    out.tail(b.size()) = b;
    return out;
  };
  const Matrix z_train = stack(select_rows(zs, s_train), select_rows(target.z, t_train));
  const Vector r_train = concat(select_rows(phi_s, s_train), select_rows(phi_t, t_train));
  const Matrix z_val = stack(select_rows(zs, s_val), select_rows(target.z, t_val));
  const Vector r_val = concat(select_rows(phi_s, s_val), select_rows(phi_t, t_val));
  return CateModel::single(holdout_fit(spec, z_train, r_train, z_val, r_val, grid).model);
}

inline CateModel acw_cate(const KernelSpec& spec, const LabeledDataset& d, const UnlabeledDataset& target,
                          const std::vector<double>& grid, std::uint64_t seed, const BenchmarkOptions& opts = {}) {
  d.validate();
  target.validate();
  auto [d1, d1p] = split_source(d, seed);
  return acw_cate_leg(spec, d1, d1p, target, grid, child_key(seed, 1), opts);
}

inline CateModel acw_cate_crossfit(const KernelSpec& spec, const LabeledDataset& d, const UnlabeledDataset& target,
                                   const std::vector<double>& grid, std::uint64_t seed,
                                   const BenchmarkOptions& opts = {}) {
  d.validate();
  target.validate();
  auto [d1, d1p] = split_source(d, seed);
  return CateModel::average({acw_cate_leg(spec, d1, d1p, target, grid, child_key(seed, 1), opts),
                             acw_cate_leg(spec, d1p, d1, target, grid, child_key(seed, 2), opts)});
}

struct SrResult {
  CateModel model;
  SelectionReport control;
  SelectionReport treated;
};

/// Per-arm candidates fitted on one split, selected against labels imputed
/// onto the target by an arm fit on the other split.
inline SrResult sr_pseudo_label_on(const KernelSpec& spec, const LabeledDataset& d1, const LabeledDataset& d1p,
                                   const UnlabeledDataset& target, const std::vector<double>& grid,
                                   double lambda_tilde) {
  std::vector<KrrModel> chosen;
  std::vector<SelectionReport> reports;
  for (int arm : {0, 1}) {
    auto candidates = fit_arm_grid(spec, d1, arm, grid);
    const KrrModel imputation = fit_arm(spec, d1p, arm, lambda_tilde);
    SelectionReport report = select(candidates, imputation, target, grid);
    chosen.push_back(candidates[report.chosen_index]);
    reports.push_back(std::move(report));
  }
  return SrResult{CateModel::difference(chosen[1], chosen[0]), std::move(reports[0]), std::move(reports[1])};
}

inline SrResult sr_pseudo_label(const KernelSpec& spec, const LabeledDataset& d, const UnlabeledDataset& target,
                                const std::vector<double>& grid, double lambda_tilde, std::uint64_t seed) {
  d.validate();
  target.validate();
  auto [d1, d1p] = split_source(d, seed);
  return sr_pseudo_label_on(spec, d1, d1p, target, grid, lambda_tilde);
}

}  // namespace coke
