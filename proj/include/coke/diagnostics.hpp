// Real-data diagnostics: covariate-shift summaries from a classifier density
// ratio, Kish effective sample size, efficient-score validation labels, and
// correlation coefficients.
#pragma once

#include "coke/benchmarks.hpp"
#include "coke/cate.hpp"
#include "coke/core.hpp"
#include "coke/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace coke {

struct DensityRatioDiagnostics {
  DensityRatioModel model;
  Vector source_log10_ratio;
  Vector target_log10_ratio;
};

inline DensityRatioDiagnostics density_ratio_diag(const Eigen::Ref<const Matrix>& z_source,
                                                  const Eigen::Ref<const Matrix>& z_target) {
  DensityRatioModel model = fit_density_ratio(z_source, z_target);
  Vector s = model.ratio(z_source).array().log10();
  Vector t = model.ratio(z_target).array().log10();
  return DensityRatioDiagnostics{std::move(model), std::move(s), std::move(t)};
}

/// (sum w)^2 / sum w^2.
inline double effective_sample_size(const Eigen::Ref<const Vector>& weights) {
  require(weights.size() >= 1, "effective sample size needs at least one weight");
  require(weights.allFinite() && (weights.array() > 0.0).all(), "weights must be positive and finite");
  // Rescale by the max weight so tiny or huge weights do not under/overflow.
  const Vector w = weights / weights.maxCoeff();
  const double s = w.sum();
  return s * s / w.squaredNorm();
}

/// Linear regression with intercept and a small ridge on the slopes.
class RidgeLinearModel {
 public:
  RidgeLinearModel(Vector coefficients) : beta_(std::move(coefficients)) {}

  const Vector& coefficients() const { return beta_; }

  Vector predict(const Eigen::Ref<const Matrix>& z) const {
    require(z.cols() + 1 == beta_.size(), "linear model covariate dimension mismatch");
    return (z * beta_.tail(beta_.size() - 1)).array() + beta_(0);
  }

 private:
  Vector beta_;
};

inline RidgeLinearModel ridge_linear_fit(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Vector>& y,
                                         double ridge = 1e-6) {
  require(z.rows() >= 1 && y.size() == z.rows(), "linear regression needs matching nonempty inputs");
  const Matrix x = detail::with_intercept(z);
  Eigen::MatrixXd gram = x.transpose() * x;
  gram.diagonal().tail(z.cols()).array() += ridge * static_cast<double>(z.rows());
  gram(0, 0) += 1e-12 * static_cast<double>(z.rows());
  return RidgeLinearModel(gram.ldlt().solve(x.transpose() * y));
}

/// Nuisances for efficient-score validation on a labeled target sample:
/// logistic propensity and per-arm ridge-linear outcome models.
struct GlrNuisances {
  LogisticModel propensity;
  RidgeLinearModel f0;
  RidgeLinearModel f1;
};

inline GlrNuisances fit_glr_nuisances(const LabeledDataset& d) {
  d.validate();
  GlrNuisances out{logistic_fit(d.z, d.a), RidgeLinearModel(Vector::Zero(d.dim() + 1)),
                   RidgeLinearModel(Vector::Zero(d.dim() + 1))};
  for (int arm : {0, 1}) {
    const auto rows = d.arm_indices(arm);
    if (rows.empty()) fail(ErrorKind::kEmptyArm, "labeled target has no a = " + std::to_string(arm));
    (arm == 0 ? out.f0 : out.f1) = ridge_linear_fit(select_rows(d.z, rows), select_rows(d.y, rows));
  }
  return out;
}

struct ScoreVector {
  Vector scores;
};

/// s_i = ((a - pi) / (pi (1 - pi))) (y - f_a(z)) + f_1(z) - f_0(z) with pi
/// clipped to [clip, 1 - clip].
template <Predictor P0, Predictor P1>
ScoreVector efficient_score(const LabeledDataset& labeled_target, const Vector& propensity, const P0& f0,
                            const P1& f1, double clip = 1e-3) {
  labeled_target.validate();
  return ScoreVector{dr_pseudo_outcomes(labeled_target, propensity, f0.predict(labeled_target.z),
                                        f1.predict(labeled_target.z), clip)};
}

template <Predictor P0, Predictor P1>
ScoreVector efficient_score(const LabeledDataset& labeled_target, const LogisticModel& propensity, const P0& f0,
                            const P1& f1, double clip = 1e-3) {
  return efficient_score(labeled_target, propensity.predict_prob(labeled_target.z), f0, f1, clip);
}

inline double pearson(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  require(x.size() == y.size() && x.size() >= 2, "correlation needs two equal-length vectors of length >= 2");
  const Vector dx = x.array() - x.mean();
  const Vector dy = y.array() - y.mean();
  const double sxx = dx.squaredNorm();
  const double syy = dy.squaredNorm();
  if (!(sxx > 0.0) || !(syy > 0.0)) fail(ErrorKind::kUndefined, "correlation undefined for zero-variance input");
  return std::clamp(dx.dot(dy) / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// 1-based ranks; tied values share the average of their positions.
inline Vector average_ranks(const Eigen::Ref<const Vector>& x) {
  const Index n = x.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return x(a) < x(b); });
  Vector ranks(n);
  Index i = 0;
  while (i < n) {
    Index j = i;
    while (j + 1 < n && x(order[static_cast<std::size_t>(j + 1)]) == x(order[static_cast<std::size_t>(i)])) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index k = i; k <= j; ++k) ranks(order[static_cast<std::size_t>(k)]) = avg;
    i = j + 1;
  }
  return ranks;
}

inline double spearman(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  require(x.size() == y.size() && x.size() >= 2, "correlation needs two equal-length vectors of length >= 2");
  return pearson(average_ranks(x), average_ranks(y));
}

}  // namespace coke
