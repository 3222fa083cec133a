// Logistic regression by damped Newton iterations, and the classifier-based
// density ratio built on it.
#pragma once

#include "coke/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace coke {

inline double expit(double eta) {
  if (eta >= 0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

/// log(1 + exp(eta)) without overflow.
inline double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

struct LogisticFitInfo {
  bool converged = false;
  bool separated = false;  // coefficients came from the ridge-penalized refit
  int iterations = 0;
  double gradient_inf_norm = 0.0;
};

class LogisticModel {
 public:
  LogisticModel() = default;
  explicit LogisticModel(Vector coefficients, LogisticFitInfo info = {})
      : beta_(std::move(coefficients)), info_(info) {
    require(beta_.size() >= 1, "logistic model needs an intercept");
    require(beta_.allFinite(), "logistic coefficients must be finite");
  }

  /// Intercept first, then one slope per covariate.
  const Vector& coefficients() const { return beta_; }
  const LogisticFitInfo& info() const { return info_; }
  Index dim() const { return beta_.size() - 1; }

  Vector linear_predictor(const Eigen::Ref<const Matrix>& z) const {
    require(z.cols() == dim(), "logistic model covariate dimension mismatch");
    return (z * beta_.tail(dim())).array() + beta_(0);
  }

  Vector predict_prob(const Eigen::Ref<const Matrix>& z) const {
    Vector eta = linear_predictor(z);
    for (Index i = 0; i < eta.size(); ++i) eta(i) = expit(eta(i));
    return eta;
  }

 private:
  Vector beta_;
  LogisticFitInfo info_;
};

namespace detail {

/// Log-likelihood sum_i [y_i eta_i - log(1 + exp(eta_i))] - penalty/2 ||beta||^2.
inline double logistic_loglik(const Matrix& x, const Vector& y, const Vector& beta, double penalty) {
  const Vector eta = x * beta;
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - softplus(eta(i));
  return ll - 0.5 * penalty * beta.squaredNorm();
}

inline Vector logistic_gradient(const Matrix& x, const Vector& y, const Vector& beta, double penalty) {
  Vector resid = x * beta;
  for (Index i = 0; i < resid.size(); ++i) resid(i) = y(i) - expit(resid(i));
  return x.transpose() * resid - penalty * beta;
}

struct NewtonOutcome {
  Vector beta;
  LogisticFitInfo info;
  bool diverged = false;
};

/// Newton-Raphson on the design `x` (intercept column included). Convergence
/// is tested on `report_x' * (y - p)`, the gradient in the caller's original
/// coordinates, which may differ from `x` by an affine reparametrization.
inline NewtonOutcome logistic_newton(const Matrix& x, const Matrix& report_x, const Vector& y, double penalty,
                                     double divergence_norm) {
  constexpr int kMaxIterations = 100;
  constexpr double kGradientTol = 1e-8;
  constexpr double kHessianRidge = 1e-6;
  const Index k = x.cols();
  Vector beta = Vector::Zero(k);
  double ll = logistic_loglik(x, y, beta, penalty);
  // Likelihood comparisons within rounding of each other count as ties.
  const double ll_slack = 64.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(x.rows());
  NewtonOutcome out;
  auto reported_gradient = [&](const Vector& b) {
    Vector resid = x * b;
    for (Index i = 0; i < resid.size(); ++i) resid(i) = y(i) - expit(resid(i));
    return Vector(report_x.transpose() * resid);
  };
  for (int iter = 0; iter <= kMaxIterations; ++iter) {
    out.info.iterations = iter;
    out.info.gradient_inf_norm = (reported_gradient(beta) - penalty * beta).lpNorm<Eigen::Infinity>();
    if (out.info.gradient_inf_norm <= kGradientTol) {
      out.info.converged = true;
      break;
    }
    if (iter == kMaxIterations) break;
    const Vector g = logistic_gradient(x, y, beta, penalty);
    const Vector eta = x * beta;
    Vector w(eta.size());
    for (Index i = 0; i < eta.size(); ++i) {
      const double p = expit(eta(i));
      w(i) = p * (1.0 - p);
    }
    Eigen::MatrixXd h = x.transpose() * w.asDiagonal() * x;
    h.diagonal().array() += kHessianRidge + penalty;
    const Vector step = h.ldlt().solve(g);
    if (!step.allFinite()) break;

    // Step halving until the likelihood does not decrease.
    double t = 1.0;
    Vector candidate = beta + step;
    double cand_ll = logistic_loglik(x, y, candidate, penalty);
    while (!(cand_ll >= ll - ll_slack) && t > 1e-12) {
      t *= 0.5;
      candidate = beta + t * step;
      cand_ll = logistic_loglik(x, y, candidate, penalty);
    }
    if (!(cand_ll >= ll - ll_slack)) break;  // no ascent direction left at working precision
    beta = std::move(candidate);
    ll = cand_ll;
    if (beta.norm() > divergence_norm) {
      out.diverged = true;
      break;
    }
  }
  out.beta = std::move(beta);
  return out;
}

/// True when the linear predictor classifies every row strictly correctly,
/// which no finite maximum-likelihood estimate can do.
inline bool perfectly_separates(const Matrix& x, const Vector& y, const Vector& beta) {
  const Vector eta = x * beta;
  for (Index i = 0; i < eta.size(); ++i)
    if ((y(i) > 0.5) != (eta(i) > 0.0) || eta(i) == 0.0) return false;
  return true;
}

inline Matrix with_intercept(const Eigen::Ref<const Matrix>& z) {
  Matrix x(z.rows(), z.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(z.cols()) = z;
  return x;
}

}  // namespace detail

/// Maximum-likelihood logistic regression with an intercept. Covariates are
/// centered and scaled internally (constant columns get a zero slope); Newton
/// steps use a 1e-6 ridge on the Hessian and step halving. On perfect or
/// quasi separation (coefficient norm past 1e4, or every row classified
/// correctly) the fit is redone with a 1e-6 ridge penalty on the likelihood
/// and flagged as separated.
inline LogisticModel logistic_fit(const Eigen::Ref<const Matrix>& z, const std::vector<int>& labels) {
  require(static_cast<Index>(labels.size()) == z.rows(), "label count does not match covariate rows");
  require(all_finite(z), "logistic covariates must be finite");
  Vector y(z.rows());
  bool has0 = false, has1 = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] == 0 || labels[i] == 1, "logistic labels must be 0 or 1");
    y(static_cast<Index>(i)) = labels[i];
    (labels[i] ? has1 : has0) = true;
  }
  require(has0 && has1, "logistic regression needs both classes present");

  const Index p = z.cols();
  const Eigen::RowVectorXd mean = z.colwise().mean();
  Eigen::RowVectorXd scale(p);
  Matrix standardized(z.rows(), p);
  for (Index j = 0; j < p; ++j) {
    const bool constant = z.col(j).maxCoeff() == z.col(j).minCoeff();
    const double sd = constant ? 0.0 : std::sqrt((z.col(j).array() - mean(j)).square().mean());
    scale(j) = sd;
    standardized.col(j) =
        sd > 0 ? Vector((z.col(j).array() - mean(j)) / sd) : Vector(Vector::Zero(z.rows()));
  }
  const Matrix x = detail::with_intercept(standardized);
  const Matrix original = detail::with_intercept(z);

  auto outcome = detail::logistic_newton(x, original, y, 0.0, 1e4);
  if (outcome.diverged || detail::perfectly_separates(x, y, outcome.beta)) {
    outcome = detail::logistic_newton(x, original, y, 1e-6, std::numeric_limits<double>::infinity());
    outcome.info.separated = true;
  }

  Vector beta(p + 1);
  beta(0) = outcome.beta(0);
  for (Index j = 0; j < p; ++j) {
    beta(j + 1) = scale(j) > 0 ? outcome.beta(j + 1) / scale(j) : 0.0;
    beta(0) -= beta(j + 1) * mean(j);
  }
  return LogisticModel(std::move(beta), outcome.info);
}

/// Source-to-target density ratio from a source-vs-target classifier:
/// w(z) = n_S P(S=1|z) / (n_T P(S=0|z)), with P(S=0|z) floored at 1e-6.
class DensityRatioModel {
 public:
  DensityRatioModel(LogisticModel logistic, Index n_source, Index n_target)
      : logistic_(std::move(logistic)), n_source_(n_source), n_target_(n_target) {}

  const LogisticModel& logistic() const { return logistic_; }
  Index n_source() const { return n_source_; }
  Index n_target() const { return n_target_; }

  Vector ratio(const Eigen::Ref<const Matrix>& z) const {
    Vector p = logistic_.predict_prob(z);
    const double scale = static_cast<double>(n_source_) / static_cast<double>(n_target_);
    for (Index i = 0; i < p.size(); ++i) {
      const double p_source = std::max(1.0 - p(i), 1e-6);
      p(i) = std::max(scale * p(i) / p_source, std::numeric_limits<double>::min());
    }
    return p;
  }

 private:
  LogisticModel logistic_;
  Index n_source_;
  Index n_target_;
};

/// Classifier with label 0 on source rows and 1 on target rows.
inline DensityRatioModel fit_density_ratio(const Eigen::Ref<const Matrix>& z_source,
                                           const Eigen::Ref<const Matrix>& z_target) {
  require(z_source.rows() >= 1 && z_target.rows() >= 1, "density ratio needs nonempty source and target samples");
  require(z_source.cols() == z_target.cols(), "source and target covariate dimensions differ");
  Matrix pooled(z_source.rows() + z_target.rows(), z_source.cols());
  pooled.topRows(z_source.rows()) = z_source;
  pooled.bottomRows(z_target.rows()) = z_target;
  std::vector<int> labels(static_cast<std::size_t>(pooled.rows()), 0);
  std::fill(labels.begin() + z_source.rows(), labels.end(), 1);
  return DensityRatioModel(logistic_fit(pooled, labels), z_source.rows(), z_target.rows());
}

}  // namespace coke
