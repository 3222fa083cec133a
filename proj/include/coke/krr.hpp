// Kernel ridge regression in dual form.
//
// A fit on (Z, r) with regularizer lambda minimizes
//   (1/N) sum_i (r_i - f(z_i))^2 + lambda ||f||^2
// over the RKHS of the kernel. By the representer theorem the minimizer is
// f(u) = sum_i alpha_i K(z_i, u) with (K + N lambda I) alpha = r.
#pragma once

#include "coke/core.hpp"
#include "coke/kernel.hpp"

#include <memory>
#include <string>
#include <vector>

namespace coke {

class KrrModel {
 public:
  KrrModel(KernelSpec spec, std::shared_ptr<const Matrix> support, Vector dual_weights)
      : spec_(std::move(spec)), support_(std::move(support)), alpha_(std::move(dual_weights)) {
    require(support_ && support_->rows() >= 1, "KRR model needs at least one support point");
    require(alpha_.size() == support_->rows(), "dual weights must match the support size");
    require(alpha_.allFinite(), "dual weights must be finite");
  }

  const KernelSpec& spec() const { return spec_; }
  const Matrix& support() const { return *support_; }
  const std::shared_ptr<const Matrix>& shared_support() const { return support_; }
  const Vector& dual_weights() const { return alpha_; }
  Index dim() const { return support_->cols(); }

  double predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& u) const {
    const Matrix& s = *support_;
    double acc = 0.0;
    for (Index i = 0; i < s.rows(); ++i) acc += alpha_(i) * spec_.eval(s.row(i), u);
    return acc;
  }

  /// f(u) for every row u of z_new, i.e. gram(z_new, support) * alpha.
  Vector predict(const Eigen::Ref<const Matrix>& z_new) const {
    require(z_new.cols() == dim(), "prediction covariates have dimension " +
                                       std::to_string(z_new.cols()) + ", model expects " +
                                       std::to_string(dim()));
    Vector out(z_new.rows());
    for (Index i = 0; i < z_new.rows(); ++i) out(i) = predict_one(z_new.row(i));
    return out;
  }

  /// alpha' K alpha, the squared RKHS norm of the represented function.
  double rkhs_norm_squared() const { return alpha_.dot(gram(spec_, *support_) * alpha_); }

 private:
  KernelSpec spec_;
  std::shared_ptr<const Matrix> support_;
  Vector alpha_;
};

namespace detail {

inline void check_fit_inputs(const Eigen::Ref<const Matrix>& z, const Eigen::Ref<const Vector>& r,
                             double lambda) {
  require(z.rows() >= 1, "KRR fit needs at least one observation");
  require(r.size() == z.rows(), "response length does not match covariate rows");
  require(all_finite(z) && all_finite(r), "KRR inputs must be finite");
  require(lambda > 0 && std::isfinite(lambda), "regularizer must be positive and finite");
}

/// Solves (K + ridge I) alpha = r by Cholesky. If the factorization fails a
/// diagonal jitter starting at 1e-12 * trace(K)/N is added and escalated by
/// 10x up to 1e-6 * trace(K)/N.
inline Vector solve_regularized(const Matrix& k, double ridge, const Vector& r) {
  const Index n = k.rows();
  const double mean_diag = std::max(k.trace() / static_cast<double>(n), 0.0);
  Matrix system = k;
  system.diagonal().array() += ridge;
  double jitter = 0.0;
  for (;;) {
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() == Eigen::Success) {
      Vector alpha = llt.solve(r);
      if (alpha.allFinite()) return alpha;
    }
    const double next = jitter == 0.0 ? 1e-12 * mean_diag : jitter * 10.0;
    if (mean_diag == 0.0 || next > 1e-6 * mean_diag * (1.0 + 1e-9))
      fail(ErrorKind::kNumericalFailure, "Cholesky factorization failed after jitter escalation");
    system.diagonal().array() += next - jitter;
    jitter = next;
  }
}

inline std::vector<Index> arm_rows_or_throw(const LabeledDataset& d, int arm) {
  require(arm == 0 || arm == 1, "arm must be 0 or 1");
  auto rows = d.arm_indices(arm);
  if (rows.empty()) fail(ErrorKind::kEmptyArm, "no observations with a = " + std::to_string(arm));
  return rows;
}

}  // namespace detail

/// Full-sample fit: (K + N lambda I) alpha = r.
inline KrrModel fit(const KernelSpec& spec, const Eigen::Ref<const Matrix>& z,
                    const Eigen::Ref<const Vector>& r, double lambda) {
  detail::check_fit_inputs(z, r, lambda);
  auto support = std::make_shared<const Matrix>(z);
  const Matrix k = gram(spec, *support);
  const double n = static_cast<double>(z.rows());
  return KrrModel(spec, support, detail::solve_regularized(k, n * lambda, r));
}

/// Indicator-weighted fit: minimizes (1/n) sum (y - f(z))^2 1(a = arm) + lambda ||f||^2
/// with n = |d|. The dual system lives on the arm subset and scales lambda by
/// the full size: (K_arm + n lambda I) alpha = y_arm.
inline KrrModel fit_arm(const KernelSpec& spec, const LabeledDataset& d, int arm, double lambda) {
  const auto rows = detail::arm_rows_or_throw(d, arm);
  auto support = std::make_shared<const Matrix>(select_rows(d.z, rows));
  const Vector y = select_rows(d.y, rows);
  detail::check_fit_inputs(*support, y, lambda);
  const Matrix k = gram(spec, *support);
  return KrrModel(spec, support, detail::solve_regularized(k, static_cast<double>(d.size()) * lambda, y));
}

namespace detail {

/// One eigendecomposition K = Q diag(ev) Q' shared across a regularizer grid:
/// alpha(ridge) = Q (diag(ev) + ridge)^-1 Q' r.
inline std::vector<KrrModel> fit_ridges(const KernelSpec& spec, std::shared_ptr<const Matrix> support,
                                        const Vector& r, const std::vector<double>& ridges) {
  const Matrix k = gram(spec, *support);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
  if (eig.info() != Eigen::Success) fail(ErrorKind::kNumericalFailure, "eigendecomposition of the Gram matrix failed");
  const Eigen::MatrixXd& q = eig.eigenvectors();
  const Vector& ev = eig.eigenvalues();
  const Vector projected = q.transpose() * r;
  std::vector<KrrModel> out;
  out.reserve(ridges.size());
  for (double ridge : ridges) {
    const Vector denom = ev.array() + ridge;
    if ((denom.array() <= 0.0).any())
      fail(ErrorKind::kNumericalFailure, "regularized spectrum is not positive");
    Vector alpha = q * (projected.array() / denom.array()).matrix();
    out.emplace_back(spec, support, std::move(alpha));
  }
  return out;
}

inline void check_grid(const std::vector<double>& lambdas) {
  require(!lambdas.empty(), "regularizer grid is empty");
  for (double l : lambdas) require(l > 0 && std::isfinite(l), "regularizer grid values must be positive");
}

}  // namespace detail

/// fit() for every lambda in the grid, in grid order, reusing one eigendecomposition.
inline std::vector<KrrModel> fit_grid(const KernelSpec& spec, const Eigen::Ref<const Matrix>& z,
                                      const Eigen::Ref<const Vector>& r, const std::vector<double>& lambdas) {
  detail::check_grid(lambdas);
  detail::check_fit_inputs(z, r, lambdas.front());
  const double n = static_cast<double>(z.rows());
  std::vector<double> ridges;
  for (double l : lambdas) ridges.push_back(n * l);
  return detail::fit_ridges(spec, std::make_shared<const Matrix>(z), r, ridges);
}

/// fit_arm() for every lambda in the grid.
inline std::vector<KrrModel> fit_arm_grid(const KernelSpec& spec, const LabeledDataset& d, int arm,
                                          const std::vector<double>& lambdas) {
  detail::check_grid(lambdas);
  const auto rows = detail::arm_rows_or_throw(d, arm);
  auto support = std::make_shared<const Matrix>(select_rows(d.z, rows));
  const Vector y = select_rows(d.y, rows);
  detail::check_fit_inputs(*support, y, lambdas.front());
  const double n = static_cast<double>(d.size());
  std::vector<double> ridges;
  for (double l : lambdas) ridges.push_back(n * l);
  return detail::fit_ridges(spec, support, y, ridges);
}

inline Vector predict(const KrrModel& model, const Eigen::Ref<const Matrix>& z_new) {
  return model.predict(z_new);
}

/// (1/N) sum (r - f(z))^2 + lambda ||f||^2 for f = sum_j beta_j K(z_j, .)
/// supported on z itself, evaluated through the Gram matrix.
inline double penalized_objective(const Matrix& k, const Vector& r, const Vector& beta, double lambda) {
  const Vector fitted = k * beta;
  return (r - fitted).squaredNorm() / static_cast<double>(r.size()) + lambda * beta.dot(fitted);
}

}  // namespace coke
