// CATE models and the first-stage learners that produce them: the
// regression-adjustment (RA) learner and plain separate regression.
#pragma once

#include "coke/core.hpp"
#include "coke/krr.hpp"

#include <concepts>
#include <functional>
#include <memory>
#include <variant>
#include <vector>

namespace coke {

/// Anything that maps a covariate matrix to one prediction per row.
template <typename P>
concept Predictor = requires(const P& p, const Matrix& z) {
  { p.predict(z) } -> std::convertible_to<Vector>;
};

/// Wraps a pointwise function as a Predictor. Used to inject analytic
/// nuisances or ground truth in place of fitted models.
class FunctionPredictor {
 public:
  using Fn = std::function<double(const Eigen::Ref<const Eigen::RowVectorXd>&)>;

  explicit FunctionPredictor(Fn fn) : fn_(std::move(fn)) {}

  Vector predict(const Eigen::Ref<const Matrix>& z) const {
    Vector out(z.rows());
    for (Index i = 0; i < z.rows(); ++i) out(i) = fn_(z.row(i));
    return out;
  }

 private:
  Fn fn_;
};

/// Composition tree over KRR fits: f1 - f0, a single KRR, or an equal-weight
/// average of sub-models.
class CateModel {
 public:
  struct Difference {
    KrrModel f1;
    KrrModel f0;
  };
  struct Single {
    KrrModel h;
  };
  struct Average {
    std::vector<CateModel> members;
  };
  using Node = std::variant<Difference, Single, Average>;

  static CateModel difference(KrrModel f1, KrrModel f0) {
    require(f1.dim() == f0.dim(), "difference members have different covariate dimensions");
    return CateModel(Difference{std::move(f1), std::move(f0)});
  }
  static CateModel single(KrrModel h) { return CateModel(Single{std::move(h)}); }
  static CateModel average(std::vector<CateModel> members) {
    require(!members.empty(), "average of zero models");
    for (const auto& m : members) require(m.dim() == members.front().dim(), "averaged models differ in dimension");
    return CateModel(Average{std::move(members)});
  }

  const Node& node() const { return *node_; }

  Index dim() const {
    return std::visit(
        [](const auto& n) -> Index {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Difference>) return n.f1.dim();
          else if constexpr (std::is_same_v<T, Single>) return n.h.dim();
          else return n.members.front().dim();
        },
        *node_);
  }

  Vector predict(const Eigen::Ref<const Matrix>& z) const {
    return std::visit(
        [&](const auto& n) -> Vector {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Difference>) {
            return n.f1.predict(z) - n.f0.predict(z);
          } else if constexpr (std::is_same_v<T, Single>) {
            return n.h.predict(z);
          } else {
            Vector acc = Vector::Zero(z.rows());
            for (const auto& m : n.members) acc += m.predict(z);
            return acc / static_cast<double>(n.members.size());
          }
        },
        *node_);
  }

 private:
  explicit CateModel(Node node) : node_(std::make_shared<const Node>(std::move(node))) {}

  std::shared_ptr<const Node> node_;
};

struct RegularizerTriple {
  double lambda00;  // control-arm nuisance
  double lambda01;  // treated-arm nuisance
  double lambda1;   // second stage

  void validate() const {
    require(lambda00 > 0 && lambda01 > 0 && lambda1 > 0, "regularizers must be positive");
  }
};

/// m_i = y_i - f0(z_i) on treated rows, f1(z_i) - y_i on control rows.
template <Predictor P0, Predictor P1>
Vector pseudo_outcomes(const LabeledDataset& d, const P0& f0, const P1& f1) {
  d.validate();
  const Vector p0 = f0.predict(d.z);
  const Vector p1 = f1.predict(d.z);
  require(p0.size() == d.size() && p1.size() == d.size(), "nuisance predictions have the wrong length");
  Vector m(d.size());
  for (Index i = 0; i < d.size(); ++i)
    m(i) = d.a[static_cast<std::size_t>(i)] == 1 ? d.y(i) - p0(i) : p1(i) - d.y(i);
  return m;
}

/// Output of the RA learner over a grid of second-stage regularizers. Every
/// candidate shares the same nuisance fits and pseudo-outcomes.
struct RaCandidates {
  KrrModel f0;
  KrrModel f1;
  Vector pseudo;
  std::vector<double> lambda1s;
  std::vector<CateModel> models;
};

inline RaCandidates ra_learner_grid(const KernelSpec& spec, const LabeledDataset& d1, double lambda00,
                                    double lambda01, const std::vector<double>& lambda1s) {
  d1.validate();
  KrrModel f0 = fit_arm(spec, d1, 0, lambda00);
  KrrModel f1 = fit_arm(spec, d1, 1, lambda01);
  Vector m = pseudo_outcomes(d1, f0, f1);
  std::vector<CateModel> models;
  for (auto& h : fit_grid(spec, d1.z, m, lambda1s)) models.push_back(CateModel::single(std::move(h)));
  return RaCandidates{std::move(f0), std::move(f1), std::move(m), lambda1s, std::move(models)};
}

/// RA learner: nuisances on both arms of d1, pseudo-outcomes on all of d1,
/// then a full-sample KRR of the pseudo-outcomes.
inline CateModel ra_learner(const KernelSpec& spec, const LabeledDataset& d1, const RegularizerTriple& lambda) {
  lambda.validate();
  d1.validate();
  const KrrModel f0 = fit_arm(spec, d1, 0, lambda.lambda00);
  const KrrModel f1 = fit_arm(spec, d1, 1, lambda.lambda01);
  return CateModel::single(fit(spec, d1.z, pseudo_outcomes(d1, f0, f1), lambda.lambda1));
}

/// RA learner with caller-supplied nuisances in place of the arm fits.
template <Predictor P0, Predictor P1>
CateModel ra_learner_with_nuisances(const KernelSpec& spec, const LabeledDataset& d1, const P0& f0,
                                    const P1& f1, double lambda1) {
  return CateModel::single(fit(spec, d1.z, pseudo_outcomes(d1, f0, f1), lambda1));
}

inline CateModel separate_regression(const KernelSpec& spec, const LabeledDataset& d, double lambda0,
                                     double lambda1) {
  d.validate();
  KrrModel f0 = fit_arm(spec, d, 0, lambda0);
  KrrModel f1 = fit_arm(spec, d, 1, lambda1);
  return CateModel::difference(std::move(f1), std::move(f0));
}

}  // namespace coke
