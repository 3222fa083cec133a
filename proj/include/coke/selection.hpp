// Model selection against imputed target outcomes.
#pragma once

#include "coke/cate.hpp"
#include "coke/core.hpp"
#include "coke/kernel.hpp"
#include "coke/krr.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace coke {

struct SelectionReport {
  std::vector<double> losses;
  std::size_t chosen_index = 0;
  std::optional<RegularizerTriple> lambda_chosen;
};

/// xi * log(n) / n, the default imputation and nuisance regularizer.
inline double theory_lambda(double xi, Index n) {
  require(n >= 2, "theory regularizer needs n >= 2");
  const double dn = static_cast<double>(n);
  return xi * std::log(dn) / dn;
}

/// h~ = f~1 - f~0 with both arms fitted by the indicator-weighted objective on d2.
inline CateModel build_imputation(const KernelSpec& spec, const LabeledDataset& d2, double lambda0,
                                  double lambda1) {
  d2.validate();
  KrrModel f0 = fit_arm(spec, d2, 0, lambda0);
  KrrModel f1 = fit_arm(spec, d2, 1, lambda1);
  return CateModel::difference(std::move(f1), std::move(f0));
}

/// Index of the minimum loss. Exact ties go to the smallest entry of
/// `tie_keys` (when given), then to the smallest index.
inline std::size_t argmin_with_ties(const std::vector<double>& losses, const std::vector<double>& tie_keys = {}) {
  require(!losses.empty(), "cannot select from an empty candidate list");
  require(tie_keys.empty() || tie_keys.size() == losses.size(), "tie keys must match the candidate count");
  std::size_t best = 0;
  for (std::size_t i = 1; i < losses.size(); ++i) {
    if (losses[i] < losses[best]) {
      best = i;
    } else if (losses[i] == losses[best] && !tie_keys.empty() && tie_keys[i] < tie_keys[best]) {
      best = i;
    }
  }
  return best;
}

/// L(h) = mean over target rows of (h~(z) - h(z))^2 for each candidate, and
/// the argmin. `lambda1s`, when supplied, orders exact ties.
template <Predictor Candidate, Predictor Imputation>
SelectionReport select(const std::vector<Candidate>& candidates, const Imputation& imputation,
                       const UnlabeledDataset& target, const std::vector<double>& lambda1s = {}) {
  require(!candidates.empty(), "cannot select from an empty candidate list");
  target.validate();
  const Vector labels = imputation.predict(target.z);
  SelectionReport report;
  report.losses.reserve(candidates.size());
  for (const auto& c : candidates) report.losses.push_back(mean_squared_difference(labels, c.predict(target.z)));
  report.chosen_index = argmin_with_ties(report.losses, lambda1s);
  return report;
}

}  // namespace coke
