#include "coke/cate.hpp"
#include "helpers.hpp"

namespace coke {
namespace {

using testing::expect_error_kind;

FunctionPredictor constant(double c) {
  return FunctionPredictor([c](const Eigen::Ref<const Eigen::RowVectorXd>&) { return c; });
}

TEST(PseudoOutcomes, MixedExample) {
  LabeledDataset d;
  d.z = Matrix::Zero(2, 1);
  d.a = {1, 0};
  d.y.resize(2);
  d.y << 3.0, 1.0;
  const Vector m = pseudo_outcomes(d, constant(1.0), constant(3.0));
  EXPECT_DOUBLE_EQ(m(0), 2.0);
  EXPECT_DOUBLE_EQ(m(1), 2.0);
}

TEST(PseudoOutcomes, ZeroImputationFlipsControlSign) {
  const LabeledDataset d = testing::alternating_dataset(6, 2, 3);
  const Vector m = pseudo_outcomes(d, constant(0.0), constant(0.0));
  for (Index i = 0; i < d.size(); ++i) EXPECT_EQ(m(i), d.a[static_cast<std::size_t>(i)] ? d.y(i) : -d.y(i));
}

TEST(PseudoOutcomes, PerfectNuisancesRecoverEffect) {
  LabeledDataset d = testing::alternating_dataset(20, 1, 5);
  auto f0 = [](double z) { return z * z; };
  auto f1 = [](double z) { return z * z + std::sin(z); };
  for (Index i = 0; i < d.size(); ++i) d.y(i) = d.a[static_cast<std::size_t>(i)] ? f1(d.z(i, 0)) : f0(d.z(i, 0));
  const Vector m = pseudo_outcomes(d, FunctionPredictor([&](const auto& z) { return f0(z(0)); }),
                                   FunctionPredictor([&](const auto& z) { return f1(z(0)); }));
  for (Index i = 0; i < d.size(); ++i) EXPECT_NEAR(m(i), std::sin(d.z(i, 0)), 1e-15);
}

TEST(RaLearner, KnownControlZeroGivesTreatedOutcomes) {
  LabeledDataset d = testing::alternating_dataset(10, 1, 7);
  for (Index i = 0; i < d.size(); ++i) d.y(i) = d.a[static_cast<std::size_t>(i)] ? 1.5 : 0.0;
  const Vector m = pseudo_outcomes(d, constant(0.0), constant(1.5));
  for (Index i = 0; i < d.size(); ++i) {
    if (d.a[static_cast<std::size_t>(i)] == 1) {
      EXPECT_EQ(m(i), d.y(i));
    }
  }
}

TEST(RaLearner, GridMatchesSingleFits) {
  const KernelSpec k = KernelSpec::matern_exp(5.0);
  const LabeledDataset d = testing::alternating_dataset(24, 2, 9);
  const std::vector<double> l1{0.01, 0.1};
  const RaCandidates c = ra_learner_grid(k, d, 0.05, 0.02, l1);
  ASSERT_EQ(c.models.size(), 2u);
  const Matrix q = testing::random_matrix(5, 2, 10);
  for (std::size_t i = 0; i < l1.size(); ++i) {
    const CateModel single = ra_learner(k, d, RegularizerTriple{0.05, 0.02, l1[i]});
    EXPECT_LE((c.models[i].predict(q) - single.predict(q)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(RaLearner, EmptyArm) {
  LabeledDataset d = testing::alternating_dataset(6, 1, 11);
  for (auto& a : d.a) a = 0;
  expect_error_kind([&] { ra_learner(KernelSpec::matern_exp(5.0), d, RegularizerTriple{0.1, 0.1, 0.1}); },
                    ErrorKind::kEmptyArm);
}

TEST(RaLearner, RejectsNonPositiveRegularizer) {
  const LabeledDataset d = testing::alternating_dataset(6, 1, 12);
  expect_error_kind([&] { ra_learner(KernelSpec::matern_exp(5.0), d, RegularizerTriple{0.1, 0.0, 0.1}); },
                    ErrorKind::kInvalidInput);
}

TEST(SeparateRegression, SymmetricArmsGiveZero) {
  LabeledDataset d;
  const Matrix z = testing::random_matrix(8, 2, 13);
  d.z.resize(16, 2);
  d.z << z, z;
  d.a.assign(16, 0);
  for (int i = 8; i < 16; ++i) d.a[static_cast<std::size_t>(i)] = 1;
  d.y.resize(16);
  for (Index i = 0; i < 16; ++i) d.y(i) = std::cos(d.z(i, 0)) + d.z(i, 1);
  const CateModel h = separate_regression(KernelSpec::matern_exp(5.0), d, 1e-8, 1e-8);
  EXPECT_LE(h.predict(d.z).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SeparateRegression, ConstantEffectRecovered) {
  // Evenly spaced line with treated rows at both ends, so every control row
  // sits between treated neighbours.
  LabeledDataset d;
  d.z = Eigen::VectorXd::LinSpaced(41, 0.0, 2.0);
  d.y.resize(41);
  d.a.resize(41);
  for (Index i = 0; i < 41; ++i) {
    d.a[static_cast<std::size_t>(i)] = i % 2 == 0;
    d.y(i) = i % 2 == 0 ? 0.7 : 0.0;
  }
  const CateModel h = separate_regression(KernelSpec::matern_exp(5.0), d, 1e-8, 1e-8);
  const Vector p = h.predict(d.z);
  for (Index i = 0; i < d.size(); ++i) EXPECT_NEAR(p(i), 0.7, 1e-3);
}

TEST(CateModel, AverageIsMeanOfMembers) {
  const KernelSpec k = KernelSpec::matern_exp(5.0);
  const Matrix z = testing::random_matrix(6, 2, 15);
  const CateModel a = CateModel::single(fit(k, z, testing::random_vector(6, 16), 0.1));
  const CateModel b = CateModel::single(fit(k, z, testing::random_vector(6, 17), 0.1));
  const CateModel avg = CateModel::average({a, b});
  const Matrix q = testing::random_matrix(4, 2, 18);
  EXPECT_LE((avg.predict(q) - 0.5 * (a.predict(q) + b.predict(q))).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(avg.dim(), 2);
}

TEST(CateModel, DifferenceDimensionsMustAgree) {
  const KernelSpec k = KernelSpec::matern_exp(5.0);
  const KrrModel f1 = fit(k, testing::random_matrix(3, 2, 1), Vector::Ones(3), 0.1);
  const KrrModel f0 = fit(k, testing::random_matrix(3, 3, 2), Vector::Ones(3), 0.1);
  expect_error_kind([&] { CateModel::difference(f1, f0); }, ErrorKind::kInvalidInput);
  expect_error_kind([] { CateModel::average({}); }, ErrorKind::kInvalidInput);
}

}  // namespace
}  // namespace coke
