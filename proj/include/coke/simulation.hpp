// Synthetic source/target data with covariate shift, weak treatment
// overlap, and nuisance outcome models rougher than the CATE.
//
// Covariates: p coordinates on (-pi, pi). The first q are "shifted": on the
// source each is drawn from U(-pi, 0) with probability w and from U(0, pi)
// otherwise, where w = S_B^(1/q) / (S_B^(1/q) + 1); on the target the block
// probabilities are swapped. Remaining coordinates are U(-pi, pi) on both.
//
// Treatment: a ~ Bernoulli(expit(S_R * sum_j z_j / 8)).
// Outcomes:  y = f_a(z) + N(0, noise_sd^2) with
//   f_a(z) = c * mean_{i<=q} g(|z_i|) + (a - 1/2) * mean_{i<=q} sin z_i,
//   g(t) = 2 (t - pi/4) if t >= pi/2 else t,
// so the CATE is h(z) = mean_{i<=q} sin z_i.
//
// Draw order per row (fixes reproducibility): for each coordinate j, shifted
// coordinates take one draw for the block and one for the position, others
// take one draw; source rows then take one draw for a and two for the noise.
#pragma once

#include "coke/cate.hpp"
#include "coke/core.hpp"
#include "coke/logistic.hpp"
#include "coke/rng.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

namespace coke::sim {

struct SimConfig {
  Index n = 1000;
  Index n_target = 250;
  Index p = 4;
  Index q = 1;
  double s_b = 10.0;
  double s_r = 2.0;
  double c = 1.0;
  double noise_sd = 0.5;
  std::uint64_t seed = 0;
  int reps = 1;
  Index n_eval = 10000;

  void validate() const {
    require(p >= 1 && q >= 1 && q < p, "need 1 <= q < p");
    require(n >= 1 && n_target >= 1 && n_eval >= 1, "sample sizes must be positive");
    require(s_b >= 1.0 && std::isfinite(s_b), "S_B must be >= 1");
    require(s_r >= 0.0 && std::isfinite(s_r), "S_R must be >= 0");
    require(c >= 0.0 && std::isfinite(c), "c must be >= 0");
    require(noise_sd >= 0.0 && std::isfinite(noise_sd), "noise sd must be >= 0");
    require(reps >= 1, "reps must be >= 1");
  }

  /// Probability that a shifted source coordinate lands in (-pi, 0).
  double source_negative_weight() const {
    const double s = std::pow(s_b, 1.0 / static_cast<double>(q));
    return s / (s + 1.0);
  }
  double target_positive_weight() const { return source_negative_weight(); }
};

/// Default target size coupled to the shift knobs: ceil(350 sqrt(S_B) + 60 S_R + 25).
inline Index coupled_target_size(double s_b, double s_r) {
  return static_cast<Index>(std::ceil(350.0 * std::sqrt(s_b) + 60.0 * s_r + 25.0));
}

inline double true_cate(const SimConfig& cfg, const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  double acc = 0.0;
  for (Index i = 0; i < cfg.q; ++i) acc += std::sin(z(i));
  return acc / static_cast<double>(cfg.q);
}

inline double true_outcome(const SimConfig& cfg, const Eigen::Ref<const Eigen::RowVectorXd>& z, int a) {
  constexpr double kPi = std::numbers::pi;
  double base = 0.0;
  for (Index i = 0; i < cfg.q; ++i) {
    const double t = std::abs(z(i));
    base += t >= kPi / 2 ? 2.0 * (t - kPi / 4) : t;
  }
  base *= cfg.c / static_cast<double>(cfg.q);
  return base + (static_cast<double>(a) - 0.5) * true_cate(cfg, z);
}

inline double propensity(const SimConfig& cfg, const Eigen::Ref<const Eigen::RowVectorXd>& z) {
  return expit(cfg.s_r * z.sum() / 8.0);
}

namespace detail {

template <typename Row>
void draw_covariate_row(const SimConfig& cfg, double negative_weight, CounterRng& rng, Row&& row) {
  constexpr double kPi = std::numbers::pi;
  for (Index j = 0; j < cfg.p; ++j) {
    if (j < cfg.q) {
      const bool negative = rng.uniform() < negative_weight;
      row(j) = negative ? rng.uniform(-kPi, 0.0) : rng.uniform(0.0, kPi);
    } else {
      row(j) = rng.uniform(-kPi, kPi);
    }
  }
}

inline Matrix draw_covariates(const SimConfig& cfg, Index rows, double negative_weight, CounterRng& rng) {
  Matrix z(rows, cfg.p);
  for (Index i = 0; i < rows; ++i) draw_covariate_row(cfg, negative_weight, rng, z.row(i));
  return z;
}

}  // namespace detail

inline LabeledDataset gen_source(const SimConfig& cfg, CounterRng& rng) {
  cfg.validate();
  const double w = cfg.source_negative_weight();
  LabeledDataset d;
  d.z.resize(cfg.n, cfg.p);
  d.a.resize(static_cast<std::size_t>(cfg.n));
  d.y.resize(cfg.n);
  for (Index i = 0; i < cfg.n; ++i) {
    detail::draw_covariate_row(cfg, w, rng, d.z.row(i));
    const int a = rng.bernoulli(propensity(cfg, d.z.row(i))) ? 1 : 0;
    d.a[static_cast<std::size_t>(i)] = a;
    d.y(i) = true_outcome(cfg, d.z.row(i), a) + cfg.noise_sd * rng.normal();
  }
  return d;
}

inline UnlabeledDataset gen_target(const SimConfig& cfg, CounterRng& rng, Index rows) {
  cfg.validate();
  return UnlabeledDataset{detail::draw_covariates(cfg, rows, 1.0 - cfg.target_positive_weight(), rng)};
}

inline UnlabeledDataset gen_target(const SimConfig& cfg, CounterRng& rng) {
  return gen_target(cfg, rng, cfg.n_target);
}

/// Ground-truth CATE as a Predictor.
inline FunctionPredictor cate_oracle(const SimConfig& cfg) {
  return FunctionPredictor([cfg](const Eigen::Ref<const Eigen::RowVectorXd>& z) { return true_cate(cfg, z); });
}

inline FunctionPredictor outcome_oracle(const SimConfig& cfg, int a) {
  return FunctionPredictor([cfg, a](const Eigen::Ref<const Eigen::RowVectorXd>& z) { return true_outcome(cfg, z, a); });
}

/// Target MSE of `model` on a caller-supplied evaluation sample, so several
/// models can be scored on identical draws.
template <Predictor Model>
double evaluate_mse_on(const Model& model, const SimConfig& cfg, const UnlabeledDataset& eval) {
  const Vector predicted = model.predict(eval.z);
  require(predicted.size() == eval.size(), "model returned the wrong number of predictions");
  double acc = 0.0;
  for (Index i = 0; i < eval.size(); ++i) {
    const double d = predicted(i) - true_cate(cfg, eval.z.row(i));
    acc += d * d;
  }
  return acc / static_cast<double>(eval.size());
}

/// Monte Carlo target MSE over cfg.n_eval fresh target draws.
template <Predictor Model>
double evaluate_mse(const Model& model, const SimConfig& cfg, CounterRng& rng) {
  return evaluate_mse_on(model, cfg, gen_target(cfg, rng, cfg.n_eval));
}

}  // namespace coke::sim
