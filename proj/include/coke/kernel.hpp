// Stationary kernels and Gram-matrix construction.
#pragma once

#include "coke/core.hpp"

#include <algorithm>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coke {

enum class KernelFamily {
  kMaternExp,    // (4 / (sqrt(pi) rho)) * exp(-2 sqrt(2) r / rho)
  kGaussian,     // amplitude * exp(-r^2 / (2 rho^2))
  kCustomTable,  // piecewise-linear radial profile k(r)
};

inline std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::kMaternExp: return "matern_exp";
    case KernelFamily::kGaussian: return "gaussian";
    case KernelFamily::kCustomTable: return "custom_table";
  }
  return "unknown";
}

inline KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "matern_exp" || name == "matern") return KernelFamily::kMaternExp;
  if (name == "gaussian") return KernelFamily::kGaussian;
  if (name == "custom_table" || name == "custom-table") return KernelFamily::kCustomTable;
  fail(ErrorKind::kInvalidInput, "unknown kernel family '" + std::string(name) + "'");
}

/// Radial profile for the custom-table family. `radii` must start at 0 and be
/// strictly increasing; the profile is held constant past the last knot.
struct RadialTable {
  std::vector<double> radii;
  std::vector<double> values;
  std::optional<double> declared_bound;
};

class KernelSpec {
 public:
  static KernelSpec matern_exp(double rho) {
    require(rho > 0 && std::isfinite(rho), "kernel scale rho must be positive");
    return KernelSpec(KernelFamily::kMaternExp, rho, 4.0 / (std::sqrt(std::numbers::pi) * rho), {});
  }

  static KernelSpec gaussian(double rho, double amplitude = 1.0) {
    require(rho > 0 && std::isfinite(rho), "kernel scale rho must be positive");
    require(amplitude > 0 && std::isfinite(amplitude), "kernel amplitude must be positive");
    return KernelSpec(KernelFamily::kGaussian, rho, amplitude, {});
  }

  static KernelSpec custom_table(RadialTable table, double rho = 1.0) {
    require(rho > 0, "kernel scale rho must be positive");
    require(!table.radii.empty() && table.radii.size() == table.values.size(),
            "custom kernel table needs matching nonempty radii and values");
    require(table.radii.front() == 0.0, "custom kernel table must start at radius 0");
    for (std::size_t i = 1; i < table.radii.size(); ++i)
      require(table.radii[i] > table.radii[i - 1], "custom kernel radii must be strictly increasing");
    require(table.values.front() > 0, "custom kernel value at radius 0 must be positive");
    const double at_zero = table.values.front();
    return KernelSpec(KernelFamily::kCustomTable, rho, at_zero, std::move(table));
  }

  /// Matérn-exp with the amplitude overridden.
  static KernelSpec matern_exp(double rho, double amplitude) {
    KernelSpec spec = matern_exp(rho);
    require(amplitude > 0 && std::isfinite(amplitude), "kernel amplitude must be positive");
    spec.amplitude_ = amplitude;
    return spec;
  }

  KernelFamily family() const { return family_; }
  double rho() const { return rho_; }
  double amplitude() const { return amplitude_; }
  const std::optional<RadialTable>& table() const { return table_; }

  /// Kernel value as a function of Euclidean distance.
  double radial(double distance) const {
    switch (family_) {
      case KernelFamily::kMaternExp:
        return amplitude_ * std::exp(-2.0 * std::numbers::sqrt2 * distance / rho_);
      case KernelFamily::kGaussian:
        return amplitude_ * std::exp(-distance * distance / (2.0 * rho_ * rho_));
      case KernelFamily::kCustomTable: {
        const auto& r = table_->radii;
        const auto& v = table_->values;
        const double x = distance / rho_;
        if (x >= r.back()) return v.back();
        const auto hi = static_cast<std::size_t>(std::upper_bound(r.begin(), r.end(), x) - r.begin());
        const std::size_t lo = hi - 1;
        const double t = (x - r[lo]) / (r[hi] - r[lo]);
        return v[lo] + t * (v[hi] - v[lo]);
      }
    }
    return 0.0;
  }

  template <typename A, typename B>
  double eval(const Eigen::MatrixBase<A>& z, const Eigen::MatrixBase<B>& w) const {
    require(z.size() == w.size(), "kernel arguments have different dimensions");
    double sq = 0.0;
    for (Index j = 0; j < z.size(); ++j) {
      const double d = z(j) - w(j);
      sq += d * d;
    }
    return radial(std::sqrt(sq));
  }

  /// sup_z K(z, z).
  double sup_bound() const {
    if (family_ == KernelFamily::kCustomTable) {
      if (!table_->declared_bound)
        fail(ErrorKind::kUnsupported, "custom-table kernel has no declared bound");
      return *table_->declared_bound;
    }
    return amplitude_;
  }

 private:
  KernelSpec(KernelFamily family, double rho, double amplitude, std::optional<RadialTable> table)
      : family_(family), rho_(rho), amplitude_(amplitude), table_(std::move(table)) {}

  KernelFamily family_;
  double rho_;
  double amplitude_;
  std::optional<RadialTable> table_;
};

inline double sup_bound(const KernelSpec& spec) { return spec.sup_bound(); }

/// Symmetric Gram matrix of Z with itself; upper triangle computed, lower mirrored.
inline Matrix gram(const KernelSpec& spec, const Eigen::Ref<const Matrix>& z) {
  const Index n = z.rows();
  Matrix k(n, n);
  for (Index i = 0; i < n; ++i) {
    k(i, i) = spec.eval(z.row(i), z.row(i));
    for (Index j = i + 1; j < n; ++j) {
      const double v = spec.eval(z.row(i), z.row(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

/// Cross Gram matrix, entry (i, j) = K(rows_i, cols_j).
inline Matrix gram(const KernelSpec& spec, const Eigen::Ref<const Matrix>& rows,
                   const Eigen::Ref<const Matrix>& cols) {
  require(rows.cols() == cols.cols(), "Gram arguments have different covariate dimensions");
  if (rows.data() == cols.data() && rows.rows() == cols.rows()) return gram(spec, rows);
  Matrix k(rows.rows(), cols.rows());
  for (Index i = 0; i < rows.rows(); ++i)
    for (Index j = 0; j < cols.rows(); ++j) k(i, j) = spec.eval(rows.row(i), cols.row(j));
  return k;
}

}  // namespace coke
