// Core types shared by every coke module: dense linear algebra aliases,
// the error type, and the labeled/unlabeled dataset containers.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace coke {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

enum class ErrorKind {
  kInvalidInput,
  kEmptyArm,
  kNumericalFailure,
  kUnsupported,
  kUndefined,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "InvalidInput";
    case ErrorKind::kEmptyArm: return "EmptyArm";
    case ErrorKind::kNumericalFailure: return "NumericalFailure";
    case ErrorKind::kUnsupported: return "Unsupported";
    case ErrorKind::kUndefined: return "Undefined";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, const std::string& what) {
  if (!condition) fail(ErrorKind::kInvalidInput, what);
}

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.allFinite();
}

/// Observations {(z_i, a_i, y_i)} drawn from the source population.
struct LabeledDataset {
  Matrix z;
  std::vector<int> a;
  Vector y;

  Index size() const { return z.rows(); }
  Index dim() const { return z.cols(); }

  void validate() const {
    require(static_cast<Index>(a.size()) == z.rows() && y.size() == z.rows(),
            "labeled dataset columns have unequal lengths");
    for (int v : a) require(v == 0 || v == 1, "treatment indicator must be 0 or 1");
    require(all_finite(z) && all_finite(y), "labeled dataset contains non-finite values");
  }

  Index arm_count(int arm) const {
    Index count = 0;
    for (int v : a) count += (v == arm);
    return count;
  }

  /// Rows with a_i == arm, in original order.
  std::vector<Index> arm_indices(int arm) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] == arm) out.push_back(static_cast<Index>(i));
    return out;
  }

  LabeledDataset subset(const std::vector<Index>& rows) const {
    LabeledDataset out;
    out.z.resize(static_cast<Index>(rows.size()), z.cols());
    out.y.resize(static_cast<Index>(rows.size()));
    out.a.resize(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const Index r = rows[k];
      out.z.row(static_cast<Index>(k)) = z.row(r);
      out.y(static_cast<Index>(k)) = y(r);
      out.a[k] = a[static_cast<std::size_t>(r)];
    }
    return out;
  }
};

/// Target covariates; outcomes and treatments are unobserved.
struct UnlabeledDataset {
  Matrix z;

  Index size() const { return z.rows(); }
  Index dim() const { return z.cols(); }

  void validate() const {
    require(z.rows() >= 1, "unlabeled dataset is empty");
    require(all_finite(z), "unlabeled dataset contains non-finite values");
  }

  UnlabeledDataset subset(const std::vector<Index>& rows) const {
    UnlabeledDataset out;
    out.z.resize(static_cast<Index>(rows.size()), z.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.z.row(static_cast<Index>(k)) = z.row(rows[k]);
    return out;
  }
};

/// Copies the listed rows of a matrix or vector, in list order.
template <typename Derived>
typename Derived::PlainObject select_rows(const Eigen::DenseBase<Derived>& m, const std::vector<Index>& rows) {
  typename Derived::PlainObject out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = m.row(rows[k]);
  return out;
}

inline double mean_squared_difference(const Vector& x, const Vector& y) {
  require(x.size() == y.size() && x.size() > 0, "mean squared difference needs equal nonempty vectors");
  return (x - y).squaredNorm() / static_cast<double>(x.size());
}

}  // namespace coke
